#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "spamzero/corpus.hpp"

namespace spamzero {

enum class Estimator { chars_div_4, whitespace_words, pluggable_exact };

std::string_view estimator_name(Estimator e);
std::optional<Estimator> estimator_from_name(std::string_view name);

struct TruncationPolicy {
    std::size_t max_content_tokens = 512;
    Estimator estimator = Estimator::chars_div_4;
    // Used only with Estimator::pluggable_exact.
    std::function<std::size_t(std::string_view)> exact_counter;
};

/// Subject plus budget-truncated, delimiter-sanitized body.
struct PreparedContent {
    std::string email_id;
    std::string subject;
    std::string body;
    bool truncated = false;
};

std::size_t estimate_tokens(std::string_view text, const TruncationPolicy& policy);

/// Replaces every maximal run of 3+ '#' with exactly "##".
std::string sanitize_delimiters(std::string_view text);

/// Sanitizes subject and body, then cuts the body to the largest prefix
/// keeping estimate(subject) + estimate(body) within the budget. The cut
/// backs up to a whitespace boundary when one exists within the last 20
/// scalars. The subject is never truncated.
PreparedContent truncate_body(const EmailContent& content, const TruncationPolicy& policy);

}  // namespace spamzero
