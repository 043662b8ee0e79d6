#include "spamzero/content_prep.hpp"

#include "spamzero/text.hpp"

namespace spamzero {

std::string_view estimator_name(Estimator e) {
    switch (e) {
        case Estimator::chars_div_4: return "chars_div_4";
        case Estimator::whitespace_words: return "whitespace_words";
        case Estimator::pluggable_exact: return "pluggable_exact";
    }
    return "?";
}

std::optional<Estimator> estimator_from_name(std::string_view name) {
    if (name == "chars_div_4") return Estimator::chars_div_4;
    if (name == "whitespace_words") return Estimator::whitespace_words;
    if (name == "pluggable_exact") return Estimator::pluggable_exact;
    return std::nullopt;
}

std::size_t estimate_tokens(std::string_view t, const TruncationPolicy& policy) {
    switch (policy.estimator) {
        case Estimator::chars_div_4:
            return (text::scalar_count(t) + 3) / 4;
        case Estimator::whitespace_words: {
            std::size_t n = 0;
            bool in_word = false;
            for (char c : t) {
                if (text::is_ascii_space(c)) {
                    in_word = false;
                } else if (!in_word) {
                    ++n;
                    in_word = true;
                }
            }
            return n;
        }
        case Estimator::pluggable_exact:
            if (policy.exact_counter) return policy.exact_counter(t);
            return (text::scalar_count(t) + 3) / 4;
    }
    return 0;
}

std::string sanitize_delimiters(std::string_view t) {
    std::string out;
    out.reserve(t.size());
    std::size_t i = 0;
    while (i < t.size()) {
        if (t[i] == '#') {
            std::size_t run = 1;
            while (i + run < t.size() && t[i + run] == '#') ++run;
            out.append(run >= 3 ? 2 : run, '#');
            i += run;
        } else {
            out.push_back(t[i]);
            ++i;
        }
    }
    return out;
}

namespace {

// Largest scalar-prefix of `body` whose estimate fits in `budget`.
// Estimates are nondecreasing in prefix length, so binary search applies.
std::size_t fit_prefix_scalars(std::string_view body, std::size_t budget,
                               const TruncationPolicy& policy) {
    const std::size_t total = text::scalar_count(body);
    std::size_t lo = 0, hi = total;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        std::string_view prefix = body.substr(0, text::scalar_prefix_bytes(body, mid));
        if (estimate_tokens(prefix, policy) <= budget) lo = mid;
        else hi = mid - 1;
    }
    return lo;
}

constexpr std::size_t kLookbackScalars = 20;

}  // namespace

PreparedContent truncate_body(const EmailContent& content, const TruncationPolicy& policy) {
    PreparedContent out;
    out.email_id = content.id;
    out.subject = sanitize_delimiters(content.subject);
    const std::string body = sanitize_delimiters(content.body);

    const std::size_t subject_cost = estimate_tokens(out.subject, policy);
    if (subject_cost > policy.max_content_tokens) {
        out.body.clear();
        out.truncated = !body.empty();
        return out;
    }
    const std::size_t budget = policy.max_content_tokens - subject_cost;
    if (estimate_tokens(body, policy) <= budget) {
        out.body = body;
        out.truncated = false;
        return out;
    }

    std::size_t keep = fit_prefix_scalars(body, budget, policy);
    std::size_t cut = text::scalar_prefix_bytes(body, keep);

    // Mid-word cut: back up to just after the last whitespace within the
    // lookback window, when there is one.
    const bool mid_word = cut > 0 && cut < body.size() &&
                          !text::is_ascii_space(body[cut - 1]) &&
                          !text::is_ascii_space(body[cut]);
    if (mid_word) {
        std::size_t scanned = 0;
        std::size_t i = cut;
        while (i > 0 && scanned < kLookbackScalars) {
            --i;
            while (i > 0 && (static_cast<unsigned char>(body[i]) & 0xC0) == 0x80) --i;
            ++scanned;
            if (text::is_ascii_space(body[i])) {
                cut = i + 1;
                break;
            }
        }
    }

    out.body = body.substr(0, cut);
    out.truncated = cut < body.size();
    return out;
}

}  // namespace spamzero
