#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spamzero/content_prep.hpp"

namespace spamzero {

enum class Role { system, user };

struct ChatMessage {
    Role role;
    std::string text;
};

using ChatMessages = std::vector<ChatMessage>;

enum class BundleName { raw_classify, summarize, summary_classify };

/// One system/task prompt pair. The task template carries exactly one
/// slot, {email} or {summary}, between the two "###" delimiter lines.
struct PromptBundle {
    BundleName name;
    std::string system_text;
    std::string task_template;
};

struct PromptSet {
    PromptBundle raw_classify;
    PromptBundle summarize;
    PromptBundle summary_classify;

    static PromptSet builtin();

    /// Loads the six template files from a directory (override for A/B
    /// prompt experiments): <name>.system.txt and <name>.task.txt.
    static PromptSet load(const std::filesystem::path& dir);

    /// Digest over all six texts, recorded in run manifests.
    std::string digest() const;
};

ChatMessages render_raw_classification(const PreparedContent& p, const PromptSet& prompts);
ChatMessages render_summarization(const PreparedContent& p, const PromptSet& prompts);
ChatMessages render_summary_classification(std::string_view summary, const PromptSet& prompts);

}  // namespace spamzero
