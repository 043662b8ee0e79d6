#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spamzero {

enum class Category { spam, spam_2, easy_ham, easy_ham_2, hard_ham };
enum class GoldLabel { spam, ham };

std::string_view category_name(Category c);
std::optional<Category> category_from_name(std::string_view name);
GoldLabel label_from_category(Category c);
std::string_view label_name(GoldLabel l);
std::optional<GoldLabel> label_from_name(std::string_view name);

/// One raw message file, as found on disk.
struct RawMessage {
    std::filesystem::path source_path;
    Category category;
    std::string bytes;
};

/// One parsed, labeled corpus message.
struct EmailContent {
    std::string id;  // sha256 of the raw bytes
    std::string subject;
    std::string body;
    GoldLabel gold_label;
};

struct ParseStats {
    std::size_t warnings = 0;
};

/// Collects every regular file under the recognized category directories,
/// in lexicographic path order. Files named "cmds" or starting with '.'
/// are skipped.
std::vector<RawMessage> scan_corpus(const std::filesystem::path& root_dir);

/// Extracts the decoded Subject and the text body of one raw message.
/// Never throws on malformed input; a structurally broken message falls
/// back to a lossy decode of the whole payload and bumps stats.warnings.
EmailContent parse_message(const RawMessage& msg, ParseStats* stats = nullptr);

}  // namespace spamzero
