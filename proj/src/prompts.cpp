#include "spamzero/prompts.hpp"

#include <fstream>
#include <sstream>

#include "spamzero/errors.hpp"
#include "spamzero/text.hpp"

namespace spamzero {

namespace {

constexpr std::string_view kRawClassifySystem =
    "You are an expert email spam classifier, capable of accurately identifying emails as "
    "either spam or ham based on their [SUBJECT] and [BODY].";

constexpr std::string_view kRawClassifyTask =
    "The text of an email will be delimited within triple hash symbols ('###') and will "
    "consist of two sections: the subject and the body, which will be tagged accordingly as "
    "[SUBJECT] and [BODY]. Please classify the following email with a one-word answer, "
    "\"spam\" or \"ham\".\n"
    "\n"
    "###\n"
    "\n"
    "{email}\n"
    "\n"
    "###\n"
    "\n"
    "Answer:";

constexpr std::string_view kSummarizeSystem =
    "Assume the role of an expert email summariser with the ability to accurately identify "
    "and analyse various elements of emails, including sender, receiver, subject, date, "
    "content type, content, priority, email server, email protocol, and more. You should "
    "also be capable of recognising elements within the email's content, such as its "
    "purpose, intent, style, vocabulary, languages (including natural and computer "
    "languages), and be able to provide a comprehensive description and an accurate "
    "summary, encompassing the aforementioned elements and aspects.";

constexpr std::string_view kSummarizeTask =
    "The content of an email will be provided below, enclosed within triple hash symbols "
    "('###'). Please summarise it ensuring that your entire answer stays within 500 "
    "tokens.\n"
    "\n"
    "###\n"
    "\n"
    "{email}\n"
    "\n"
    "###\n"
    "\n"
    "Answer:";

constexpr std::string_view kSummaryClassifySystem =
    "Assume the role of an expert email spam classifier, capable of accurately identifying "
    "emails as either spam or ham based on a summary of their most relevant elements.";

constexpr std::string_view kSummaryClassifyTask =
    "The summary of an email will be provided below, enclosed within triple hash symbols "
    "('###'). Please classify it with a one-word answer, \"spam\" or \"ham\".\n"
    "\n"
    "###\n"
    "\n"
    "{summary}\n"
    "\n"
    "###\n"
    "\n"
    "Answer:";

std::string_view bundle_basename(BundleName n) {
    switch (n) {
        case BundleName::raw_classify: return "raw_classify";
        case BundleName::summarize: return "summarize";
        case BundleName::summary_classify: return "summary_classify";
    }
    return "?";
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read prompt template: " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string s = std::move(buf).str();
    // Template files end with a trailing newline; the template itself does not.
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

PromptBundle load_bundle(const std::filesystem::path& dir, BundleName n) {
    const std::string base(bundle_basename(n));
    return PromptBundle{n, read_file(dir / (base + ".system.txt")),
                        read_file(dir / (base + ".task.txt"))};
}

void require_sanitized(std::string_view what, std::string_view content) {
    if (content.find("###") != std::string_view::npos) {
        throw UnsanitizedContent(std::string(what) + " contains '###'; sanitize first");
    }
}

std::string fill_slot(std::string_view tmpl, std::string_view marker, std::string_view value) {
    std::size_t pos = tmpl.find(marker);
    if (pos == std::string_view::npos) {
        throw Error("prompt template is missing its " + std::string(marker) + " slot");
    }
    std::string out(tmpl.substr(0, pos));
    out.append(value);
    out.append(tmpl.substr(pos + marker.size()));
    return out;
}

std::string email_block(const PreparedContent& p) {
    return "[SUBJECT] " + p.subject + "\n[BODY] " + p.body;
}

ChatMessages make_messages(const PromptBundle& bundle, std::string_view marker,
                           std::string_view value) {
    return {ChatMessage{Role::system, bundle.system_text},
            ChatMessage{Role::user, fill_slot(bundle.task_template, marker, value)}};
}

}  // namespace

PromptSet PromptSet::builtin() {
    return PromptSet{
        PromptBundle{BundleName::raw_classify, std::string(kRawClassifySystem),
                     std::string(kRawClassifyTask)},
        PromptBundle{BundleName::summarize, std::string(kSummarizeSystem),
                     std::string(kSummarizeTask)},
        PromptBundle{BundleName::summary_classify, std::string(kSummaryClassifySystem),
                     std::string(kSummaryClassifyTask)},
    };
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    return PromptSet{load_bundle(dir, BundleName::raw_classify),
                     load_bundle(dir, BundleName::summarize),
                     load_bundle(dir, BundleName::summary_classify)};
}

std::string PromptSet::digest() const {
    std::string all;
    for (const PromptBundle* b : {&raw_classify, &summarize, &summary_classify}) {
        all += b->system_text;
        all.push_back('\x1f');
        all += b->task_template;
        all.push_back('\x1f');
    }
    return text::sha256_hex(all);
}

ChatMessages render_raw_classification(const PreparedContent& p, const PromptSet& prompts) {
    require_sanitized("subject", p.subject);
    require_sanitized("body", p.body);
    return make_messages(prompts.raw_classify, "{email}", email_block(p));
}

ChatMessages render_summarization(const PreparedContent& p, const PromptSet& prompts) {
    require_sanitized("subject", p.subject);
    require_sanitized("body", p.body);
    return make_messages(prompts.summarize, "{email}", email_block(p));
}

ChatMessages render_summary_classification(std::string_view summary, const PromptSet& prompts) {
    require_sanitized("summary", summary);
    return make_messages(prompts.summary_classify, "{summary}", summary);
}

}  // namespace spamzero
