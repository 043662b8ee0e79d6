#include "spamzero/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "spamzero/errors.hpp"
#include "spamzero/text.hpp"

namespace spamzero {

namespace fs = std::filesystem;

std::string_view category_name(Category c) {
    switch (c) {
        case Category::spam: return "spam";
        case Category::spam_2: return "spam_2";
        case Category::easy_ham: return "easy_ham";
        case Category::easy_ham_2: return "easy_ham_2";
        case Category::hard_ham: return "hard_ham";
    }
    return "?";
}

std::optional<Category> category_from_name(std::string_view name) {
    if (name == "spam") return Category::spam;
    if (name == "spam_2") return Category::spam_2;
    if (name == "easy_ham") return Category::easy_ham;
    if (name == "easy_ham_2") return Category::easy_ham_2;
    if (name == "hard_ham") return Category::hard_ham;
    return std::nullopt;
}

GoldLabel label_from_category(Category c) {
    switch (c) {
        case Category::spam:
        case Category::spam_2:
            return GoldLabel::spam;
        case Category::easy_ham:
        case Category::easy_ham_2:
        case Category::hard_ham:
            return GoldLabel::ham;
    }
    throw UnknownCategory("unknown corpus category");
}

std::string_view label_name(GoldLabel l) {
    return l == GoldLabel::spam ? "spam" : "ham";
}

std::optional<GoldLabel> label_from_name(std::string_view name) {
    if (name == "spam") return GoldLabel::spam;
    if (name == "ham") return GoldLabel::ham;
    return std::nullopt;
}

std::vector<RawMessage> scan_corpus(const fs::path& root_dir) {
    if (!fs::exists(root_dir) || !fs::is_directory(root_dir)) {
        throw MissingRoot("corpus root not found: " + root_dir.string());
    }
    static constexpr std::array<Category, 5> kCategories = {
        Category::spam, Category::spam_2, Category::easy_ham,
        Category::easy_ham_2, Category::hard_ham};

    std::vector<std::pair<fs::path, Category>> files;
    bool any_category = false;
    for (Category c : kCategories) {
        fs::path dir = root_dir / std::string(category_name(c));
        if (!fs::is_directory(dir)) continue;
        any_category = true;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name == "cmds" || name.empty() || name[0] == '.') continue;
            files.emplace_back(entry.path(), c);
        }
    }
    if (!any_category) {
        throw NoCategories("no recognized category directory under " + root_dir.string());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.first.string() < b.first.string(); });

    std::vector<RawMessage> out;
    out.reserve(files.size());
    for (auto& [path, cat] : files) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string bytes = std::move(buf).str();
        if (bytes.empty()) continue;
        out.push_back(RawMessage{path, cat, std::move(bytes)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// MIME internals
// ---------------------------------------------------------------------------

namespace {

void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

constexpr uint32_t kReplacement = 0xFFFD;

// Validates UTF-8, replacing any malformed sequence with U+FFFD.
std::string utf8_lossy(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        unsigned char b = in[i];
        std::size_t len;
        uint32_t cp;
        if (b < 0x80) { len = 1; cp = b; }
        else if ((b & 0xE0) == 0xC0) { len = 2; cp = b & 0x1F; }
        else if ((b & 0xF0) == 0xE0) { len = 3; cp = b & 0x0F; }
        else if ((b & 0xF8) == 0xF0) { len = 4; cp = b & 0x07; }
        else { append_utf8(out, kReplacement); ++i; continue; }

        if (i + len > in.size()) { append_utf8(out, kReplacement); ++i; continue; }
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
            unsigned char c = in[i + k];
            if ((c & 0xC0) != 0x80) { ok = false; break; }
            cp = (cp << 6) | (c & 0x3F);
        }
        if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
            (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
            append_utf8(out, kReplacement);
            ++i;
            continue;
        }
        out.append(in.substr(i, len));
        i += len;
    }
    return out;
}

// Windows-1252 codepoints for bytes 0x80..0x9F; Latin-1 elsewhere.
constexpr std::array<uint16_t, 32> kCp1252High = {
    0x20AC, 0xFFFD, 0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
    0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0xFFFD, 0x017D, 0xFFFD,
    0xFFFD, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
    0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0xFFFD, 0x017E, 0xFFFD};

std::string latin1_to_utf8(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (unsigned char b : in) {
        if (b < 0x80) out.push_back(static_cast<char>(b));
        else if (b < 0xA0) append_utf8(out, kCp1252High[b - 0x80]);
        else append_utf8(out, b);
    }
    return out;
}

bool is_latin1_family(std::string_view cs) {
    return cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1" ||
           cs == "windows-1252" || cs == "cp1252" || cs == "iso-8859-15";
}

std::string decode_charset(std::string_view raw, std::string_view charset) {
    std::string cs = text::to_lower_ascii(charset);
    if (is_latin1_family(cs)) return latin1_to_utf8(raw);
    // utf-8, us-ascii, unknown: lossy UTF-8 validation
    return utf8_lossy(raw);
}

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string decode_quoted_printable(std::string_view in, bool rfc2047_q) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        char c = in[i];
        if (c == '=' && i + 1 < in.size()) {
            // soft line break
            if (in[i + 1] == '\n') { i += 2; continue; }
            if (in[i + 1] == '\r' && i + 2 < in.size() && in[i + 2] == '\n') { i += 3; continue; }
            if (i + 2 < in.size()) {
                int hi = hex_val(in[i + 1]);
                int lo = hex_val(in[i + 2]);
                if (hi >= 0 && lo >= 0) {
                    out.push_back(static_cast<char>((hi << 4) | lo));
                    i += 3;
                    continue;
                }
            }
            out.push_back(c);
            ++i;
        } else if (rfc2047_q && c == '_') {
            out.push_back(' ');
            ++i;
        } else {
            out.push_back(c);
            ++i;
        }
    }
    return out;
}

int base64_val(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

// Tolerant base64: skips whitespace and anything unmapped.
std::string decode_base64(std::string_view in) {
    std::string out;
    out.reserve(in.size() * 3 / 4);
    uint32_t acc = 0;
    int bits = 0;
    for (char c : in) {
        int v = base64_val(c);
        if (v < 0) continue;
        acc = (acc << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

// RFC 2047 encoded-words in a header value: =?charset?B|Q?payload?=
std::string decode_rfc2047(std::string_view in) {
    std::string out;
    std::size_t i = 0;
    while (i < in.size()) {
        std::size_t start = in.find("=?", i);
        if (start == std::string_view::npos) {
            out.append(in.substr(i));
            break;
        }
        std::size_t q1 = in.find('?', start + 2);
        std::size_t q2 = (q1 == std::string_view::npos) ? q1 : in.find('?', q1 + 1);
        std::size_t end = (q2 == std::string_view::npos) ? q2 : in.find("?=", q2 + 1);
        if (end == std::string_view::npos) {
            out.append(in.substr(i, start + 2 - i));
            i = start + 2;
            continue;
        }
        out.append(in.substr(i, start - i));
        std::string_view charset = in.substr(start + 2, q1 - start - 2);
        std::string_view enc = in.substr(q1 + 1, q2 - q1 - 1);
        std::string_view payload = in.substr(q2 + 1, end - q2 - 1);
        std::string raw;
        if (enc == "B" || enc == "b") raw = decode_base64(payload);
        else if (enc == "Q" || enc == "q") raw = decode_quoted_printable(payload, true);
        else raw = std::string(payload);
        out.append(decode_charset(raw, charset));
        i = end + 2;
    }
    return out;
}

struct Header {
    std::string name;   // lowercase
    std::string value;  // unfolded, trimmed
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && text::is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && text::is_ascii_space(s.back())) s.remove_suffix(1);
    return s;
}

// Splits a message (or part) into unfolded headers and the raw body.
// Returns false when no blank-line separator exists.
bool split_headers(std::string_view raw, std::vector<Header>& headers, std::string_view& body) {
    std::size_t pos = 0;
    std::string pending_name;
    std::string pending_value;
    bool separator_found = false;

    auto flush = [&] {
        if (!pending_name.empty()) {
            headers.push_back({text::to_lower_ascii(pending_name),
                               std::string(trim(pending_value))});
        }
        pending_name.clear();
        pending_value.clear();
    };

    while (pos < raw.size()) {
        std::size_t eol = raw.find('\n', pos);
        std::string_view line = raw.substr(pos, eol == std::string_view::npos ? raw.size() - pos
                                                                              : eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::size_t next = (eol == std::string_view::npos) ? raw.size() : eol + 1;

        if (line.empty()) {
            separator_found = true;
            pos = next;
            break;
        }
        if (line.front() == ' ' || line.front() == '\t') {
            if (!pending_name.empty()) {
                pending_value.push_back(' ');
                pending_value.append(trim(line));
            }
        } else {
            flush();
            std::size_t colon = line.find(':');
            if (colon == std::string_view::npos) {
                // Not a header line; treat everything from here as body.
                body = raw.substr(pos);
                flush();
                return false;
            }
            pending_name = std::string(line.substr(0, colon));
            pending_value = std::string(trim(line.substr(colon + 1)));
        }
        pos = next;
    }
    flush();
    body = separator_found ? raw.substr(pos) : std::string_view{};
    return separator_found;
}

std::string find_header(const std::vector<Header>& headers, std::string_view name) {
    for (const auto& h : headers) {
        if (h.name == name) return h.value;
    }
    return {};
}

struct ContentType {
    std::string type = "text";      // lowercase
    std::string subtype = "plain";  // lowercase
    std::string charset;
    std::string boundary;
};

ContentType parse_content_type(std::string_view value) {
    ContentType ct;
    if (value.empty()) return ct;
    std::size_t semi = value.find(';');
    std::string_view mime = trim(value.substr(0, semi));
    std::size_t slash = mime.find('/');
    if (slash != std::string_view::npos) {
        ct.type = text::to_lower_ascii(trim(mime.substr(0, slash)));
        ct.subtype = text::to_lower_ascii(trim(mime.substr(slash + 1)));
    } else if (!mime.empty()) {
        ct.type = text::to_lower_ascii(mime);
        ct.subtype.clear();
    }
    // parameters
    std::size_t i = (semi == std::string_view::npos) ? value.size() : semi + 1;
    while (i < value.size()) {
        std::size_t next = value.find(';', i);
        std::string_view param = trim(value.substr(i, next == std::string_view::npos
                                                          ? value.size() - i
                                                          : next - i));
        std::size_t eq = param.find('=');
        if (eq != std::string_view::npos) {
            std::string key = text::to_lower_ascii(trim(param.substr(0, eq)));
            std::string_view val = trim(param.substr(eq + 1));
            if (val.size() >= 2 && val.front() == '"' && val.back() == '"') {
                val = val.substr(1, val.size() - 2);
            }
            if (key == "charset") ct.charset = std::string(val);
            else if (key == "boundary") ct.boundary = std::string(val);
        }
        i = (next == std::string_view::npos) ? value.size() : next + 1;
    }
    return ct;
}

std::string decode_transfer_encoding(std::string_view raw, std::string_view encoding) {
    std::string enc = text::to_lower_ascii(trim(encoding));
    if (enc == "base64") return decode_base64(raw);
    if (enc == "quoted-printable") return decode_quoted_printable(raw, false);
    return std::string(raw);
}

// Drops tags, <script>/<style> blocks, and a handful of common entities.
std::string strip_html_tags(std::string_view html) {
    std::string out;
    out.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] == '<') {
            std::string_view rest = html.substr(i);
            const char* skip_to = nullptr;
            if (text::contains_ci(rest.substr(0, 7), "<script")) skip_to = "</script";
            else if (text::contains_ci(rest.substr(0, 6), "<style")) skip_to = "</style";
            if (skip_to) {
                std::string lower = text::to_lower_ascii(rest);
                std::size_t close = lower.find(skip_to);
                std::size_t gt = (close == std::string::npos) ? std::string::npos
                                                              : lower.find('>', close);
                i = (gt == std::string::npos) ? html.size() : i + gt + 1;
                continue;
            }
            std::size_t gt = html.find('>', i);
            if (gt == std::string_view::npos) break;
            out.push_back(' ');
            i = gt + 1;
        } else if (html[i] == '&') {
            static const std::pair<std::string_view, std::string_view> entities[] = {
                {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""},
                {"&#39;", "'"}, {"&apos;", "'"}, {"&nbsp;", " "}};
            bool matched = false;
            for (auto [e, r] : entities) {
                if (html.substr(i, e.size()) == e) {
                    out.append(r);
                    i += e.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                out.push_back('&');
                ++i;
            }
        } else {
            out.push_back(html[i]);
            ++i;
        }
    }
    return text::normalize_whitespace(out);
}

struct Part {
    std::vector<Header> headers;
    std::string_view body;
};

std::vector<Part> split_multipart(std::string_view body, std::string_view boundary,
                                  bool* matched) {
    std::vector<Part> parts;
    const std::string delim = "--" + std::string(boundary);
    std::vector<std::string_view> chunks;
    std::size_t pos = 0;
    std::size_t chunk_start = std::string_view::npos;
    while (pos <= body.size()) {
        std::size_t eol = body.find('\n', pos);
        std::string_view line = body.substr(pos, eol == std::string_view::npos ? body.size() - pos
                                                                               : eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        bool is_delim = line.substr(0, delim.size()) == delim;
        if (is_delim) {
            if (chunk_start != std::string_view::npos) {
                chunks.push_back(body.substr(chunk_start, pos - chunk_start));
            }
            bool is_final = line.substr(delim.size(), 2) == "--";
            chunk_start = (eol == std::string_view::npos) ? body.size() : eol + 1;
            if (is_final) break;
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    *matched = !chunks.empty();
    for (std::string_view chunk : chunks) {
        Part p;
        split_headers(chunk, p.headers, p.body);
        parts.push_back(std::move(p));
    }
    return parts;
}

// Body-selection policy: first text/plain part, else first text/html part
// stripped to text, else the raw payload decoded lossily.
std::string select_body(const std::vector<Header>& headers, std::string_view raw_body,
                        ParseStats* stats);

std::string find_text_part(const std::vector<Part>& parts, std::string_view want_subtype,
                           ParseStats* stats, bool* found) {
    for (const auto& part : parts) {
        ContentType ct = parse_content_type(find_header(part.headers, "content-type"));
        if (ct.type == "multipart") {
            bool matched = false;
            auto nested = ct.boundary.empty()
                              ? std::vector<Part>{}
                              : split_multipart(part.body, ct.boundary, &matched);
            bool inner_found = false;
            std::string r = find_text_part(nested, want_subtype, stats, &inner_found);
            if (inner_found) {
                *found = true;
                return r;
            }
        } else if (ct.type == "text" && ct.subtype == want_subtype) {
            std::string decoded = decode_transfer_encoding(
                part.body, find_header(part.headers, "content-transfer-encoding"));
            std::string txt = decode_charset(decoded, ct.charset);
            *found = true;
            return want_subtype == "html" ? strip_html_tags(txt) : txt;
        }
    }
    *found = false;
    return {};
}

std::string select_body(const std::vector<Header>& headers, std::string_view raw_body,
                        ParseStats* stats) {
    ContentType ct = parse_content_type(find_header(headers, "content-type"));
    const std::string cte = find_header(headers, "content-transfer-encoding");

    if (ct.type == "multipart") {
        bool matched = false;
        std::vector<Part> parts;
        if (!ct.boundary.empty()) {
            parts = split_multipart(raw_body, ct.boundary, &matched);
        }
        if (!matched) {
            if (stats) ++stats->warnings;
            return utf8_lossy(raw_body);
        }
        bool found = false;
        std::string plain = find_text_part(parts, "plain", stats, &found);
        if (found) return plain;
        std::string html = find_text_part(parts, "html", stats, &found);
        if (found) return html;
        return utf8_lossy(raw_body);
    }
    if (ct.type == "text" && ct.subtype == "html") {
        return strip_html_tags(decode_charset(decode_transfer_encoding(raw_body, cte), ct.charset));
    }
    if (ct.type == "text" || ct.type.empty()) {
        return decode_charset(decode_transfer_encoding(raw_body, cte), ct.charset);
    }
    // Non-text single part (application/*, image/*): lossy decode of payload.
    return utf8_lossy(decode_transfer_encoding(raw_body, cte));
}

}  // namespace

EmailContent parse_message(const RawMessage& msg, ParseStats* stats) {
    EmailContent out;
    out.id = text::sha256_hex(msg.bytes);
    out.gold_label = label_from_category(msg.category);

    std::vector<Header> headers;
    std::string_view body;
    const bool well_formed = split_headers(msg.bytes, headers, body);
    if (!well_formed && headers.empty()) {
        // Structurally unparseable: whole payload becomes the body.
        if (stats) ++stats->warnings;
        out.subject.clear();
        out.body = utf8_lossy(msg.bytes);
        return out;
    }
    if (!well_formed && stats) ++stats->warnings;

    out.subject = decode_rfc2047(find_header(headers, "subject"));
    out.body = select_body(headers, body, stats);
    return out;
}

}  // namespace spamzero
