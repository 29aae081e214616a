#include "vhdlx/html_markdown.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

namespace vhdlx::html {
namespace {

const std::unordered_set<std::string> kVoidElements{
    "br", "hr", "img", "meta", "link", "input", "source", "wbr",
    "area", "base", "col", "embed", "param", "track"};

const std::unordered_set<std::string> kRawTextElements{"script", "style", "textarea", "title"};

// Opening one of these implicitly closes an open <p>.
const std::unordered_set<std::string> kClosesParagraph{
    "p", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "pre", "div", "table",
    "blockquote", "section", "article", "hr", "header", "footer", "nav", "aside"};

const std::unordered_set<std::string> kBlockElements{
    "html", "body", "div", "section", "article", "main", "header", "footer", "nav", "aside",
    "p", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li", "pre", "blockquote", "hr",
    "table", "thead", "tbody", "tfoot", "tr", "td", "th", "figure", "figcaption", "form",
    "dl", "dt", "dd", "head", "title", "script", "style", "noscript", "template", "address"};

const std::unordered_set<std::string> kSkipped{"head", "title", "script", "style", "noscript",
                                               "template"};

bool is_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string lower(std::string_view s) { return text::to_lower(s); }

[[noreturn]] void malformed(const std::string& what, std::size_t pos) {
    throw Error("MalformedHtml", what + " at byte " + std::to_string(pos));
}

void append_text(Node& parent, std::string_view raw) {
    if (raw.empty()) return;
    if (!parent.children.empty() && parent.children.back().is_text) {
        parent.children.back().text.append(raw);
        return;
    }
    Node t;
    t.is_text = true;
    t.text = std::string(raw);
    parent.children.push_back(std::move(t));
}

class TreeBuilder {
public:
    explicit TreeBuilder(std::string_view src) : src_(src) {
        root_.tag = "#root";
        stack_.push_back(&root_);
    }

    Node build() {
        while (pos_ < src_.size()) {
            if (src_[pos_] == '<') {
                consume_markup();
            } else {
                auto next = src_.find('<', pos_);
                if (next == std::string_view::npos) next = src_.size();
                append_text(*stack_.back(), src_.substr(pos_, next - pos_));
                pos_ = next;
            }
        }
        for (const Node* open : stack_) {
            if (open->tag == "pre") malformed("unclosed <pre>", src_.size());
        }
        return std::move(root_);
    }

private:
    void consume_markup() {
        const std::size_t start = pos_;
        if (src_.compare(pos_, 4, "<!--") == 0) {
            auto end = src_.find("-->", pos_ + 4);
            if (end == std::string_view::npos) malformed("unterminated comment", start);
            pos_ = end + 3;
            return;
        }
        if (pos_ + 1 < src_.size() && (src_[pos_ + 1] == '!' || src_[pos_ + 1] == '?')) {
            auto end = src_.find('>', pos_);
            if (end == std::string_view::npos) malformed("unterminated declaration", start);
            pos_ = end + 1;
            return;
        }
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
            auto end = src_.find('>', pos_);
            if (end == std::string_view::npos) malformed("unterminated end tag", start);
            close_element(lower(text::trim(src_.substr(pos_ + 2, end - pos_ - 2))));
            pos_ = end + 1;
            return;
        }
        if (pos_ + 1 < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_ + 1]))) {
            open_element(start);
            return;
        }
        append_text(*stack_.back(), "<");
        ++pos_;
    }

    void open_element(std::size_t start) {
        ++pos_;
        std::size_t name_end = pos_;
        while (name_end < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[name_end])) || src_[name_end] == '-'))
            ++name_end;
        Node el;
        el.tag = lower(src_.substr(pos_, name_end - pos_));
        pos_ = name_end;

        bool self_closing = false;
        for (;;) {
            while (pos_ < src_.size() && is_ws(src_[pos_])) ++pos_;
            if (pos_ >= src_.size()) malformed("unterminated tag <" + el.tag + ">", start);
            if (src_[pos_] == '>') {
                ++pos_;
                break;
            }
            if (src_[pos_] == '/') {
                self_closing = true;
                ++pos_;
                continue;
            }
            std::size_t an = pos_;
            while (an < src_.size() && !is_ws(src_[an]) && src_[an] != '=' && src_[an] != '>' &&
                   src_[an] != '/')
                ++an;
            std::string attr = lower(src_.substr(pos_, an - pos_));
            pos_ = an;
            while (pos_ < src_.size() && is_ws(src_[pos_])) ++pos_;
            std::string value;
            if (pos_ < src_.size() && src_[pos_] == '=') {
                ++pos_;
                while (pos_ < src_.size() && is_ws(src_[pos_])) ++pos_;
                if (pos_ >= src_.size()) malformed("unterminated tag <" + el.tag + ">", start);
                const char q = src_[pos_];
                if (q == '"' || q == '\'') {
                    auto close = src_.find(q, pos_ + 1);
                    if (close == std::string_view::npos)
                        malformed("unterminated attribute value", start);
                    value = std::string(src_.substr(pos_ + 1, close - pos_ - 1));
                    pos_ = close + 1;
                } else {
                    std::size_t ve = pos_;
                    while (ve < src_.size() && !is_ws(src_[ve]) && src_[ve] != '>') ++ve;
                    value = std::string(src_.substr(pos_, ve - pos_));
                    pos_ = ve;
                }
            }
            if (!attr.empty()) el.attrs.emplace(std::move(attr), unescape_entities(value));
        }

        apply_implicit_closes(el.tag);

        if (kRawTextElements.contains(el.tag)) {
            const std::string closer = "</" + el.tag;
            std::size_t end = pos_;
            for (;; ++end) {
                end = src_.find("</", end);
                if (end == std::string_view::npos || text::starts_with_ci(src_.substr(end), closer))
                    break;
            }
            if (end == std::string_view::npos) end = src_.size();
            append_text(el, src_.substr(pos_, end - pos_));
            pos_ = end;
            if (pos_ < src_.size()) {
                auto gt = src_.find('>', pos_);
                if (gt == std::string_view::npos) malformed("unterminated end tag", pos_);
                pos_ = gt + 1;
            }
            stack_.back()->children.push_back(std::move(el));
            return;
        }

        const bool is_void = kVoidElements.contains(el.tag);
        Node& parent = *stack_.back();
        parent.children.push_back(std::move(el));
        if (!is_void && !self_closing) stack_.push_back(&parent.children.back());
    }

    void apply_implicit_closes(const std::string& tag) {
        if (kClosesParagraph.contains(tag) && stack_.back()->tag == "p") stack_.pop_back();
        if (tag == "li") pop_to_sibling("li", {"ul", "ol"});
        if (tag == "tr") pop_to_sibling("tr", {"table", "thead", "tbody", "tfoot"});
        if (tag == "td" || tag == "th") {
            pop_to_sibling("td", {"tr", "table"});
            pop_to_sibling("th", {"tr", "table"});
        }
    }

    // Closes an open `tag` if one exists below the nearest boundary element.
    void pop_to_sibling(const std::string& tag, std::initializer_list<std::string_view> boundaries) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            const std::string& t = stack_[i]->tag;
            if (t == tag) {
                stack_.resize(i);
                return;
            }
            if (std::find(boundaries.begin(), boundaries.end(), t) != boundaries.end()) return;
        }
    }

    void close_element(const std::string& tag) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == tag) {
                stack_.resize(i);
                return;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Node root_;
    std::vector<Node*> stack_;
};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
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

const std::unordered_map<std::string_view, std::uint32_t>& named_entities() {
    static const std::unordered_map<std::string_view, std::uint32_t> table{
        {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},
        {"apos", '\''},    {"nbsp", 0xA0},    {"copy", 0xA9},    {"reg", 0xAE},
        {"trade", 0x2122}, {"mdash", 0x2014}, {"ndash", 0x2013}, {"hellip", 0x2026},
        {"laquo", 0xAB},   {"raquo", 0xBB},   {"lsquo", 0x2018}, {"rsquo", 0x2019},
        {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"bull", 0x2022},  {"middot", 0xB7},
        {"times", 0xD7},   {"deg", 0xB0},     {"micro", 0xB5},   {"para", 0xB6}};
    return table;
}

// ---- rendering -------------------------------------------------------------

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (is_ws(c)) {
            if (!in_ws) out.push_back(' ');
            in_ws = true;
        } else {
            out.push_back(c);
            in_ws = false;
        }
    }
    return out;
}

// Trims each line and collapses the spaces left between inline fragments.
std::string normalize_inline(std::string_view s) {
    std::string joined;
    for (const auto& line : text::split(s, '\n')) {
        std::string t = text::trim(collapse_ws(line));
        if (!joined.empty()) joined.push_back('\n');
        joined += t;
    }
    return text::trim(joined);
}

std::string attr_or(const Node& n, const std::string& key, std::string fallback = {}) {
    auto it = n.attrs.find(key);
    return it == n.attrs.end() ? fallback : it->second;
}

std::string wrap_code_span(const std::string& code) {
    if (code.find('`') == std::string::npos) return "`" + code + "`";
    return "`` " + code + " ``";
}

std::string render_inline(const Node& node);

std::string render_inline_children(const Node& node) {
    std::string out;
    for (const auto& c : node.children) out += render_inline(c);
    return out;
}

std::string render_inline(const Node& node) {
    if (node.is_text) return collapse_ws(unescape_entities(node.text));
    const std::string& tag = node.tag;
    if (kSkipped.contains(tag)) return {};
    if (tag == "br") return "\n";
    if (tag == "a") {
        std::string inner = normalize_inline(render_inline_children(node));
        std::string href = attr_or(node, "href");
        if (href.empty()) return inner;
        if (inner.empty()) inner = href;
        return "[" + inner + "](" + href + ")";
    }
    if (tag == "code" || tag == "kbd" || tag == "samp" || tag == "tt")
        return wrap_code_span(text_content(node));
    if (tag == "strong" || tag == "b") {
        std::string inner = normalize_inline(render_inline_children(node));
        return inner.empty() ? std::string{} : "**" + inner + "**";
    }
    if (tag == "em" || tag == "i") {
        std::string inner = normalize_inline(render_inline_children(node));
        return inner.empty() ? std::string{} : "*" + inner + "*";
    }
    if (tag == "img") return "![" + attr_or(node, "alt") + "](" + attr_or(node, "src") + ")";
    if (kBlockElements.contains(tag)) return " " + render_inline_children(node) + " ";
    return render_inline_children(node);
}

std::string code_language(const Node& pre) {
    auto from_class = [](const Node& n) -> std::string {
        for (const auto& cls : text::split(attr_or(n, "class"), ' ')) {
            for (std::string_view prefix : {"language-", "lang-"}) {
                if (cls.rfind(prefix, 0) == 0) return cls.substr(prefix.size());
            }
        }
        return {};
    };
    if (auto lang = from_class(pre); !lang.empty()) return lang;
    for (const auto& c : pre.children) {
        if (!c.is_text && c.tag == "code") return from_class(c);
    }
    return {};
}

std::string render_fenced(const Node& pre) {
    std::string body = text_content(pre);
    if (!body.empty() && body.front() == '\n') body.erase(0, 1);
    if (!body.empty() && body.back() == '\n') body.pop_back();

    std::size_t longest = 0;
    std::size_t run = 0;
    for (char c : body) {
        run = (c == '`') ? run + 1 : 0;
        longest = std::max(longest, run);
    }
    const std::string fence(std::max<std::size_t>(3, longest + 1), '`');
    std::string out = fence + code_language(pre) + "\n" + body;
    if (!body.empty()) out += "\n";
    return out + fence;
}

class BlockRenderer {
public:
    std::vector<std::string> blocks;

    void container(const Node& node) {
        std::string para;
        for (const auto& c : node.children) {
            if (c.is_text || !kBlockElements.contains(c.tag)) {
                para += render_inline(c);
                continue;
            }
            flush(para);
            block(c);
        }
        flush(para);
    }

private:
    void flush(std::string& para) {
        std::string p = normalize_inline(para);
        if (!p.empty()) blocks.push_back(std::move(p));
        para.clear();
    }

    void block(const Node& el) {
        const std::string& tag = el.tag;
        if (kSkipped.contains(tag)) return;
        if (tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6') {
            std::string inner = normalize_inline(render_inline_children(el));
            for (char& c : inner) {
                if (c == '\n') c = ' ';
            }
            if (!inner.empty())
                blocks.push_back(std::string(static_cast<std::size_t>(tag[1] - '0'), '#') + " " +
                                 inner);
            return;
        }
        if (tag == "ul" || tag == "ol") {
            std::vector<std::string> lines;
            list(el, 0, lines);
            std::string joined;
            for (const auto& l : lines) {
                if (!joined.empty()) joined.push_back('\n');
                joined += l;
            }
            if (!joined.empty()) blocks.push_back(std::move(joined));
            return;
        }
        if (tag == "pre") {
            blocks.push_back(render_fenced(el));
            return;
        }
        if (tag == "hr") {
            blocks.push_back("---");
            return;
        }
        if (tag == "blockquote") {
            BlockRenderer inner;
            inner.container(el);
            std::string quoted;
            for (std::size_t bi = 0; bi < inner.blocks.size(); ++bi) {
                if (bi > 0) quoted += "\n>";
                for (const auto& line : text::split(inner.blocks[bi], '\n')) {
                    if (!quoted.empty()) quoted += "\n";
                    quoted += line.empty() ? ">" : "> " + line;
                }
            }
            if (!quoted.empty()) blocks.push_back(std::move(quoted));
            return;
        }
        if (tag == "table") {
            table(el);
            return;
        }
        container(el);
    }

    void list(const Node& el, std::size_t indent, std::vector<std::string>& lines) {
        const bool ordered = el.tag == "ol";
        int n = 1;
        for (const auto& item : el.children) {
            if (item.is_text || item.tag != "li") continue;
            const std::string marker = ordered ? std::to_string(n++) + ". " : "- ";
            std::string inline_text;
            std::vector<const Node*> nested;
            for (const auto& c : item.children) {
                if (!c.is_text && (c.tag == "ul" || c.tag == "ol")) {
                    nested.push_back(&c);
                } else if (!c.is_text && c.tag == "pre") {
                    inline_text += " " + wrap_code_span(text_content(c)) + " ";
                } else {
                    inline_text += render_inline(c);
                }
            }
            std::string body = normalize_inline(inline_text);
            for (char& c : body) {
                if (c == '\n') c = ' ';
            }
            lines.push_back(std::string(indent, ' ') + marker + body);
            for (const Node* sub : nested) list(*sub, indent + marker.size(), lines);
        }
    }

    void collect_rows(const Node& n, std::vector<const Node*>& rows) {
        for (const auto& c : n.children) {
            if (c.is_text) continue;
            if (c.tag == "tr") {
                rows.push_back(&c);
            } else if (c.tag == "thead" || c.tag == "tbody" || c.tag == "tfoot") {
                collect_rows(c, rows);
            }
        }
    }

    void table(const Node& el) {
        std::vector<const Node*> rows;
        collect_rows(el, rows);
        std::string out;
        bool first = true;
        for (const Node* row : rows) {
            std::vector<std::string> cells;
            for (const auto& c : row->children) {
                if (c.is_text || (c.tag != "td" && c.tag != "th")) continue;
                std::string cell = normalize_inline(render_inline_children(c));
                std::replace(cell.begin(), cell.end(), '\n', ' ');
                cells.push_back(std::move(cell));
            }
            if (cells.empty()) continue;
            std::string line = "|";
            for (const auto& cell : cells) line += " " + cell + " |";
            if (!out.empty()) out += "\n";
            out += line;
            if (first) {
                std::string sep = "|";
                for (std::size_t i = 0; i < cells.size(); ++i) sep += " --- |";
                out += "\n" + sep;
                first = false;
            }
        }
        if (!out.empty()) blocks.push_back(std::move(out));
    }
};

} // namespace

Node parse(std::string_view html) { return TreeBuilder(html).build(); }

std::string unescape_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        std::string_view name = s.substr(i + 1, semi - i - 1);
        if (!name.empty() && name[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = name.size() > 1;
            const bool hex = ok && (name[1] == 'x' || name[1] == 'X');
            for (std::size_t k = hex ? 2 : 1; ok && k < name.size(); ++k) {
                const char c = name[k];
                if (hex && std::isxdigit(static_cast<unsigned char>(c))) {
                    cp = cp * 16 + static_cast<std::uint32_t>(
                                       std::isdigit(static_cast<unsigned char>(c))
                                           ? c - '0'
                                           : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
                } else if (!hex && std::isdigit(static_cast<unsigned char>(c))) {
                    cp = cp * 10 + static_cast<std::uint32_t>(c - '0');
                } else {
                    ok = false;
                }
                if (cp > 0x10FFFF) cp = 0x110000;
            }
            if (ok && name.size() > (hex ? 2u : 1u)) {
                append_utf8(out, cp);
                i = semi + 1;
                continue;
            }
        } else if (auto it = named_entities().find(name); it != named_entities().end()) {
            append_utf8(out, it->second);
            i = semi + 1;
            continue;
        }
        out.push_back(s[i++]);
    }
    return out;
}

std::string text_content(const Node& node) {
    if (node.is_text) return unescape_entities(node.text);
    std::string out;
    for (const auto& c : node.children) {
        if (!c.is_text && c.tag == "br") {
            out.push_back('\n');
            continue;
        }
        out += text_content(c);
    }
    return out;
}

std::string to_markdown(std::string_view html) {
    const Node root = parse(html);
    BlockRenderer r;
    r.container(root);
    std::string out;
    for (const auto& b : r.blocks) {
        if (!out.empty()) out += "\n\n";
        out += b;
    }
    return out;
}

} // namespace vhdlx::html
