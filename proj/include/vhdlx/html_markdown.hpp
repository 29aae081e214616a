#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vhdlx::html {

struct Node {
    bool is_text = false;
    std::string tag;   // lowercase element name; empty for text nodes
    std::string text;  // raw (still escaped) text for text nodes
    std::map<std::string, std::string> attrs;
    std::vector<Node> children;
};

// Lenient tree builder. Throws Error("MalformedHtml") on unterminated tags or comments
// and on an unclosed <pre>.
Node parse(std::string_view html);

std::string unescape_entities(std::string_view s);

// Concatenated unescaped text of a subtree.
std::string text_content(const Node& node);

// Headings, paragraphs, lists, links, inline code, fenced code blocks, bold and italic.
// Blocks are separated by one blank line; no trailing newline.
std::string to_markdown(std::string_view html);

} // namespace vhdlx::html
