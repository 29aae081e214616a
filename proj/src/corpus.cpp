#include "vhdlx/corpus.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/html_markdown.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <unistd.h>
#include <unordered_map>
#include <utility>

namespace vhdlx::corpus {
namespace {

constexpr std::array<std::pair<Origin, std::string_view>, 6> kOrigins{{
    {Origin::github, "github"},
    {Origin::wiki, "wiki"},
    {Origin::box, "box"},
    {Origin::course, "course"},
    {Origin::manual, "manual"},
    {Origin::other, "other"},
}};

constexpr std::array<std::pair<DocKind, std::string_view>, 6> kKinds{{
    {DocKind::code, "code"},
    {DocKind::markdown, "markdown"},
    {DocKind::office_text, "office_text"},
    {DocKind::html, "html"},
    {DocKind::pdf, "pdf"},
    {DocKind::plain_text, "plain_text"},
}};

const std::map<std::string, std::string, std::less<>>& code_extensions() {
    static const std::map<std::string, std::string, std::less<>> table{
        {"vhd", "vhdl"},      {"vhdl", "vhdl"},        {"vho", "vhdl"},    {"vht", "vhdl"},
        {"v", "verilog"},     {"vh", "verilog"},       {"sv", "systemverilog"},
        {"svh", "systemverilog"},                      {"c", "c"},         {"h", "c"},
        {"cc", "cpp"},        {"cpp", "cpp"},          {"cxx", "cpp"},     {"hpp", "cpp"},
        {"hh", "cpp"},        {"py", "python"},        {"sh", "shell"},    {"pl", "perl"},
        {"tcl", "tcl"},       {"java", "java"},        {"js", "javascript"},
        {"ts", "typescript"}, {"go", "go"},            {"rs", "rust"},     {"rb", "ruby"},
        {"scala", "scala"},   {"lua", "lua"},          {"lef", "lef"},     {"def", "def"},
        {"gds", "gds"},       {"sp", "spice"},         {"spi", "spice"},   {"cir", "spice"},
        {"cdl", "spice"},     {"il", "skill"},         {"mk", "make"},     {"cmake", "cmake"},
    };
    return table;
}

std::string extension_of(std::string_view path) {
    const auto slash = path.find_last_of('/');
    const std::string_view name = slash == std::string_view::npos ? path : path.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot == std::string_view::npos || dot == 0) return {};
    return text::to_lower(name.substr(dot + 1));
}

// (directory, stem) of a relative path.
std::pair<std::string, std::string> dir_and_stem(std::string_view path) {
    const auto slash = path.find_last_of('/');
    std::string dir = slash == std::string_view::npos ? std::string{} : std::string(path.substr(0, slash));
    std::string_view name = slash == std::string_view::npos ? path : path.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string_view::npos && dot > 0) name = name.substr(0, dot);
    return {std::move(dir), std::string(name)};
}

void count_stage(PipelineReport& r, std::size_t input, std::size_t kept) {
    r.input_count = input;
    r.kept_count = kept;
    r.dropped_count = input - kept;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    return out + "'";
}

std::string run_converter(const ExternalConverter& conv, const SourceDocument& doc) {
    const std::string ext = extension_of(doc.path);
    std::string tmpl = "/tmp/vhdlx-convert-XXXXXX" + (ext.empty() ? std::string{} : "." + ext);
    const int suffix = ext.empty() ? 0 : static_cast<int>(ext.size() + 1);
    const int fd = ::mkstemps(tmpl.data(), suffix);
    if (fd < 0) throw Error("ConverterFailed", "cannot create temporary file");
    ::close(fd);
    struct Cleanup {
        std::string path;
        ~Cleanup() { std::remove(path.c_str()); }
    } cleanup{tmpl};
    text::write_file(tmpl, doc.content);

    const std::string cmd = conv.command + " " + shell_quote(tmpl);
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) throw Error("ConverterFailed", "cannot start: " + conv.command);
    std::string html;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) html.append(buf.data(), n);
    const int status = ::pclose(pipe);
    if (status != 0)
        throw Error("ConverterFailed", "'" + conv.command + "' exited with status " +
                                           std::to_string(status) + " for " + doc.path);
    return html;
}

} // namespace

std::string_view to_string(Origin o) {
    for (const auto& [v, s] : kOrigins) {
        if (v == o) return s;
    }
    return "other";
}

std::string_view to_string(DocKind k) {
    for (const auto& [v, s] : kKinds) {
        if (v == k) return s;
    }
    return "plain_text";
}

Origin parse_origin(std::string_view s) {
    for (const auto& [v, name] : kOrigins) {
        if (name == s) return v;
    }
    throw Error("ParseError", "unknown origin '" + std::string(s) + "'");
}

DocKind parse_kind(std::string_view s) {
    for (const auto& [v, name] : kKinds) {
        if (name == s) return v;
    }
    throw Error("ParseError", "unknown kind '" + std::string(s) + "'");
}

void FilterRuleSet::validate() const {
    if (!(link_text_ratio_threshold > 0.0 && link_text_ratio_threshold <= 1.0))
        throw Error("InvalidRules", "link_text_ratio_threshold must be in (0,1]");
    if (logistics_hit_threshold < 1)
        throw Error("InvalidRules", "logistics_hit_threshold must be >= 1");
}

std::optional<std::string> language_for_path(std::string_view path) {
    const auto& table = code_extensions();
    if (auto it = table.find(extension_of(path)); it != table.end()) return it->second;
    return std::nullopt;
}

DocKind classify_document(std::string_view path, std::string_view content) {
    const std::string ext = extension_of(path);
    if (code_extensions().contains(ext)) return DocKind::code;
    if (ext == "md" || ext == "markdown") return DocKind::markdown;
    if (ext == "doc" || ext == "docx" || ext == "ppt" || ext == "pptx" || ext == "odt" ||
        ext == "odp" || ext == "rtf")
        return DocKind::office_text;
    if (ext == "html" || ext == "htm" || ext == "xhtml") return DocKind::html;
    if (ext == "pdf") return DocKind::pdf;
    if (ext == "txt" || ext == "text" || ext == "rst" || ext == "log") return DocKind::plain_text;

    if (content.starts_with("%PDF")) return DocKind::pdf;
    std::size_t i = 0;
    while (i < content.size() && (content[i] == ' ' || content[i] == '\n' || content[i] == '\r' ||
                                  content[i] == '\t'))
        ++i;
    const std::string_view head = content.substr(i);
    if (text::starts_with_ci(head, "<html") || text::starts_with_ci(head, "<!doctype"))
        return DocKind::html;
    return DocKind::plain_text;
}

double link_text_ratio(std::string_view html_src) {
    html::Node root;
    try {
        root = html::parse(html_src);
    } catch (const Error&) {
        return 0.0;
    }
    std::size_t visible = 0;
    std::size_t anchor = 0;
    auto visit = [&](auto&& self, const html::Node& n, bool in_anchor) -> void {
        if (n.is_text) {
            const std::string t = html::unescape_entities(n.text);
            const auto bytes = static_cast<std::size_t>(std::count_if(
                t.begin(), t.end(), [](unsigned char c) { return !std::isspace(c); }));
            visible += bytes;
            if (in_anchor) anchor += bytes;
            return;
        }
        if (n.tag == "head" || n.tag == "script" || n.tag == "style" || n.tag == "title") return;
        for (const auto& c : n.children) self(self, c, in_anchor || n.tag == "a");
    };
    visit(visit, root, false);
    return visible == 0 ? 0.0 : static_cast<double>(anchor) / static_cast<double>(visible);
}

StageResult filter_documents(std::vector<SourceDocument> docs, const FilterRuleSet& rules) {
    rules.validate();
    StageResult out;
    const std::size_t input = docs.size();
    for (auto& doc : docs) {
        std::optional<std::string> reason;
        switch (doc.kind) {
        case DocKind::code: {
            const auto lang = doc.language_tag ? doc.language_tag : language_for_path(doc.path);
            if (!lang || !rules.code_language_allowlist.contains(*lang))
                reason = "language_not_allowed";
            break;
        }
        case DocKind::html:
            if (link_text_ratio(doc.content) > rules.link_text_ratio_threshold) reason = "link_only";
            break;
        case DocKind::office_text: {
            const std::string lowered = text::to_lower(doc.content);
            int hits = 0;
            for (const auto& kw : rules.logistics_keywords) {
                if (!kw.empty() && lowered.find(text::to_lower(kw)) != std::string::npos) ++hits;
            }
            if (hits >= rules.logistics_hit_threshold) reason = "logistics";
            break;
        }
        default:
            break;
        }
        if (reason) {
            out.report.drops.push_back({doc.id, "filter", *reason});
        } else {
            out.kept.push_back(std::move(doc));
        }
    }
    count_stage(out.report, input, out.kept.size());
    return out;
}

StageResult dedup_exact(std::vector<SourceDocument> docs) {
    std::sort(docs.begin(), docs.end(),
              [](const SourceDocument& a, const SourceDocument& b) { return a.id < b.id; });
    StageResult out;
    const std::size_t input = docs.size();
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;  // -> indices into out.kept
    for (auto& doc : docs) {
        auto& bucket = by_hash[text::fnv1a64(doc.content)];
        auto dup = std::find_if(bucket.begin(), bucket.end(), [&](std::size_t k) {
            return out.kept[k].content == doc.content;
        });
        if (dup != bucket.end()) {
            out.report.drops.push_back({doc.id, "dedup_exact", "duplicate_of:" + out.kept[*dup].id});
            continue;
        }
        bucket.push_back(out.kept.size());
        out.kept.push_back(std::move(doc));
    }
    count_stage(out.report, input, out.kept.size());
    return out;
}

FormatPriority default_format_priority() {
    return {DocKind::markdown, DocKind::office_text, DocKind::html, DocKind::pdf};
}

StageResult dedup_cross_format(std::vector<SourceDocument> docs, const FormatPriority& priority) {
    auto rank_of = [&](DocKind k) -> std::optional<std::size_t> {
        auto it = std::find(priority.begin(), priority.end(), k);
        if (it == priority.end()) return std::nullopt;
        return static_cast<std::size_t>(it - priority.begin());
    };
    for (std::size_t i = 0; i < priority.size(); ++i) {
        if (std::find(priority.begin() + static_cast<std::ptrdiff_t>(i) + 1, priority.end(),
                      priority[i]) != priority.end())
            throw Error("InvalidPriority", "kind listed twice in format priority");
    }

    std::map<std::pair<std::string, std::string>, std::size_t> best;  // group -> best rank
    for (const auto& doc : docs) {
        const auto rank = rank_of(doc.kind);
        if (!rank) continue;
        auto [it, inserted] = best.emplace(dir_and_stem(doc.path), *rank);
        if (!inserted) it->second = std::min(it->second, *rank);
    }

    StageResult out;
    const std::size_t input = docs.size();
    for (auto& doc : docs) {
        const auto rank = rank_of(doc.kind);
        if (rank) {
            const std::size_t winner = best.at(dir_and_stem(doc.path));
            if (*rank > winner) {
                out.report.drops.push_back(
                    {doc.id, "dedup_cross_format",
                     "superseded_by:" + std::string(to_string(priority[winner]))});
                continue;
            }
        }
        out.kept.push_back(std::move(doc));
    }
    count_stage(out.report, input, out.kept.size());
    return out;
}

SourceDocument convert_to_markdown(const SourceDocument& doc, const ExternalConverter* converter) {
    SourceDocument out = doc;
    out.kind = DocKind::markdown;
    out.language_tag.reset();
    switch (doc.kind) {
    case DocKind::html:
        out.content = html::to_markdown(doc.content);
        return out;
    case DocKind::office_text:
    case DocKind::pdf:
        if (converter == nullptr || converter->command.empty())
            throw Error("MissingConverter", "no external converter configured for " +
                                                std::string(to_string(doc.kind)) + " document " +
                                                doc.id);
        out.content = html::to_markdown(run_converter(*converter, doc));
        return out;
    default:
        throw Error("UnsupportedKind",
                    "cannot convert " + std::string(to_string(doc.kind)) + " document " + doc.id);
    }
}

PipelineResult run_pipeline(std::vector<SourceDocument> docs, const FilterRuleSet& rules,
                            const FormatPriority& priority, const ExternalConverter* converter) {
    PipelineResult result;
    auto filtered = filter_documents(std::move(docs), rules);
    result.stages.push_back(std::move(filtered.report));
    auto unique = dedup_exact(std::move(filtered.kept));
    result.stages.push_back(std::move(unique.report));
    auto distinct = dedup_cross_format(std::move(unique.kept), priority);
    result.stages.push_back(std::move(distinct.report));

    PipelineReport conversion;
    const std::size_t input = distinct.kept.size();
    for (auto& doc : distinct.kept) {
        if (doc.kind == DocKind::code || doc.kind == DocKind::markdown ||
            doc.kind == DocKind::plain_text) {
            result.documents.push_back(std::move(doc));
            continue;
        }
        try {
            result.documents.push_back(convert_to_markdown(doc, converter));
        } catch (const Error& e) {
            if (e.name() != "MalformedHtml") throw;
            conversion.drops.push_back({doc.id, "convert", "malformed_html"});
        }
    }
    count_stage(conversion, input, result.documents.size());
    result.stages.push_back(std::move(conversion));
    return result;
}

std::vector<SourceDocument> load_manifest(const std::string& manifest_path, const std::string& root) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("IoError", "cannot open manifest " + manifest_path);
    std::vector<SourceDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = manifest_path + ":" + std::to_string(lineno);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("ParseError", where + ": " + e.what());
        }
        auto field = [&](const char* key) -> std::string {
            if (!rec.contains(key) || !rec[key].is_string())
                throw Error("ParseError", where + ": field '" + key + "' missing or not a string");
            return rec[key].get<std::string>();
        };
        SourceDocument doc;
        doc.id = field("id");
        doc.origin = parse_origin(field("origin"));
        doc.path = field("path");
        doc.content = text::read_file(root.empty() ? doc.path : root + "/" + doc.path);
        doc.kind = rec.contains("kind") ? parse_kind(field("kind"))
                                        : classify_document(doc.path, doc.content);
        if (rec.contains("language")) {
            doc.language_tag = field("language");
        } else if (doc.kind == DocKind::code) {
            doc.language_tag = language_for_path(doc.path);
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

nlohmann::ordered_json to_json(const PipelineReport& report) {
    nlohmann::ordered_json drops = nlohmann::ordered_json::array();
    for (const auto& d : report.drops)
        drops.push_back({{"id", d.id}, {"stage", d.stage}, {"reason", d.reason}});
    nlohmann::ordered_json j;
    j["input_count"] = report.input_count;
    j["kept_count"] = report.kept_count;
    j["dropped_count"] = report.dropped_count;
    j["drops"] = std::move(drops);
    return j;
}

nlohmann::json manifest_record(const SourceDocument& doc) {
    nlohmann::json j{{"id", doc.id},
                     {"origin", std::string(to_string(doc.origin))},
                     {"path", doc.path},
                     {"kind", std::string(to_string(doc.kind))}};
    if (doc.language_tag) j["language"] = *doc.language_tag;
    return j;
}

} // namespace vhdlx::corpus
