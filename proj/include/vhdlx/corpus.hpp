#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::corpus {

enum class Origin { github, wiki, box, course, manual, other };
enum class DocKind { code, markdown, office_text, html, pdf, plain_text };

std::string_view to_string(Origin o);
std::string_view to_string(DocKind k);
Origin parse_origin(std::string_view s);
DocKind parse_kind(std::string_view s);

struct SourceDocument {
    std::string id;
    Origin origin = Origin::other;
    std::string path;
    DocKind kind = DocKind::plain_text;
    std::string content;
    std::optional<std::string> language_tag;

    bool operator==(const SourceDocument&) const = default;
};

struct FilterRuleSet {
    std::set<std::string> code_language_allowlist{"vhdl"};
    // anchor-text bytes / visible-text bytes above this marks an html page as link-only
    double link_text_ratio_threshold = 0.8;
    std::vector<std::string> logistics_keywords{"schedule", "status", "milestone", "action items",
                                                "agenda", "staffing", "headcount", "deadline"};
    int logistics_hit_threshold = 2;

    // Throws Error("InvalidRules") when a threshold is outside its range.
    void validate() const;
};

struct Drop {
    std::string id;
    std::string stage;
    std::string reason;

    bool operator==(const Drop&) const = default;
};

struct PipelineReport {
    std::size_t input_count = 0;
    std::size_t kept_count = 0;
    std::size_t dropped_count = 0;
    std::vector<Drop> drops;

    bool operator==(const PipelineReport&) const = default;
};

struct StageResult {
    std::vector<SourceDocument> kept;
    PipelineReport report;
};

// Language tag implied by a file extension ("alu.vhdl" -> "vhdl"), if the extension is code.
std::optional<std::string> language_for_path(std::string_view path);

// Extension-driven bucket assignment with magic-byte sniffing as the fallback.
DocKind classify_document(std::string_view path, std::string_view content);

// Byte ratio of anchor text to visible text; 0 when the page has no visible text.
double link_text_ratio(std::string_view html);

StageResult filter_documents(std::vector<SourceDocument> docs, const FilterRuleSet& rules);

// One survivor per distinct content (lowest id wins). Survivors are returned in id order.
StageResult dedup_exact(std::vector<SourceDocument> docs);

// Kinds earlier in the list win. Kinds absent from the list never take part.
using FormatPriority = std::vector<DocKind>;
FormatPriority default_format_priority();

// Among documents in one directory sharing a path stem, keeps only the highest-priority kind.
StageResult dedup_cross_format(std::vector<SourceDocument> docs, const FormatPriority& priority);

// External command turning an office/pdf file into html on stdout. The input path is
// appended as the last argument.
struct ExternalConverter {
    std::string command;
};

SourceDocument convert_to_markdown(const SourceDocument& doc,
                                   const ExternalConverter* converter = nullptr);

// Full driver: filter, exact dedup, cross-format dedup, conversion. Code, markdown and
// plain text pass through conversion unchanged.
struct PipelineResult {
    std::vector<SourceDocument> documents;
    std::vector<PipelineReport> stages;
};

PipelineResult run_pipeline(std::vector<SourceDocument> docs, const FilterRuleSet& rules,
                            const FormatPriority& priority,
                            const ExternalConverter* converter = nullptr);

// Corpus manifest: one JSON object per line with id, origin, path and optional kind/language.
// Content is read from `root`/path; a missing kind is filled in by classify_document.
std::vector<SourceDocument> load_manifest(const std::string& manifest_path,
                                          const std::string& root);
nlohmann::ordered_json to_json(const PipelineReport& report);
nlohmann::json manifest_record(const SourceDocument& doc);

} // namespace vhdlx::corpus
