#include "vhdlx/corpus.hpp"
#include "vhdlx/text.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

using namespace vhdlx::corpus;
using vhdlx::testing::error_name;
using vhdlx::testing::TempDir;

namespace {

SourceDocument doc(std::string id, std::string path, DocKind kind, std::string content = "x",
                   std::optional<std::string> lang = std::nullopt) {
    SourceDocument d;
    d.id = std::move(id);
    d.path = std::move(path);
    d.kind = kind;
    d.content = std::move(content);
    d.language_tag = std::move(lang);
    return d;
}

std::set<std::string> ids(const std::vector<SourceDocument>& docs) {
    std::set<std::string> out;
    for (const auto& d : docs) out.insert(d.id);
    return out;
}

void expect_conserved(const PipelineReport& r) {
    EXPECT_EQ(r.input_count, r.kept_count + r.dropped_count);
    EXPECT_EQ(r.drops.size(), r.dropped_count);
}

} // namespace

TEST(Classify, ExtensionsAndSniffing) {
    EXPECT_EQ(classify_document("alu.vhdl", "entity alu is"), DocKind::code);
    EXPECT_EQ(classify_document("core/alu.vhd", ""), DocKind::code);
    EXPECT_EQ(classify_document("readme.md", "# hi"), DocKind::markdown);
    EXPECT_EQ(classify_document("spec.bin", "%PDF-1.7\n..."), DocKind::pdf);
    EXPECT_EQ(classify_document("page", "  <!DOCTYPE html><html>"), DocKind::html);
    EXPECT_EQ(classify_document("page.htm", ""), DocKind::html);
    EXPECT_EQ(classify_document("deck.PPTX", ""), DocKind::office_text);
    EXPECT_EQ(classify_document("notes", "just words"), DocKind::plain_text);
}

TEST(Classify, LanguageForPath) {
    EXPECT_EQ(language_for_path("x/alu.vhdl"), "vhdl");
    EXPECT_EQ(language_for_path("top.v"), "verilog");
    EXPECT_EQ(language_for_path("notes.txt"), std::nullopt);
}

TEST(Filter, LinkOnlyHtmlDropped) {
    std::string body = "<html><body>";
    for (int i = 0; i < 10; ++i) body += "<a href=\"http://wiki/p" + std::to_string(i) + "\">page " + std::to_string(i) + "</a>\n";
    body += "</body></html>";
    EXPECT_DOUBLE_EQ(link_text_ratio(body), 1.0);
    auto r = filter_documents({doc("h1", "links.html", DocKind::html, body)}, FilterRuleSet{});
    EXPECT_TRUE(r.kept.empty());
    ASSERT_EQ(r.report.drops.size(), 1u);
    EXPECT_EQ(r.report.drops[0].reason, "link_only");
    EXPECT_EQ(r.report.drops[0].stage, "filter");
}

TEST(Filter, ContentPageWithLinksKept) {
    const std::string body = "<p>The load-store unit issues requests to the <a href=\"x\">L1</a> cache "
                             "and retries on a miss.</p>";
    EXPECT_LT(link_text_ratio(body), 0.8);
    auto r = filter_documents({doc("h1", "lsu.html", DocKind::html, body)}, FilterRuleSet{});
    EXPECT_EQ(r.kept.size(), 1u);
}

TEST(Filter, EmptyPageHasZeroRatio) { EXPECT_EQ(link_text_ratio("<html><body>  </body></html>"), 0.0); }

TEST(Filter, CodeAllowlist) {
    auto r = filter_documents({doc("c1", "alu.vhdl", DocKind::code, "entity", "vhdl"),
                               doc("c2", "tb.py", DocKind::code, "print()", "python"),
                               doc("c3", "fifo.vhd", DocKind::code, "entity")},
                              FilterRuleSet{});
    EXPECT_EQ(ids(r.kept), (std::set<std::string>{"c1", "c3"}));
    ASSERT_EQ(r.report.drops.size(), 1u);
    EXPECT_EQ(r.report.drops[0].reason, "language_not_allowed");
}

TEST(Filter, LogisticsSlides) {
    FilterRuleSet rules;
    rules.logistics_keywords = {"schedule", "status"};
    rules.logistics_hit_threshold = 2;
    auto r = filter_documents({doc("s1", "weekly.pptx", DocKind::office_text, "Project Schedule and STATUS review"),
                               doc("s2", "design.pptx", DocKind::office_text, "Issue queue schedule")},
                              rules);
    EXPECT_EQ(ids(r.kept), (std::set<std::string>{"s2"}));
    EXPECT_EQ(r.report.drops.at(0).reason, "logistics");
    expect_conserved(r.report);
}

TEST(Filter, InvalidRules) {
    FilterRuleSet rules;
    rules.link_text_ratio_threshold = 0.0;
    EXPECT_EQ(error_name([&] { filter_documents({}, rules); }), "InvalidRules");
    rules = FilterRuleSet{};
    rules.logistics_hit_threshold = 0;
    EXPECT_EQ(error_name([&] { rules.validate(); }), "InvalidRules");
}

TEST(DedupExact, IdenticalPair) {
    auto r = dedup_exact({doc("b", "b.txt", DocKind::plain_text, "same"), doc("a", "a.txt", DocKind::plain_text, "same")});
    ASSERT_EQ(r.kept.size(), 1u);
    EXPECT_EQ(r.kept[0].id, "a");
    EXPECT_EQ(r.report.drops.at(0).reason, "duplicate_of:a");
}

TEST(DedupExact, EmptyInput) {
    auto r = dedup_exact({});
    EXPECT_TRUE(r.kept.empty());
    EXPECT_EQ(r.report, PipelineReport{});
}

TEST(DedupExact, ThreeDocsTwoIdenticalIdempotent) {
    auto r = dedup_exact({doc("1", "1", DocKind::code, "x"), doc("2", "2", DocKind::code, "y"),
                          doc("3", "3", DocKind::code, "x")});
    EXPECT_EQ(ids(r.kept), (std::set<std::string>{"1", "2"}));
    auto again = dedup_exact(r.kept);
    EXPECT_EQ(again.kept, r.kept);
    EXPECT_EQ(again.report.dropped_count, 0u);
}

TEST(DedupExact, RandomCorporaMatchPairwiseOracle) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<SourceDocument> docs;
        const int n = static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i)
            docs.push_back(doc("d" + std::to_string(rng() % 1000) + "-" + std::to_string(i), "p", DocKind::plain_text,
                               std::string(rng() % 3, static_cast<char>('a' + rng() % 3))));
        auto shuffled = docs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto r = dedup_exact(docs);
        const auto r2 = dedup_exact(shuffled);
        EXPECT_EQ(r.kept, r2.kept);
        expect_conserved(r.report);

        // a document survives iff no document with smaller id has the same content
        std::set<std::string> expected;
        for (const auto& d : docs) {
            bool dominated = false;
            for (const auto& e : docs)
                if (e.content == d.content && e.id < d.id) dominated = true;
            if (!dominated) expected.insert(d.id);
        }
        EXPECT_EQ(ids(r.kept), expected);
    }
}

TEST(DedupCrossFormat, PriorityPicksSource) {
    auto r = dedup_cross_format({doc("1", "docs/spec.docx", DocKind::office_text), doc("2", "docs/spec.pdf", DocKind::pdf)},
                                default_format_priority());
    EXPECT_EQ(ids(r.kept), (std::set<std::string>{"1"}));
    EXPECT_EQ(r.report.drops.at(0).reason, "superseded_by:office_text");
}

TEST(DedupCrossFormat, DirectoriesScopeGroups) {
    auto r = dedup_cross_format({doc("1", "a/spec.pdf", DocKind::pdf), doc("2", "b/spec.pdf", DocKind::pdf),
                                 doc("3", "a/spec.md", DocKind::markdown)},
                                default_format_priority());
    EXPECT_EQ(ids(r.kept), (std::set<std::string>{"2", "3"}));
}

TEST(DedupCrossFormat, UnlistedKindsUntouched) {
    auto r = dedup_cross_format({doc("1", "alu.vhd", DocKind::code), doc("2", "alu.md", DocKind::markdown)},
                                default_format_priority());
    EXPECT_EQ(r.kept.size(), 2u);
}

TEST(DedupCrossFormat, DuplicatePriorityRejected) {
    EXPECT_EQ(error_name([] { dedup_cross_format({}, {DocKind::pdf, DocKind::pdf}); }), "InvalidPriority");
}

TEST(DedupCrossFormat, RandomStemsMatchGroupingOracle) {
    const std::array<std::pair<DocKind, const char*>, 4> formats{
        {{DocKind::markdown, "md"}, {DocKind::office_text, "docx"}, {DocKind::html, "html"}, {DocKind::pdf, "pdf"}}};
    const auto priority = default_format_priority();
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SourceDocument> docs;
        for (int s = 0; s < 100; ++s) {
            const std::string dir = "d" + std::to_string(rng() % 4);
            const int variants = static_cast<int>(rng() % 4);
            std::vector<int> picks{0, 1, 2, 3};
            std::shuffle(picks.begin(), picks.end(), rng);
            for (int v = 0; v < variants; ++v) {
                const auto& [kind, ext] = formats[picks[v]];
                docs.push_back(doc("s" + std::to_string(s) + "." + ext, dir + "/stem" + std::to_string(s) + "." + ext, kind));
            }
        }
        const auto r = dedup_cross_format(docs, priority);
        expect_conserved(r.report);

        auto rank = [&](DocKind k) { return std::find(priority.begin(), priority.end(), k) - priority.begin(); };
        auto group = [](const std::string& p) { return p.substr(0, p.rfind('.')); };
        std::set<std::string> expected;
        for (const auto& d : docs) {
            bool beaten = false;
            for (const auto& e : docs)
                if (group(e.path) == group(d.path) && rank(e.kind) < rank(d.kind)) beaten = true;
            if (!beaten) expected.insert(d.id);
        }
        EXPECT_EQ(ids(r.kept), expected);
        EXPECT_EQ(dedup_cross_format(r.kept, priority).kept, r.kept);
    }
}

TEST(Convert, HtmlToMarkdown) {
    auto out = convert_to_markdown(doc("h", "a/page.html", DocKind::html, "<h1>Title</h1><p>x</p>"));
    EXPECT_EQ(out.kind, DocKind::markdown);
    EXPECT_EQ(out.content, "# Title\n\nx");
    EXPECT_EQ(out.path, "a/page.html");
}

TEST(Convert, PdfWithoutHook) {
    EXPECT_EQ(error_name([] { convert_to_markdown(doc("p", "spec.pdf", DocKind::pdf, "%PDF-1.7")); }), "MissingConverter");
}

TEST(Convert, ExternalHookProducesHtml) {
    // the hook gets the document written to a temp file; cat echoes it back as html
    ExternalConverter cat{"cat"};
    auto out = convert_to_markdown(doc("o", "deck.pptx", DocKind::office_text, "<h2>Pipeline</h2><ul><li>fetch</li></ul>"), &cat);
    EXPECT_EQ(out.content, "## Pipeline\n\n- fetch");
    ExternalConverter broken{"false"};
    EXPECT_EQ(error_name([&] { convert_to_markdown(doc("o", "deck.pptx", DocKind::office_text, "x"), &broken); }),
              "ConverterFailed");
}

TEST(Convert, CodeIsNotConvertible) {
    EXPECT_EQ(error_name([] { convert_to_markdown(doc("c", "a.vhd", DocKind::code)); }), "UnsupportedKind");
}

TEST(Pipeline, StagesConserveAndDropMalformedHtml) {
    std::vector<SourceDocument> docs{
        doc("1", "rtl/alu.vhd", DocKind::code, "entity alu is end;", "vhdl"),
        doc("2", "rtl/alu_copy.vhd", DocKind::code, "entity alu is end;", "vhdl"),
        doc("3", "sw/tool.py", DocKind::code, "pass", "python"),
        doc("4", "wiki/lsu.html", DocKind::html, "<p>The LSU <b>queues</b> stores.</p>"),
        doc("5", "wiki/broken.html", DocKind::html, "<p>unterminated <a href=\"x"),
        doc("6", "docs/isa.md", DocKind::markdown, "# ISA"),
        doc("7", "docs/isa.html", DocKind::html, "<h1>ISA</h1>"),
    };
    auto r = run_pipeline(docs, FilterRuleSet{}, default_format_priority());
    ASSERT_EQ(r.stages.size(), 4u);
    for (const auto& s : r.stages) expect_conserved(s);
    EXPECT_EQ(ids(r.documents), (std::set<std::string>{"1", "4", "6"}));
    EXPECT_EQ(r.stages[3].drops.at(0).reason, "malformed_html");
    for (const auto& d : r.documents)
        if (d.id == "4") EXPECT_EQ(d.content, "The LSU **queues** stores.");
    // determinism
    EXPECT_EQ(to_json(run_pipeline(docs, FilterRuleSet{}, default_format_priority()).stages[1]).dump(),
              to_json(r.stages[1]).dump());
}

TEST(Manifest, LoadFillsKindAndContent) {
    TempDir dir;
    std::filesystem::create_directories(dir.path() / "rtl");
    vhdlx::text::write_file(dir.file("rtl/alu.vhdl"), "entity alu is end;");
    vhdlx::text::write_file(dir.file("manifest.jsonl"),
                            "{\"id\":\"a\",\"origin\":\"github\",\"path\":\"rtl/alu.vhdl\"}\n\n");
    auto docs = load_manifest(dir.file("manifest.jsonl"), dir.path().string());
    ASSERT_EQ(docs.size(), 1u);
    EXPECT_EQ(docs[0].kind, DocKind::code);
    EXPECT_EQ(docs[0].origin, Origin::github);
    EXPECT_EQ(docs[0].content, "entity alu is end;");
    EXPECT_EQ(manifest_record(docs[0])["kind"], "code");

    vhdlx::text::write_file(dir.file("bad.jsonl"), "{\"id\":\"a\",\"origin\":\"nowhere\",\"path\":\"x\"}\n");
    EXPECT_EQ(error_name([&] { load_manifest(dir.file("bad.jsonl"), dir.path().string()); }), "ParseError");
}
