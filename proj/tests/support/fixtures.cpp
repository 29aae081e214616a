#include "fixtures.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/judging.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

namespace vhdlx::fixtures {
namespace {

namespace fs = std::filesystem;

constexpr std::array<testset::Topic, 5> kTopics{testset::Topic::digital_design, testset::Topic::isa,
                                                testset::Topic::microarchitecture, testset::Topic::vhdl_syntax,
                                                testset::Topic::other};

std::string pad3(std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

testset::ReviewEvent approved(const std::string& id) {
    return {id, "sme-b", testset::ReviewAction::approve, "2024-11-04T10:00:00Z", ""};
}

} // namespace

std::string vhdl_snippet(std::size_t i) {
    const std::size_t w = 4 + i % 29;
    const std::string n = std::to_string(i);
    switch (i % 4) {
    case 0:
        return "library ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;\n\nentity counter_" + n +
               " is\n  port (clk, rst : in std_logic; q : out unsigned(" + std::to_string(w - 1) +
               " downto 0));\nend entity;\n\narchitecture rtl of counter_" + n +
               " is\n  signal cnt : unsigned(" + std::to_string(w - 1) +
               " downto 0);\nbegin\n  process (clk)\n  begin\n    if rising_edge(clk) then\n      if rst = '1' "
               "then\n        cnt <= (others => '0');\n      else\n        cnt <= cnt + 1;\n      end if;\n    end "
               "if;\n  end process;\n  q <= cnt;\nend architecture;\n";
    case 1:
        return "with sel_" + n + " select\n  y <= a when \"00\",\n       b when \"01\",\n       c when \"10\",\n  "
               "     d when others;\n";
    case 2:
        return "process (clk)\nbegin\n  if rising_edge(clk) then\n    if en = '1' then\n      stage_" + n +
               " <= stage_" + n + "(" + std::to_string(w - 2) + " downto 0) & din;\n    end if;\n  end if;\nend process;\n";
    default:
        return "parity_" + n + " <= xor_reduce(data(" + std::to_string(w - 1) + " downto 0)) when valid = '1' else '0';\n";
    }
}

std::vector<testset::MultipleChoiceItem> mc_items() {
    static const std::array<std::string_view, 6> stems{
        "Which statement describes the effect of the sensitivity list in the process below?",
        "What is the width of the result produced by the expression in this snippet?",
        "Which signal is updated first when the clock rises in the code below?",
        "Which of the following best describes the hardware inferred from this VHDL?",
        "What value does the output take immediately after reset?",
        "Which library provides the arithmetic operators used in this design?",
    };
    std::vector<testset::MultipleChoiceItem> out;
    for (std::size_t i = 1; i <= kMcItems; ++i) {
        testset::MultipleChoiceItem it;
        it.id = "mc-" + pad3(i);
        it.stem = std::string(stems[i % stems.size()]) + "\n\n" + vhdl_snippet(i);
        const std::size_t choices = i % 7 == 0 ? 5 : 4;
        for (std::size_t c = 0; c < choices; ++c)
            it.choices.push_back({static_cast<char>('A' + c),
                                  "option " + std::to_string(c + 1) + " for question " + std::to_string(i)});
        it.reference_answer = static_cast<char>('A' + (i * 7) % choices);
        it.topic = kTopics[i % kTopics.size()];
        it.difficulty = static_cast<int>(1 + i % 5);
        it.relevance = static_cast<int>(1 + (i / 5) % 5);
        it.status = testset::Status::reviewed;
        it.history.push_back(approved(it.id));
        out.push_back(std::move(it));
    }
    return out;
}

std::vector<testset::CodeExplanationItem> ce_items(std::size_t n, std::string_view prefix) {
    static const std::array<std::string_view, 4> summaries{
        "A synchronous up-counter with an active-high synchronous reset; the count register increments on "
        "every rising clock edge and drives the output port.",
        "A four-way multiplexer written as a selected signal assignment; the two-bit select chooses which "
        "input drives y, with d as the default.",
        "A shift register stage that shifts in din on each enabled rising clock edge, dropping the oldest bit.",
        "A combinational parity generator gated by valid; it outputs the xor of the data bits or zero.",
    };
    std::vector<testset::CodeExplanationItem> out;
    for (std::size_t i = 1; i <= n; ++i) {
        testset::CodeExplanationItem it;
        it.id = std::string(prefix) + "-" + pad3(i);
        it.topic = kTopics[i % kTopics.size()];
        it.difficulty = static_cast<int>(1 + (i * 3) % 5);
        it.relevance = static_cast<int>(1 + (i * 2) % 5);
        it.code = vhdl_snippet(i);
        it.reference_explanation = std::string(summaries[i % 4]) + " Variant " + std::to_string(i) + ".";
        it.status = testset::Status::reviewed;
        it.history.push_back(approved(it.id));
        out.push_back(std::move(it));
    }
    return out;
}

inference::MockBackend mc_script(const std::vector<testset::MultipleChoiceItem>& items, std::size_t correct) {
    inference::MockBackend m;
    const std::size_t n = items.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& it = items[i];
        // 97 is coprime with 263, so this picks exactly `correct` items spread over the set
        const bool right = (i * 97) % n < correct;
        std::string text;
        if (right) {
            const std::string letter(1, it.reference_answer);
            text = i % 3 == 0 ? letter : i % 3 == 1 ? "The answer is " + letter + "." : "Answer: " + letter;
        } else if (i % 5 == 0) {
            text = "Unable to determine from the given choices.";
        } else {
            const char wrong = static_cast<char>('A' + (it.reference_answer - 'A' + 1) % it.choices.size());
            text = i % 2 ? std::string(1, wrong) : "The answer is " + std::string(1, wrong) + ".";
        }
        m.add(testset::render_prompt(it), text);
    }
    return m;
}

std::vector<testset::TestItem> curated_set() {
    std::vector<testset::TestItem> out;
    for (auto& it : ce_items(kCeItems)) out.emplace_back(std::move(it));
    for (auto& it : mc_items()) out.emplace_back(std::move(it));
    for (std::size_t i = 1; i <= 2; ++i) {
        testset::CodeExplanationItem d;
        d.id = "ce-draft-" + pad3(i);
        d.code = "-- netlist dump\n" + std::string(40, 'x') + "\n";
        d.reference_explanation = "Generated netlist; not suitable.";
        d.status = testset::Status::dropped;
        d.history.push_back({d.id, "sme-a", testset::ReviewAction::drop, "2024-11-05T09:30:00Z",
                             "too long for the context window"});
        out.emplace_back(std::move(d));
    }
    return out;
}

std::vector<int> score_spread(std::size_t n, int total, std::size_t salt) {
    std::vector<int> s(n, 4);
    // pairs of 5 and 3 keep the sum and add spread
    for (std::size_t k = 0; k + 1 < n && k < n / 3; k += 2) {
        s[k] = 5;
        s[k + 1] = 3;
    }
    int diff = total - 4 * static_cast<int>(n);
    for (std::size_t k = n; k-- > 0 && diff != 0;) {
        if (s[k] != 4) continue;
        s[k] += diff > 0 ? 1 : -1;
        diff += diff > 0 ? -1 : 1;
    }
    if (diff != 0) throw Error("InvalidArgument", "score total out of reach");
    std::mt19937_64 rng(salt);
    std::shuffle(s.begin(), s.end(), rng);
    return s;
}

BeamFixture beam_fixture() {
    BeamFixture f;
    f.items = ce_items(kBeamItems, "beam");
    for (const auto& row : kTable5) {
        const int total = static_cast<int>(row.normalized * kBeamItems + 0.5);
        const auto scores = score_spread(kBeamItems, total, row.width);
        const auto mode = inference::DecodeMode::beam(row.width);
        for (std::size_t i = 0; i < f.items.size(); ++i) {
            const auto& it = f.items[i];
            const std::string explanation = "Beam " + std::to_string(row.width) + " explanation for " + it.id +
                                            ": the snippet describes registered logic and its outputs.";
            f.model.add(testset::render_prompt(it), explanation, mode);
            const std::string verdict = "The explanation covers " +
                                        std::string(scores[i] >= 4 ? "most" : "some") +
                                        " of the reference concepts.\nVHDL Code Explanation Score: " +
                                        std::to_string(scores[i]) + ".";
            f.judge.add(judging::build_judge_prompt(it.code, it.reference_explanation, explanation), verdict);
        }
    }
    return f;
}

analytics::ScoreTable table2() {
    analytics::ScoreTable t;
    t.models = {"Base", "EPT1.1", "EPT1.2", "EPT2.1", "EPT2.2", "EPT2.3"};
    t.raters = {"SME", "Judge 1", "Judge 2", "Judge 3"};
    t.cells = {{2.73, 3.76, 3.19, 2.86}, {3.25, 4.14, 3.35, 3.06}, {3.25, 4.10, 3.33, 3.09},
               {3.60, 4.36, 3.49, 3.30}, {3.75, 4.59, 3.51, 3.25}, {3.55, 4.49, 3.55, 3.36}};
    return t;
}

analytics::ScoreTable table3() {
    analytics::ScoreTable t;
    t.models = {"Current Base", "EPT2.2", "Model merged", "Instruction-tuned"};
    t.raters = {"Normalized score"};
    t.cells = {{2.73}, {3.47}, {3.67}, {3.84}};
    return t;
}

analytics::ScoreTable table4() {
    analytics::ScoreTable t;
    t.models = {"Current Base", "New Base 1", "New Base 2", "New Base 3"};
    t.raters = {"Normalized score"};
    t.cells = {{2.73}, {3.67}, {4.12}, {4.38}};
    return t;
}

tokenizer::TokenStats table1_stats() { return {162'000'000, 168'000'000, 14'600'000}; }

namespace {

const tokenizer::MergeList& toy_merges() {
    static const tokenizer::MergeList merges{
        {"e", "n"}, {"en", "d"}, {"i", "s"}, {"t", "h"}, {"<", "="}, {"s", "i"},  {"g", "n"},
        {"a", "l"}, {"r", "t"},  {"p", "o"}, {"po", "rt"}, {"c", "l"}, {"cl", "k"}, {"a", "b"},
    };
    return merges;
}

} // namespace

std::string toy_vocab_text() {
    tokenizer::Vocabulary v;
    for (int b = 0; b < 256; ++b) v.token_to_id[std::string(1, static_cast<char>(b))] = static_cast<tokenizer::TokenId>(b);
    tokenizer::TokenId next = 256;
    for (const auto& [l, r] : toy_merges()) v.token_to_id.emplace(l + r, next++);
    v.special_tokens["EOS"] = next;
    return "# toy byte-level vocabulary\n" + tokenizer::format_vocab(v);
}

std::string toy_merges_text() {
    std::string out = "# toy merges, highest priority first\n";
    for (const auto& [l, r] : toy_merges()) out += tokenizer::escape_token(l) + " " + tokenizer::escape_token(r) + "\n";
    return out;
}

tokenizer::Tokenizer toy_tokenizer() { return tokenizer::parse_bpe(toy_vocab_text(), toy_merges_text()); }

nlohmann::json service_assignments() {
    nlohmann::json pairs_a = nlohmann::json::array();
    nlohmann::json pairs_b = nlohmann::json::array();
    const std::array<std::string, 3> models{"base", "ept2.2", "it"};
    for (std::size_t i = 1; i <= 5; ++i) {
        for (const auto& m : models) {
            pairs_a.push_back({{"item", "ce-" + pad3(i)}, {"model", m}});
            pairs_b.push_back({{"item", "ce-" + pad3(i + 5)}, {"model", m}});
        }
    }
    return {{"raters",
             {{{"id", "sme-a"}, {"pairs", pairs_a}},
              {{"id", "sme-b"}, {"token", "b-secret"}, {"pairs", pairs_b}},
              {{"id", "sme-c"}, {"pairs", nlohmann::json::array()}}}}};
}

void write_all(const std::string& dir) {
    const fs::path root(dir);
    auto put = [&](const fs::path& rel, const std::string& content) {
        fs::create_directories((root / rel).parent_path());
        text::write_file((root / rel).string(), content);
    };

    const auto mc = mc_items();
    testset::export_set((fs::create_directories(root / "mc"), (root / "mc" / "testset.jsonl").string()),
                        std::vector<testset::TestItem>(mc.begin(), mc.end()));
    for (const auto& s : kTable6)
        put(fs::path("mc") / "scripts" / (std::string(s.name) + ".json"), mc_script(mc, s.correct).to_json().dump(1) + "\n");

    const auto beam = beam_fixture();
    fs::create_directories(root / "beam");
    testset::export_set((root / "beam" / "testset.jsonl").string(),
                        std::vector<testset::TestItem>(beam.items.begin(), beam.items.end()));
    put("beam/scripts/model_beam.json", beam.model.to_json().dump(1) + "\n");
    put("beam/scripts/judge_beam.json", beam.judge.to_json().dump(1) + "\n");

    fs::create_directories(root / "curated");
    testset::export_set((root / "curated" / "testset.jsonl").string(), curated_set());

    put("tables/table2.json", analytics::to_json(table2()).dump(2) + "\n");
    put("tables/table3.json", analytics::to_json(table3()).dump(2) + "\n");
    put("tables/table4.json", analytics::to_json(table4()).dump(2) + "\n");
    put("corpus/token_stats.json", tokenizer::to_json(table1_stats()).dump(2) + "\n");
    put("toy/vocab.txt", toy_vocab_text());
    put("toy/merges.txt", toy_merges_text());
    put("service/assignments.json", service_assignments().dump(2) + "\n");
}

} // namespace vhdlx::fixtures
