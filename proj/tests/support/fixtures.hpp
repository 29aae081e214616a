#pragma once

// Deterministic fixtures shared by the tests and tools/make_fixtures.

#include "vhdlx/analytics.hpp"
#include "vhdlx/inference.hpp"
#include "vhdlx/testset.hpp"
#include "vhdlx/tokenizer.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace vhdlx::fixtures {

struct McScript {
    std::string_view name;
    std::string_view model;
    std::size_t correct;
    double published_accuracy;
};

// Correct counts out of 263 that round to the published accuracies.
inline constexpr std::array<McScript, 6> kTable6{{
    {"table6_base", "Current Base", 89, 0.34},
    {"table6_ept", "After EPT", 95, 0.36},
    {"table6_it", "After IT", 95, 0.36},
    {"table6_new1", "New Base 1", 103, 0.39},
    {"table6_new2", "New Base 2", 103, 0.39},
    {"table6_new3", "New Base 3", 160, 0.61},
}};

inline constexpr std::size_t kMcItems = 263;
inline constexpr std::size_t kCeItems = 80;
inline constexpr std::size_t kBeamItems = 100;

struct BeamRow {
    std::size_t width;
    double normalized;
    int percent;
};

inline constexpr std::array<BeamRow, 5> kTable5{{
    {1, 3.84, 71}, {2, 4.09, 77}, {3, 4.01, 75}, {4, 3.81, 70}, {5, 4.09, 77}}};

std::string vhdl_snippet(std::size_t i);

std::vector<testset::MultipleChoiceItem> mc_items();
std::vector<testset::CodeExplanationItem> ce_items(std::size_t n, std::string_view prefix = "ce");

// MC completions for one model: `correct` items answered right, the rest wrong or unanswered.
inference::MockBackend mc_script(const std::vector<testset::MultipleChoiceItem>& items, std::size_t correct);

// 80 code-explanation and 263 multiple-choice items plus two dropped drafts.
std::vector<testset::TestItem> curated_set();

struct BeamFixture {
    std::vector<testset::CodeExplanationItem> items;
    inference::MockBackend model;  // one explanation per item and width, keyed by beam mode
    inference::MockBackend judge;  // verdicts whose per-width means reproduce kTable5
};
BeamFixture beam_fixture();

// Integer scores in 1..5 over `n` items summing to `total`, spread over several values.
std::vector<int> score_spread(std::size_t n, int total, std::size_t salt);

analytics::ScoreTable table2();
analytics::ScoreTable table3();
analytics::ScoreTable table4();

tokenizer::TokenStats table1_stats();

// Byte-level vocabulary with a handful of VHDL-flavoured merges.
std::string toy_vocab_text();
std::string toy_merges_text();
tokenizer::Tokenizer toy_tokenizer();

// Rater assignments for the service fixture: two raters, the second with a bearer token.
nlohmann::json service_assignments();

// Writes the on-disk fixture tree under dir.
void write_all(const std::string& dir);

} // namespace vhdlx::fixtures
