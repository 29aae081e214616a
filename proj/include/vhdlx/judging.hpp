#pragma once

#include "vhdlx/testset.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::judging {

inline constexpr std::string_view kScoreMarker = "VHDL Code Explanation Score:";

struct JudgeVerdict {
    std::string item_id;
    std::string model_id;
    int score = 0;  // 1..5
    std::string justification;

    bool operator==(const JudgeVerdict&) const = default;
};

struct MCResult {
    std::string item_id;
    std::string model_id;
    std::optional<char> extracted;  // nullopt: no answer found
    bool correct = false;

    bool no_answer() const { return !extracted.has_value(); }
    bool operator==(const MCResult&) const = default;
};

// Rubric prompt with the code, the reference explanation and the model explanation in labeled
// sections. Errors: EmptyField.
std::string build_judge_prompt(std::string_view code, std::string_view reference_explanation,
                               std::string_view model_explanation);

// Score from the last marker followed by an integer. Errors: MarkerMissing, ScoreOutOfRange.
int parse_judge_score(std::string_view judge_output);

// Full verdict from a judge completion. Justifications over 100 words are kept; the caller
// may check justification_word_count.
JudgeVerdict parse_verdict(std::string_view judge_output, std::string item_id, std::string model_id);
std::size_t justification_word_count(std::string_view justification);

// First standalone capital letter within the item's label range.
std::optional<char> extract_choice(std::string_view completion, const testset::MultipleChoiceItem& item);
MCResult grade_mc(std::string_view completion, const testset::MultipleChoiceItem& item,
                  std::string model_id = {});

// Errors: EmptyInput.
double mc_accuracy(std::span<const MCResult> results);

// Append-only JSON-lines store keyed by (model, item, run id).
class ResultLog {
public:
    explicit ResultLog(std::string path) : path_(std::move(path)) {}

    void append(const JudgeVerdict& v, const std::string& run_id) const;
    void append(const MCResult& r, const std::string& run_id) const;
    std::vector<nlohmann::json> records() const;

private:
    void append_line(const nlohmann::ordered_json& j) const;
    std::string path_;
};

} // namespace vhdlx::judging
