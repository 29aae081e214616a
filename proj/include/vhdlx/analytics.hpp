#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::analytics {

// round-half-up(100 * (likert - 1) / 4). Errors: OutOfRange outside [1, 5].
int percent_score(double likert);

inline constexpr std::array<std::string_view, 4> kCategories{"correctness", "completeness",
                                                             "compactness", "consistency"};

// Category name -> 1..5 Likert score.
using CategoryScores = std::map<std::string, int, std::less<>>;

enum class SmeReducer { mean, correctness_only, minimum };

// Overall Likert value for one rated item. Errors: MissingCategory, OutOfRange.
double sme_overall(const CategoryScores& scores, SmeReducer reducer = SmeReducer::mean);

// Mean over items of sme_overall. Errors: EmptyInput.
double model_sme_score(std::span<const CategoryScores> items, SmeReducer reducer = SmeReducer::mean);

enum class CalibrationStrategy { affine_lsq, anchor_endpoints, zscore_match };
std::string_view to_string(CalibrationStrategy s);
CalibrationStrategy parse_strategy(std::string_view s);

// Every strategy reduces to an affine map on the Likert scale, clamped to [1, 5].
struct CalibrationMap {
    CalibrationStrategy strategy = CalibrationStrategy::affine_lsq;
    double slope = 1.0;
    double intercept = 0.0;

    double apply(double judge_score) const;
};

// Errors: InvalidInput (fewer than 2 pairs, length mismatch), DegenerateFit.
CalibrationMap calibrate_judge(std::span<const double> judge_means, std::span<const double> sme_means,
                               CalibrationStrategy strategy = CalibrationStrategy::affine_lsq);

// Sample Pearson correlation. Errors: DegenerateInput.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Rows are models, columns are raters; the first column is the reference rater (SME).
struct ScoreTable {
    std::vector<std::string> models;
    std::vector<std::string> raters;
    std::vector<std::vector<double>> cells;

    void validate() const;  // InvalidTable
    std::vector<double> column(std::string_view rater) const;
};

ScoreTable table_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ScoreTable& t);

struct ReportRow {
    std::string model;
    std::vector<double> scores;  // one per rater
    int percent = 0;             // of the reference rater
    std::optional<double> calibrated;
    std::optional<int> calibrated_percent;
};

struct ModelReport {
    std::vector<std::string> raters;
    std::optional<std::string> calibrated_rater;
    std::optional<CalibrationMap> calibration;
    std::vector<ReportRow> rows;
    std::vector<std::pair<std::string, double>> correlations;  // rater vs reference
};

// Calibrates `calibrate_rater` against the reference column when given. Correlations are
// reported only for tables with at least two models and non-degenerate columns.
ModelReport model_report(const ScoreTable& table,
                         const std::optional<std::string>& calibrate_rater = std::nullopt,
                         CalibrationStrategy strategy = CalibrationStrategy::affine_lsq);

std::string format_text(const ModelReport& report);
nlohmann::ordered_json to_json(const ModelReport& report);

} // namespace vhdlx::analytics
