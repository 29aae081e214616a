#include "vhdlx/analytics.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace vhdlx::analytics {
namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population variance; the calibration strategies only use ratios of spreads.
double variance_of(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
}

std::string pad_right(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

} // namespace

int percent_score(double likert) {
    if (!(likert >= 1.0 && likert <= 5.0))
        throw Error("OutOfRange", "Likert score " + std::to_string(likert) + " not in [1,5]");
    // The slack absorbs representation error so that e.g. 4.38 (84.4999...) rounds up.
    return static_cast<int>(std::floor(25.0 * (likert - 1.0) + 0.5 + 1e-9));
}

double sme_overall(const CategoryScores& scores, SmeReducer reducer) {
    std::array<int, 4> v{};
    for (std::size_t i = 0; i < kCategories.size(); ++i) {
        auto it = scores.find(kCategories[i]);
        if (it == scores.end())
            throw Error("MissingCategory", "no score for category " + std::string(kCategories[i]));
        if (it->second < 1 || it->second > 5)
            throw Error("OutOfRange", std::string(kCategories[i]) + " score " +
                                          std::to_string(it->second) + " not in 1..5");
        v[i] = it->second;
    }
    switch (reducer) {
    case SmeReducer::correctness_only:
        return v[0];
    case SmeReducer::minimum:
        return *std::min_element(v.begin(), v.end());
    case SmeReducer::mean:
        break;
    }
    return (v[0] + v[1] + v[2] + v[3]) / 4.0;
}

double model_sme_score(std::span<const CategoryScores> items, SmeReducer reducer) {
    if (items.empty()) throw Error("EmptyInput", "no rated items");
    double sum = 0.0;
    for (const auto& item : items) sum += sme_overall(item, reducer);
    return sum / static_cast<double>(items.size());
}

std::string_view to_string(CalibrationStrategy s) {
    switch (s) {
    case CalibrationStrategy::anchor_endpoints:
        return "anchor_endpoints";
    case CalibrationStrategy::zscore_match:
        return "zscore_match";
    case CalibrationStrategy::affine_lsq:
        break;
    }
    return "affine_lsq";
}

CalibrationStrategy parse_strategy(std::string_view s) {
    if (s == "affine_lsq") return CalibrationStrategy::affine_lsq;
    if (s == "anchor_endpoints") return CalibrationStrategy::anchor_endpoints;
    if (s == "zscore_match") return CalibrationStrategy::zscore_match;
    throw Error("UnknownStrategy", "unknown calibration strategy '" + std::string(s) + "'");
}

double CalibrationMap::apply(double judge_score) const {
    return std::clamp(slope * judge_score + intercept, 1.0, 5.0);
}

CalibrationMap calibrate_judge(std::span<const double> judge, std::span<const double> sme,
                               CalibrationStrategy strategy) {
    if (judge.size() != sme.size())
        throw Error("InvalidInput", "judge and SME columns differ in length");
    if (judge.size() < 2) throw Error("InvalidInput", "calibration needs at least 2 paired models");

    const double mj = mean_of(judge);
    const double ms = mean_of(sme);
    const double vj = variance_of(judge, mj);
    if (!(vj > 0.0)) throw Error("DegenerateFit", "judge scores have zero variance");

    CalibrationMap map;
    map.strategy = strategy;
    switch (strategy) {
    case CalibrationStrategy::affine_lsq: {
        double cov = 0.0;
        for (std::size_t i = 0; i < judge.size(); ++i) cov += (judge[i] - mj) * (sme[i] - ms);
        cov /= static_cast<double>(judge.size());
        map.slope = cov / vj;
        map.intercept = ms - map.slope * mj;
        break;
    }
    case CalibrationStrategy::anchor_endpoints: {
        const auto [jmin, jmax] = std::minmax_element(judge.begin(), judge.end());
        const auto [smin, smax] = std::minmax_element(sme.begin(), sme.end());
        map.slope = (*smax - *smin) / (*jmax - *jmin);
        map.intercept = *smin - map.slope * *jmin;
        break;
    }
    case CalibrationStrategy::zscore_match:
        map.slope = std::sqrt(variance_of(sme, ms) / vj);
        map.intercept = ms - map.slope * mj;
        break;
    }
    if (!std::isfinite(map.slope) || !std::isfinite(map.intercept) || map.slope == 0.0)
        throw Error("DegenerateFit", "calibration produced slope " + std::to_string(map.slope));
    return map;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw Error("DegenerateInput", "pearson needs two equal-length series of length >= 2");
    const double mx = mean_of(xs);
    const double my = mean_of(ys);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("DegenerateInput", "zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void ScoreTable::validate() const {
    if (raters.empty()) throw Error("InvalidTable", "no rater columns");
    if (cells.size() != models.size()) throw Error("InvalidTable", "row count differs from model count");
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (cells[r].size() != raters.size())
            throw Error("InvalidTable", "row " + models[r] + " has the wrong number of cells");
        for (double v : cells[r]) {
            if (!(v >= 1.0 && v <= 5.0))
                throw Error("InvalidTable", "cell " + std::to_string(v) + " in row " + models[r] +
                                                " outside [1,5]");
        }
    }
}

std::vector<double> ScoreTable::column(std::string_view rater) const {
    auto it = std::find(raters.begin(), raters.end(), rater);
    if (it == raters.end()) throw Error("InvalidTable", "no rater column '" + std::string(rater) + "'");
    const auto c = static_cast<std::size_t>(it - raters.begin());
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& row : cells) out.push_back(row[c]);
    return out;
}

ScoreTable table_from_json(const nlohmann::json& j) {
    ScoreTable t;
    try {
        t.models = j.at("models").get<std::vector<std::string>>();
        t.raters = j.at("raters").get<std::vector<std::string>>();
        t.cells = j.at("cells").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("ParseError", std::string("score table: ") + e.what());
    }
    t.validate();
    return t;
}

nlohmann::ordered_json to_json(const ScoreTable& t) {
    nlohmann::ordered_json j;
    j["models"] = t.models;
    j["raters"] = t.raters;
    j["cells"] = t.cells;
    return j;
}

ModelReport model_report(const ScoreTable& table, const std::optional<std::string>& calibrate_rater,
                         CalibrationStrategy strategy) {
    table.validate();
    ModelReport report;
    report.raters = table.raters;
    const auto reference = table.column(table.raters.front());

    std::vector<double> judge;
    if (calibrate_rater) {
        judge = table.column(*calibrate_rater);
        report.calibrated_rater = *calibrate_rater;
        report.calibration = calibrate_judge(judge, reference, strategy);
    }
    for (std::size_t r = 0; r < table.models.size(); ++r) {
        ReportRow row;
        row.model = table.models[r];
        row.scores = table.cells[r];
        row.percent = percent_score(reference[r]);
        if (report.calibration) {
            row.calibrated = report.calibration->apply(judge[r]);
            row.calibrated_percent = percent_score(*row.calibrated);
        }
        report.rows.push_back(std::move(row));
    }
    if (table.models.size() >= 2) {
        for (std::size_t c = 1; c < table.raters.size(); ++c) {
            try {
                report.correlations.emplace_back(table.raters[c],
                                                 pearson(reference, table.column(table.raters[c])));
            } catch (const Error&) {
                // constant column: no correlation to report
            }
        }
    }
    return report;
}

std::string format_text(const ModelReport& report) {
    std::vector<std::string> header{"Model"};
    for (const auto& r : report.raters) header.push_back(r);
    header.push_back(report.raters.front() + " %");
    if (report.calibrated_rater) {
        header.push_back("Norm." + *report.calibrated_rater);
        header.push_back("Norm." + *report.calibrated_rater + " %");
    }
    std::vector<std::vector<std::string>> body;
    for (const auto& row : report.rows) {
        std::vector<std::string> cells{row.model};
        for (double v : row.scores) cells.push_back(text::fixed2(v));
        cells.push_back(std::to_string(row.percent));
        if (row.calibrated) {
            cells.push_back(text::fixed2(*row.calibrated));
            cells.push_back(std::to_string(*row.calibrated_percent));
        }
        body.push_back(std::move(cells));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : body) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out += "  ";
            out += c == 0 ? pad_right(cells[c], width[c]) : pad_left(cells[c], width[c]);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + "\n";
    };
    std::string out = line(header);
    for (const auto& row : body) out += line(row);
    if (!report.correlations.empty()) {
        out += "\n";
        for (const auto& [rater, r] : report.correlations) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "pearson(%s, %s) = %.4f\n", report.raters.front().c_str(),
                          rater.c_str(), r);
            out += buf;
        }
    }
    if (report.calibration) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "calibration %s: slope %.6f intercept %.6f\n",
                      std::string(to_string(report.calibration->strategy)).c_str(),
                      report.calibration->slope, report.calibration->intercept);
        out += buf;
    }
    return out;
}

nlohmann::ordered_json to_json(const ModelReport& report) {
    nlohmann::ordered_json j;
    j["raters"] = report.raters;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json r;
        r["model"] = row.model;
        r["scores"] = row.scores;
        r["percent"] = row.percent;
        if (row.calibrated) {
            r["calibrated"] = *row.calibrated;
            r["calibrated_percent"] = *row.calibrated_percent;
        }
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    nlohmann::ordered_json corr = nlohmann::ordered_json::object();
    for (const auto& [rater, r] : report.correlations) corr[rater] = r;
    j["correlations"] = std::move(corr);
    if (report.calibration) {
        j["calibration"] = {{"rater", *report.calibrated_rater},
                            {"strategy", std::string(to_string(report.calibration->strategy))},
                            {"slope", report.calibration->slope},
                            {"intercept", report.calibration->intercept}};
    }
    return j;
}

} // namespace vhdlx::analytics
