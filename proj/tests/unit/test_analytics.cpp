#include "vhdlx/analytics.hpp"

#include "fixtures.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace vhdlx::analytics;
using namespace vhdlx::fixtures;
using vhdlx::testing::error_name;

namespace {

// Raw-sum form, computed in long double.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    long double n = x.size(), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += (long double)x[i] * x[i];
        syy += (long double)y[i] * y[i];
        sxy += (long double)x[i] * y[i];
    }
    return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

std::vector<std::size_t> argsort(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    return idx;
}

CategoryScores all(int c, int p, int k, int s) {
    return {{"correctness", c}, {"completeness", p}, {"compactness", k}, {"consistency", s}};
}

} // namespace

TEST(Percent, EndpointsAndRounding) {
    EXPECT_EQ(percent_score(1.0), 0);
    EXPECT_EQ(percent_score(5.0), 100);
    EXPECT_EQ(percent_score(3.0), 50);
    EXPECT_EQ(percent_score(1.02), 1);  // 0.5 rounds up
    EXPECT_EQ(percent_score(1.0199), 0);
    EXPECT_EQ(error_name([] { percent_score(0.99); }), "OutOfRange");
    EXPECT_EQ(error_name([] { percent_score(5.01); }), "OutOfRange");
    EXPECT_EQ(error_name([] { percent_score(NAN); }), "OutOfRange");
}

TEST(Percent, MatchesPublishedColumns) {
    const std::vector<std::pair<double, int>> published{
        {2.73, 43}, {3.25, 56}, {3.60, 65}, {3.75, 69}, {3.55, 64},             // SME column
        {3.47, 62}, {3.67, 67}, {3.84, 71},                                     // instruction tuning
        {4.12, 78}, {4.38, 85},                                                 // new base models
        {4.09, 77}, {4.01, 75}, {3.81, 70}};                                    // beam widths
    for (const auto& [likert, pct] : published) EXPECT_EQ(percent_score(likert), pct) << likert;
}

TEST(Percent, MonotoneOverGrid) {
    int prev = -1;
    for (int i = 0; i <= 4000; ++i) {
        const int p = percent_score(1.0 + i / 1000.0);
        ASSERT_GE(p, prev);
        ASSERT_LE(std::abs(p - 25.0 * i / 1000.0), 0.5 + 1e-6);
        prev = p;
    }
}

TEST(Sme, Reducers) {
    const auto s = all(4, 3, 5, 2);
    EXPECT_DOUBLE_EQ(sme_overall(s), 3.5);
    EXPECT_DOUBLE_EQ(sme_overall(s, SmeReducer::correctness_only), 4.0);
    EXPECT_DOUBLE_EQ(sme_overall(s, SmeReducer::minimum), 2.0);
    auto missing = s;
    missing.erase("compactness");
    EXPECT_EQ(error_name([&] { sme_overall(missing); }), "MissingCategory");
    EXPECT_EQ(error_name([] { sme_overall(all(6, 1, 1, 1)); }), "OutOfRange");
    const std::vector<CategoryScores> items{all(1, 1, 1, 1), all(5, 5, 5, 5), all(3, 3, 3, 4)};
    EXPECT_DOUBLE_EQ(model_sme_score(items), (1.0 + 5.0 + 3.25) / 3);
    EXPECT_EQ(error_name([] { model_sme_score({}); }), "EmptyInput");
}

TEST(Pearson, AgreesWithRawSumFormula) {
    const auto t = table2();
    const auto sme = t.column("SME");
    for (const char* judge : {"Judge 1", "Judge 2", "Judge 3"})
        EXPECT_NEAR(pearson(sme, t.column(judge)), pearson_oracle(sme, t.column(judge)), 1e-12) << judge;
    EXPECT_NEAR(pearson(sme, t.column("Judge 1")), 0.9786, 5e-5);
    EXPECT_NEAR(pearson(sme, t.column("Judge 2")), 0.9524, 5e-5);
    EXPECT_NEAR(pearson(sme, t.column("Judge 3")), 0.9269, 5e-5);
}

TEST(Pearson, AffineInvarianceAndErrors) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(8), y(8);
        for (auto& v : x) v = n(rng);
        for (auto& v : y) v = n(rng);
        const double a = 0.1 + std::abs(n(rng)) * 3, b = n(rng) * 10;
        std::vector<double> ax(x);
        for (auto& v : ax) v = a * v + b;
        ASSERT_NEAR(pearson(ax, y), pearson(x, y), 1e-9);
        ASSERT_NEAR(pearson(x, y), pearson_oracle(x, y), 1e-9);
        std::vector<double> neg(x);
        for (auto& v : neg) v = -v;
        ASSERT_NEAR(pearson(neg, y), -pearson(x, y), 1e-12);
    }
    const std::vector<double> flat{2, 2, 2};
    const std::vector<double> up{1, 2, 3};
    EXPECT_EQ(error_name([&] { pearson(flat, up); }), "DegenerateInput");
    EXPECT_EQ(error_name([&] { pearson(std::vector<double>{1}, std::vector<double>{1}); }), "DegenerateInput");
    EXPECT_EQ(error_name([&] { pearson(up, std::vector<double>{1, 2}); }), "DegenerateInput");
}

TEST(Calibrate, IdentityAndDegenerate) {
    const std::vector<double> xs{2.0, 3.0, 4.5};
    for (auto s : {CalibrationStrategy::affine_lsq, CalibrationStrategy::anchor_endpoints,
                   CalibrationStrategy::zscore_match}) {
        const auto m = calibrate_judge(xs, xs, s);
        EXPECT_NEAR(m.slope, 1.0, 1e-12);
        EXPECT_NEAR(m.intercept, 0.0, 1e-12);
        EXPECT_EQ(m.strategy, s);
    }
    const std::vector<double> flat{3, 3, 3};
    EXPECT_EQ(error_name([&] { calibrate_judge(flat, xs); }), "DegenerateFit");
    EXPECT_EQ(error_name([&] { calibrate_judge(xs, flat); }), "DegenerateFit");  // slope 0
    EXPECT_EQ(error_name([&] { calibrate_judge(std::vector<double>{1}, std::vector<double>{1}); }), "InvalidInput");
    EXPECT_EQ(error_name([&] { calibrate_judge(xs, std::vector<double>{1, 2}); }), "InvalidInput");
    EXPECT_EQ(parse_strategy("zscore_match"), CalibrationStrategy::zscore_match);
    EXPECT_EQ(error_name([] { parse_strategy("median"); }), "UnknownStrategy");
}

TEST(Calibrate, ClampsToScale) {
    CalibrationMap m{CalibrationStrategy::affine_lsq, 2.0, -1.0};
    EXPECT_DOUBLE_EQ(m.apply(0.5), 1.0);
    EXPECT_DOUBLE_EQ(m.apply(2.0), 3.0);
    EXPECT_DOUBLE_EQ(m.apply(4.0), 5.0);
}

TEST(Calibrate, LeastSquaresMatchesNormalEquations) {
    const auto t = table2();
    const auto x = t.column("Judge 2");
    const auto y = t.column("SME");
    long double n = x.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += (long double)x[i] * x[i];
        sxy += (long double)x[i] * y[i];
    }
    const double slope = static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
    const double intercept = static_cast<double>((sy - slope * sx) / n);
    const auto m = calibrate_judge(x, y);
    EXPECT_NEAR(m.slope, slope, 1e-9);
    EXPECT_NEAR(m.intercept, intercept, 1e-9);
    EXPECT_NEAR(m.slope, 2.534703, 1e-6);
    EXPECT_NEAR(m.intercept, -5.271438, 1e-6);
}

TEST(Calibrate, PositiveSlopePreservesJudgeOrder) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(1.0, 5.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> judge(6), sme(6);
        for (std::size_t i = 0; i < 6; ++i) {
            judge[i] = u(rng);
            sme[i] = std::clamp(judge[i] * 0.8 + 0.5 + (u(rng) - 3.0) * 0.2, 1.0, 5.0);
        }
        for (auto s : {CalibrationStrategy::affine_lsq, CalibrationStrategy::anchor_endpoints,
                       CalibrationStrategy::zscore_match}) {
            const auto m = calibrate_judge(judge, sme, s);
            if (m.slope <= 0) continue;
            std::vector<double> cal;
            for (double j : judge) cal.push_back(m.apply(j));
            // clamping can merge neighbours, never swap them
            for (std::size_t a = 0; a < 6; ++a)
                for (std::size_t b = 0; b < 6; ++b)
                    if (judge[a] < judge[b]) ASSERT_LE(cal[a], cal[b]);
        }
    }
}

TEST(Calibrate, NoisyRaterCorrelationShrinks) {
    // a judge equal to SME plus growing noise keeps correlating less on average
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> sme(200);
    for (auto& v : sme) v = 3 + n(rng) * 0.5;
    double prev = 1.0 + 1e-12;
    for (double sigma : {0.0, 0.2, 0.5, 1.0, 2.0}) {
        double avg = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> judge(sme);
            for (auto& v : judge) v += n(rng) * sigma;
            avg += pearson(sme, judge) / 20;
        }
        EXPECT_LT(avg, prev) << sigma;
        prev = avg;
    }
}

TEST(Table, ValidationAndJson) {
    const auto t = table2();
    EXPECT_EQ(table_from_json(nlohmann::json::parse(to_json(t).dump())).cells, t.cells);
    ScoreTable bad = t;
    bad.cells[0].pop_back();
    EXPECT_EQ(error_name([&] { bad.validate(); }), "InvalidTable");
    bad = t;
    bad.cells[1][0] = 5.5;
    EXPECT_EQ(error_name([&] { bad.validate(); }), "InvalidTable");
    EXPECT_EQ(error_name([&] { t.column("Judge 9"); }), "InvalidTable");
    EXPECT_EQ(error_name([] { table_from_json(nlohmann::json::parse(R"({"models":1})")); }), "ParseError");
}

TEST(Report, CalibratedJudgeTwo) {
    const auto rep = model_report(table2(), std::string("Judge 2"));
    ASSERT_EQ(rep.rows.size(), 6u);
    std::vector<int> sme_pct;
    for (const auto& r : rep.rows) sme_pct.push_back(r.percent);
    EXPECT_EQ(sme_pct, (std::vector<int>{43, 56, 56, 65, 69, 64}));
    std::vector<int> cal;
    for (const auto& r : rep.rows) cal.push_back(*r.calibrated_percent);
    EXPECT_EQ(cal, (std::vector<int>{45, 55, 54, 64, 66, 68}));
    ASSERT_EQ(rep.correlations.size(), 3u);
    std::vector<double> calibrated;
    for (const auto& r : rep.rows) calibrated.push_back(*r.calibrated);
    EXPECT_EQ(argsort(calibrated), argsort(table2().column("Judge 2")));

    const auto text = format_text(rep);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "Model    SME  Judge 1  Judge 2  Judge 3  SME %  Norm.Judge 2  Norm.Judge 2 %");
    EXPECT_NE(text.find("pearson(SME, Judge 2) = 0.9524"), std::string::npos) << text;
    const auto j = to_json(rep);
    EXPECT_EQ(j["calibration"]["rater"], "Judge 2");
    EXPECT_EQ(j["rows"][5]["calibrated_percent"], 68);
}

TEST(Report, SingleModelHasNoCorrelations) {
    ScoreTable t{{"only"}, {"SME", "J"}, {{3.0, 4.0}}};
    const auto rep = model_report(t);
    EXPECT_TRUE(rep.correlations.empty());
    EXPECT_EQ(rep.rows[0].percent, 50);
    EXPECT_EQ(format_text(rep).find("pearson"), std::string::npos);
    EXPECT_EQ(error_name([&] { model_report(t, std::string("J")); }), "InvalidInput");
}

TEST(Report, NormalizedTables) {
    std::vector<int> p3, p4;
    for (const auto& r : model_report(table3()).rows) p3.push_back(r.percent);
    for (const auto& r : model_report(table4()).rows) p4.push_back(r.percent);
    EXPECT_EQ(p3, (std::vector<int>{43, 62, 67, 71}));
    EXPECT_EQ(p4, (std::vector<int>{43, 67, 78, 85}));
}
