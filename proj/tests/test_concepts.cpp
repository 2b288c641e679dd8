#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace blindspot;
using namespace blindspot::concepts;
using rasae::CodeEntry;
using rasae::SparseCodeMatrix;

namespace {

std::vector<EnergyVector> energies_from(const std::vector<std::vector<double>>& rows)
{
    std::vector<EnergyVector> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back({"c" + std::to_string(i), rows[i]});
    }
    return out;
}

std::vector<ConceptScore> scores_from(const std::vector<double>& ediffs)
{
    std::vector<ConceptScore> out;
    for (std::size_t i = 0; i < ediffs.size(); ++i) {
        ConceptScore s;
        s.concept_id = i;
        s.ediff = ediffs[i];
        out.push_back(s);
    }
    return out;
}

SparseCodeMatrix random_codes(std::size_t rows, std::size_t k, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SparseCodeMatrix codes(k);
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<CodeEntry> row;
        for (std::uint32_t c = 0; c < k; ++c) {
            if (u(rng) < 0.3) {
                row.push_back({c, 0.1 + 3.0 * u(rng)});
            }
        }
        codes.push_row(row);
    }
    return codes;
}

} // namespace

TEST(Aggregate, MeanAndMaxOverTokens)
{
    SparseCodeMatrix codes(5);
    const std::vector<CodeEntry> first{{3, 4.0}};
    codes.push_row(first);
    codes.push_row({});
    const tensorio::TokenGrouping g{2, 1};

    const auto mean = aggregate_energies(codes, g, Aggregation::Mean);
    ASSERT_EQ(mean.size(), 1u);
    EXPECT_EQ(mean[0].energies, (std::vector<double>{0, 0, 0, 2.0, 0}));

    const auto mx = aggregate_energies(codes, g, Aggregation::Max);
    EXPECT_EQ(mx[0].energies, (std::vector<double>{0, 0, 0, 4.0, 0}));
}

TEST(Aggregate, SingleTokenIsDensifiedCode)
{
    std::mt19937_64 rng(3);
    const auto codes = random_codes(7, 6, rng);
    const auto e = aggregate_energies(codes, {1, 7}, Aggregation::Mean);
    const auto dense = codes.to_dense();
    for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t k = 0; k < 6; ++k) {
            EXPECT_EQ(e[i].energies[k], dense(i, k));
        }
    }
}

TEST(Aggregate, GroupingMismatchIsShapeError)
{
    SparseCodeMatrix codes(2);
    codes.push_row({});
    try {
        aggregate_energies(codes, {2, 1}, Aggregation::Mean);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Shape);
    }
}

TEST(Aggregate, CaptionIdsArePropagated)
{
    SparseCodeMatrix codes(1);
    codes.push_row({});
    codes.push_row({});
    const std::vector<std::string> ids{"x", "y"};
    const auto e = aggregate_energies(codes, {1, 2}, Aggregation::Max, ids);
    EXPECT_EQ(e[0].caption_id, "x");
    EXPECT_EQ(e[1].caption_id, "y");
}

TEST(EnergyDifference, IdenticalSetsAreNeutral)
{
    const auto real = energies_from({{1, 2, 0}, {3, 0, 1}});
    const auto s = energy_difference(real, real, {});
    for (const auto& c : s) {
        EXPECT_DOUBLE_EQ(c.ediff, 0.5);
        EXPECT_EQ(c.cls, BlindspotClass::Neutral);
    }
}

TEST(EnergyDifference, MissingInGenerationIsSuppressed)
{
    const auto real = energies_from({{9, 1}, {8, 1}, {10, 1}});
    const auto gen = energies_from({{0, 1}, {0, 1}, {0, 1}});
    const auto s = energy_difference(real, gen, {});
    EXPECT_LT(s[0].ediff, 0.1);
    EXPECT_EQ(s[0].cls, BlindspotClass::Suppressed);
    EXPECT_EQ(s[0].frequency, 3u);
    EXPECT_EQ(s[1].cls, BlindspotClass::Neutral);
}

TEST(EnergyDifference, ClosedFormAtDefaultTemperature)
{
    const auto real = energies_from({{0.5}, {1.5}});
    const auto gen = energies_from({{2.0}, {1.0}, {3.0}});
    const auto s = energy_difference(real, gen, {});
    const double expected = 1.0 / (1.0 + std::exp(-1.0 / 0.8));
    EXPECT_NEAR(s[0].ediff, expected, 1e-12);
    EXPECT_NEAR(s[0].ediff, 0.77730, 1e-5);
    EXPECT_DOUBLE_EQ(s[0].delta, 1.0);
}

TEST(EnergyDifference, Errors)
{
    const auto one = energies_from({{1, 2}});
    const std::vector<EnergyVector> none;
    try {
        energy_difference(none, one, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Argument);
    }
    const auto wide = energies_from({{1, 2, 3}});
    EXPECT_THROW(energy_difference(one, wide, {}), Error);
    Thresholds bad;
    bad.lambda_min = 0.95;
    EXPECT_THROW(energy_difference(one, one, bad), Error);
}

TEST(Sigmoid, StableAtExtremes)
{
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_NEAR(sigmoid(-30.0), std::exp(-30.0) / (1 + std::exp(-30.0)), 1e-25);
}

TEST(Histogram, SpecCases)
{
    const auto flat = ediff_histogram(scores_from(std::vector<double>(7, 0.5)));
    ASSERT_EQ(flat.counts.size(), 100u);
    ASSERT_EQ(flat.edges.size(), 101u);
    EXPECT_EQ(std::count_if(flat.counts.begin(), flat.counts.end(), [](auto c) { return c > 0; }), 1);
    EXPECT_EQ(std::accumulate(flat.counts.begin(), flat.counts.end(), std::size_t{0}), 7u);

    const auto two = ediff_histogram(scores_from({0.05, 0.95}), 10);
    EXPECT_EQ(two.counts.front(), 1u);
    EXPECT_EQ(two.counts.back(), 1u);
    EXPECT_EQ(std::accumulate(two.counts.begin(), two.counts.end(), std::size_t{0}), 2u);
    EXPECT_NEAR(two.log_counts.front(), std::log10(2.0), 1e-15);

    const auto empty = ediff_histogram({}, 100);
    EXPECT_TRUE(std::all_of(empty.counts.begin(), empty.counts.end(), [](auto c) { return c == 0; }));
    EXPECT_THROW(ediff_histogram({}, 0), Error);
}

TEST(Skewness, SpecCases)
{
    EXPECT_NEAR(skewness(scores_from({0.3, 0.5, 0.7})), 0.0, 1e-12);
    EXPECT_GT(skewness(scores_from({0, 0, 0, 1})), 0.0);
    const std::vector<double> v{0.1, 0.2, 0.3, 0.9};
    EXPECT_NEAR(skewness(scores_from(v)), oracles::skewness_reference(v), 1e-12);
}

TEST(Skewness, DegenerateIsUndefined)
{
    for (const auto& v : {std::vector<double>{0.5, 0.5, 0.5}, std::vector<double>{0.1, 0.2}}) {
        try {
            skewness(scores_from(v));
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::UndefinedStatistic);
        }
    }
}

TEST(Correlation, SpecCases)
{
    const std::vector<double> a{0.1, 0.4, 0.8};
    const std::vector<double> b{0.2, 0.5, 0.7};
    EXPECT_NEAR(cross_model_correlation(scores_from(a), scores_from(a)), 1.0, 1e-12);
    std::vector<double> inv;
    for (double x : a) {
        inv.push_back(1 - x);
    }
    EXPECT_NEAR(cross_model_correlation(scores_from(a), scores_from(inv)), -1.0, 1e-12);
    const double r = cross_model_correlation(scores_from(a), scores_from(b));
    EXPECT_NEAR(r, oracles::pearson_reference(a, b), 1e-12);
    EXPECT_NEAR(r, 0.98061, 1e-5);
}

TEST(Correlation, Errors)
{
    try {
        cross_model_correlation(scores_from({0.5, 0.5, 0.5}), scores_from({0.1, 0.2, 0.3}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UndefinedStatistic);
    }
    EXPECT_THROW(cross_model_correlation(scores_from({0.1, 0.2}), scores_from({0.1, 0.2, 0.3})), Error);
}

TEST(Frequency, SpecCases)
{
    std::vector<ConceptScore> s(3);
    s[0] = {0, 0.5, 0.0, 12, BlindspotClass::Neutral};
    s[1] = {1, 0.5, 0.4, 0, BlindspotClass::Neutral};
    s[2] = {2, 0.5, -0.4, 5, BlindspotClass::Neutral};
    const auto f = frequency_analysis(s, 0.4);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[0].concept_id, 1u);
    EXPECT_EQ(f[0].frequency, 0u);
    EXPECT_NEAR(f[0].value, 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(f[0].value, 0.7311, 1e-4);
    EXPECT_EQ(f[1].concept_id, 2u);
    EXPECT_NEAR(f[1].value, f[0].value, 1e-15);
    EXPECT_DOUBLE_EQ(f[2].value, 0.5);
    EXPECT_THROW(frequency_analysis(s, 0.0), Error);
}

TEST(Ranking, OrderAndTies)
{
    auto s = scores_from({0.05, 0.02, 0.05, 0.95, 0.5, 0.99});
    for (auto& c : s) {
        c.cls = classify(c.ediff, {});
    }
    EXPECT_EQ(ranking(s, BlindspotClass::Suppressed), (std::vector<std::size_t>{1, 0, 2}));
    EXPECT_EQ(ranking(s, BlindspotClass::Exaggerated), (std::vector<std::size_t>{5, 3}));
    EXPECT_EQ(ranking(s, BlindspotClass::Neutral), (std::vector<std::size_t>{4}));
}

TEST(ConceptsIo, ScoresAndEnergiesRoundTrip)
{
    TempDir dir;
    const auto real = energies_from({{1, 0, 2.5}, {0, 0, 1}});
    const auto gen = energies_from({{0, 3, 2.5}, {0.25, 0, 0}});
    const auto s = energy_difference(real, gen, {});
    save_scores(s, dir.path() / "scores.json");
    EXPECT_EQ(load_scores(dir.path() / "scores.json"), s);
    const auto j = nlohmann::json::parse(read_text(dir.path() / "scores.json"));
    ASSERT_TRUE(j.is_array());
    for (const char* key : {"concept_id", "ediff", "delta", "frequency", "class"}) {
        EXPECT_TRUE(j[0].contains(key)) << key;
    }

    save_energies(real, dir.path() / "e.cbfm");
    const auto back = load_energies(dir.path() / "e.cbfm");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].caption_id, "c1");
    EXPECT_EQ(back[0].energies, real[0].energies);
}

// Properties

TEST(ConceptsProperty, OrderingByEdiffMatchesDeltaAndExp)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + trial % 40;
        std::vector<double> delta(k);
        for (auto& d : delta) {
            d = std::round(n(rng) * 4) / 4; // coarse grid forces ties
        }
        const double t = 0.1 + 0.05 * (trial % 30);
        std::vector<double> ed, ex;
        for (double d : delta) {
            ed.push_back(sigmoid(d / t));
            ex.push_back(std::exp(d));
        }
        const auto by_delta = oracles::argsort_insertion(delta);
        EXPECT_EQ(oracles::argsort_insertion(ed), by_delta);
        EXPECT_EQ(oracles::argsort_insertion(ex), by_delta);
    }
}

TEST(ConceptsProperty, RangeAndPartition)
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> r(6, std::vector<double>(10)), g(9, std::vector<double>(10));
        for (auto& row : r) {
            for (auto& x : row) {
                x = u(rng);
            }
        }
        for (auto& row : g) {
            for (auto& x : row) {
                x = u(rng) * (trial % 3);
            }
        }
        const Thresholds th;
        const auto s = energy_difference(energies_from(r), energies_from(g), th);
        std::size_t total = 0;
        for (auto cls : {BlindspotClass::Suppressed, BlindspotClass::Neutral, BlindspotClass::Exaggerated}) {
            total += ranking(s, cls).size();
        }
        EXPECT_EQ(total, s.size());
        for (const auto& c : s) {
            EXPECT_GT(c.ediff, 0.0);
            EXPECT_LT(c.ediff, 1.0);
            EXPECT_EQ(c.cls == BlindspotClass::Suppressed, c.ediff < th.lambda_min);
            EXPECT_EQ(c.cls == BlindspotClass::Exaggerated, c.ediff > th.lambda_max);
            EXPECT_NEAR(c.ediff, 1.0 / (1.0 + std::exp(-c.delta / th.temperature)), 1e-12);
        }
    }
}

TEST(ConceptsProperty, TranslationLeavesDeltaUnchanged)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> r(5, std::vector<double>(4)), g(7, std::vector<double>(4));
        for (auto* m : {&r, &g}) {
            for (auto& row : *m) {
                for (auto& x : row) {
                    x = u(rng);
                }
            }
        }
        const auto base = energy_difference(energies_from(r), energies_from(g), {});
        const std::size_t k = trial % 4;
        const double c = u(rng) * 5;
        for (auto* m : {&r, &g}) {
            for (auto& row : *m) {
                row[k] += c;
            }
        }
        const auto moved = energy_difference(energies_from(r), energies_from(g), {});
        EXPECT_NEAR(moved[k].delta, base[k].delta, 1e-12);
    }
}

TEST(ConceptsProperty, MeanBoundedByMax)
{
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t t = 1 + trial % 5;
        const auto codes = random_codes(t * 8, 12, rng);
        const auto mean = aggregate_energies(codes, {t, 8}, Aggregation::Mean);
        const auto mx = aggregate_energies(codes, {t, 8}, Aggregation::Max);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t k = 0; k < 12; ++k) {
                EXPECT_LE(mean[i].energies[k], mx[i].energies[k] + 1e-15);
            }
        }
    }
}
