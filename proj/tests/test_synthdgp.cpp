#include <cmath>

#include <gtest/gtest.h>

#include "blindspot/error.hpp"
#include "blindspot/synthdgp/synthdgp.hpp"
#include "blindspot/tensorio/cbfm.hpp"
#include "blindspot/tensorio/manifest.hpp"
#include "test_util.hpp"

using namespace blindspot;
using namespace blindspot::synthdgp;

namespace {

double active_rate(const RowMajorD& z, Eigen::Index k)
{
    return static_cast<double>((z.col(k).array() > 0).count()) / static_cast<double>(z.rows());
}

} // namespace

TEST(DgpSpec, MixingIsOrthonormalAndSeeded)
{
    const auto s = make_spec(8, 16, 0.2, 1.0, {}, 4, 5);
    const Eigen::MatrixXd gram = s.mixing.transpose() * s.mixing;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(make_spec(8, 16, 0.2, 1.0, {}, 4, 5).mixing, s.mixing);
    EXPECT_NE(make_spec(8, 16, 0.2, 1.0, {}, 4, 6).mixing, s.mixing);
}

TEST(DgpSpec, ValidationErrors)
{
    EXPECT_THROW(make_spec(8, 4, 0.2, 1.0, {}, 1, 0), Error);
    EXPECT_THROW(make_spec(8, 16, 1.0, 1.0, {}, 1, 0), Error);
    EXPECT_THROW(make_spec(8, 16, 0.2, 0.0, {}, 1, 0), Error);
    EXPECT_THROW(make_spec(8, 16, 0.2, 1.0, {{9, 2.0}}, 1, 0), Error);
    EXPECT_THROW(make_spec(8, 16, 0.2, 1.0, {{1, -1.0}}, 1, 0), Error);
    auto s = make_spec(4, 6, 0.2, 1.0, {}, 1, 0);
    s.mixing(0, 0) += 0.1;
    try {
        s.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
    }
}

TEST(SampleDataset, NullPlantingMatchesMoments)
{
    const auto s = make_spec(6, 10, 0.3, 2.0, {}, 2, 7);
    const auto nat = sample_dataset(s, 3000, Role::Natural);
    const auto gen = sample_dataset(s, 3000, Role::Generated);
    EXPECT_NE(nat.features, gen.features);
    const double rows = 6000.0;
    for (Eigen::Index k = 0; k < 6; ++k) {
        const double se = std::sqrt(0.3 * 0.7 / rows);
        EXPECT_NEAR(active_rate(nat.activations, k), active_rate(gen.activations, k), 3 * std::sqrt(2.0) * se);
        // Mean energy p * scale; exponential variance scale^2.
        const double mean_sd = std::sqrt((0.3 * 2 * 4.0 - 0.36 * 4.0) / rows);
        EXPECT_NEAR(nat.activations.col(k).mean(), gen.activations.col(k).mean(), 4 * std::sqrt(2.0) * mean_sd);
    }
    EXPECT_TRUE(gen.warnings.empty());
}

TEST(SampleDataset, ZeroMultiplierSilencesConcept)
{
    const auto s = make_spec(4, 8, 0.4, 1.0, {{2, 0.0}}, 3, 1);
    const auto gen = sample_dataset(s, 500, Role::Generated);
    EXPECT_EQ((gen.activations.col(2).array() > 0).count(), 0);
    EXPECT_EQ(gen.warnings.size(), 1u);
    const auto nat = sample_dataset(s, 500, Role::Natural);
    EXPECT_GT((nat.activations.col(2).array() > 0).count(), 0);
}

TEST(SampleDataset, PlantedRatesWithinBinomialError)
{
    const auto s = make_spec(8, 16, 0.2, 1.0, {{2, 0.05}, {5, 4.0}}, 4, 3);
    const auto gen = sample_dataset(s, 2000, Role::Generated);
    const double n = 8000.0;
    EXPECT_NEAR(active_rate(gen.activations, 2), 0.01, 3 * std::sqrt(0.01 * 0.99 / n));
    EXPECT_NEAR(active_rate(gen.activations, 5), 0.8, 3 * std::sqrt(0.8 * 0.2 / n));
    EXPECT_NEAR(active_rate(gen.activations, 0), 0.2, 3 * std::sqrt(0.2 * 0.8 / n));
}

TEST(SampleDataset, ClippingIsWarned)
{
    const auto s = make_spec(3, 3, 0.5, 1.0, {{1, 3.0}}, 1, 0);
    const auto gen = sample_dataset(s, 50, Role::Generated);
    ASSERT_EQ(gen.warnings.size(), 1u);
    EXPECT_NE(gen.warnings[0].find("concept 1"), std::string::npos);
    EXPECT_EQ((gen.activations.col(1).array() > 0).count(), 50);
}

TEST(SampleDataset, FeaturesAreMixedCodesPlusNoise)
{
    const auto s = make_spec(5, 12, 0.3, 1.0, {}, 2, 9);
    const auto d = sample_dataset(s, 200, Role::Natural);
    EXPECT_EQ(d.features.rows(), 400u);
    EXPECT_EQ(d.features.cols(), 12u);
    EXPECT_EQ(d.grouping.tokens_per_image, 2u);
    const RowMajorD resid = d.features.to_double() - d.activations * s.mixing.transpose();
    const double sd = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
    EXPECT_NEAR(sd, 0.01, 0.001);
}

TEST(SampleDataset, Deterministic)
{
    const auto s = make_spec(6, 9, 0.25, 3.0, {{0, 2.0}}, 3, 12);
    for (auto role : {Role::Natural, Role::Generated}) {
        const auto a = sample_dataset(s, 100, role);
        const auto b = sample_dataset(s, 100, role);
        EXPECT_EQ(a.features, b.features);
        EXPECT_EQ(a.activations, b.activations);
    }
    EXPECT_NE(sample_dataset(s, 100, Role::Natural, 1).features, sample_dataset(s, 100, Role::Natural).features);
}

TEST(OracleEdiff, SpecCases)
{
    const auto s = make_spec(3, 3, 0.2, 1.0, {{1, 0.0}, {2, 3.0}}, 1, 0);
    const auto e = oracle_ediff(s, 0.8);
    EXPECT_EQ(e[0], 0.5);
    EXPECT_LT(e[1], 0.5);
    EXPECT_NEAR(oracle_delta(s)[1], -0.2, 1e-15);
    EXPECT_NEAR(oracle_delta(s)[2], 0.4, 1e-15);
    EXPECT_NEAR(e[2], 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
    EXPECT_NEAR(e[2], 0.6225, 1e-4);
}

TEST(MatchConcepts, RecoversPermutedMixing)
{
    const auto s = make_spec(5, 10, 0.2, 1.0, {}, 1, 4);
    RowMajorD atoms(7, 10);
    const std::vector<int> where{3, 0, 6, 1, 4};
    atoms.setZero();
    atoms.row(2).setOnes();
    atoms.row(5).setConstant(-1.0);
    for (int k = 0; k < 5; ++k) {
        atoms.row(where[k]) = 2.5 * s.mixing.col(k).transpose();
    }
    const auto m = match_concepts(atoms, s.mixing);
    for (int k = 0; k < 5; ++k) {
        EXPECT_EQ(m[k], static_cast<std::size_t>(where[k]));
    }
}

TEST(Fixture, WritesLoadableManifest)
{
    TempDir dir;
    const auto s = make_spec(4, 6, 0.3, 1.0, {{0, 0.1}}, 2, 8);
    const auto p = write_fixture(s, 10, dir.path(), "m1");
    const auto man = tensorio::load_manifest(p.manifest);
    EXPECT_EQ(man.entries.size(), 10u);
    EXPECT_EQ(man.tokens_per_image, 2u);
    const auto paired = tensorio::load_paired_features(man, "m1");
    EXPECT_EQ(paired.real, sample_dataset(s, 10, Role::Natural).features);
    EXPECT_EQ(paired.gen, sample_dataset(s, 10, Role::Generated).features);
    EXPECT_EQ(paired.caption_ids.front(), "img000000");
}

TEST(DgpSpecIo, RoundTrip)
{
    TempDir dir;
    const auto s = make_spec(4, 6, 0.3, 1.5, {{0, 0.1}, {3, 2.0}}, 2, 8);
    save_spec(s, dir.path() / "spec.json");
    const auto back = load_spec(dir.path() / "spec.json");
    EXPECT_EQ(back.mixing, s.mixing);
    EXPECT_EQ(back.planted, s.planted);
    EXPECT_EQ(back.base_rates, s.base_rates);

    write_bytes(dir.path() / "short.json", R"({"concepts": 3, "dim": 5, "base_rates": 0.1, "magnitudes": 2})");
    const auto scalar = load_spec(dir.path() / "short.json");
    EXPECT_EQ(scalar.base_rates, std::vector<double>(3, 0.1));
    write_bytes(dir.path() / "bad.json", "{");
    EXPECT_THROW(load_spec(dir.path() / "bad.json"), Error);
}

// Properties

TEST(SynthProperty, EmpiricalDeltaConvergesToOracle)
{
    const auto s = make_spec(6, 8, 0.2, 2.0, {{1, 0.1}, {4, 3.0}}, 2, 21);
    const auto oracle = oracle_delta(s);
    for (std::size_t n : {500u, 2000u, 8000u}) {
        const auto nat = sample_dataset(s, n, Role::Natural);
        const auto gen = sample_dataset(s, n, Role::Generated);
        const double rows = static_cast<double>(n * 2);
        for (Eigen::Index k = 0; k < 6; ++k) {
            auto var = [&](double p) { return (2.0 * p - p * p) * 4.0; }; // E z^2 = 2 p scale^2
            const double se = std::sqrt((var(s.base_rates[k]) + var(s.effective_rate(k))) / rows);
            const double emp = gen.activations.col(k).mean() - nat.activations.col(k).mean();
            EXPECT_NEAR(emp, oracle[k], 3.5 * se) << "n=" << n << " k=" << k;
        }
    }
}
