#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "blindspot/error.hpp"
#include "blindspot/rasae/anchors.hpp"
#include "blindspot/rasae/optim.hpp"
#include "blindspot/rasae/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace blindspot;
using namespace blindspot::rasae;

namespace {

RowMajorD random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    RowMajorD m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = u(rng);
    }
    return m;
}

SaeModel identity_padded_model()
{
    SaeConfig cfg;
    cfg.input_dim = 4;
    cfg.n_concepts = 6;
    cfg.top_k = 2;
    cfg.archetypal = false;
    SaeModel m = initialize(cfg, {});
    m.encoder_weight = RowMajorD::Zero(6, 4);
    m.encoder_weight.topRows(4).setIdentity();
    m.encoder_bias.setZero();
    return m;
}

} // namespace

TEST(Encode, KeepsTwoLargestOfIdentityPaddedEncoder)
{
    const auto model = identity_padded_model();
    RowMajorD x(1, 4);
    x << 3, 1, 2, 0.5;
    const auto codes = encode(x, model);

    // Brute force: every pre-activation, sorted.
    const RowMajorD pre = x * model.encoder_weight.transpose();
    std::vector<int> idx(6);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return pre(0, a) > pre(0, b); });
    const std::set<std::uint32_t> expected{static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[1])};

    ASSERT_EQ(codes.row(0).size(), 2U);
    std::set<std::uint32_t> got;
    for (const auto& e : codes.row(0)) {
        got.insert(e.index);
    }
    EXPECT_EQ(got, expected);
    EXPECT_EQ(got, (std::set<std::uint32_t>{0, 2}));
}

TEST(Encode, ZeroRowWithZeroBiasIsEmpty)
{
    const auto model = identity_padded_model();
    const RowMajorD x = RowMajorD::Zero(1, 4);
    EXPECT_EQ(encode(x, model).row(0).size(), 0U);
}

TEST(Encode, FullKEqualsRectifiedPreActivation)
{
    SaeConfig cfg;
    cfg.input_dim = 5;
    cfg.n_concepts = 7;
    cfg.top_k = 7;
    cfg.archetypal = false;
    cfg.seed = 4;
    auto model = initialize(cfg, {});
    model.encoder_bias = Eigen::VectorXd::LinSpaced(7, -0.3, 0.3);
    const RowMajorD x = random_matrix(20, 5, 9);
    const RowMajorD expected = pre_activations(model, x).cwiseMax(0.0);
    EXPECT_LT((encode(x, model).to_dense() - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Encode, DimensionMismatchIsShapeError)
{
    const auto model = identity_padded_model();
    const RowMajorD x = RowMajorD::Zero(2, 3);
    try {
        encode(x, model);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Shape);
    }
}

TEST(EncodeProperty, RowsAreSparseAndPositive)
{
    SaeConfig cfg;
    cfg.input_dim = 12;
    cfg.n_concepts = 40;
    cfg.top_k = 3;
    cfg.archetypal = false;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cfg.seed = seed;
        auto model = initialize(cfg, {});
        model.encoder_bias = Eigen::VectorXd::Constant(40, -0.05);
        const auto codes = encode(random_matrix(64, 12, seed + 100), model);
        for (std::size_t r = 0; r < codes.rows(); ++r) {
            ASSERT_LE(codes.row(r).size(), 3U);
            for (const auto& e : codes.row(r)) {
                ASSERT_GT(e.activation, 0.0);
            }
        }
    }
}

TEST(TopK, TiesPreferLowerIndex)
{
    const std::vector<double> v{1.0, 2.0, 2.0, 0.0, 2.0};
    EXPECT_EQ(top_k_positive(v, 2), (std::vector<std::uint32_t>{1, 2}));
    EXPECT_TRUE(top_k_positive(std::vector<double>{-1.0, 0.0}, 2).empty());
}

TEST(Decode, OneHotReturnsAtom)
{
    Dictionary dict;
    dict.atoms = random_matrix(5, 8, 3);
    SparseCodeMatrix codes(5);
    const std::vector<CodeEntry> row{{3, 1.0}};
    codes.push_row(row);
    const auto out = decode(codes, dict);
    EXPECT_EQ(out.row(0), dict.atoms.row(3));
}

TEST(Decode, EmptyRowIsZero)
{
    Dictionary dict;
    dict.atoms = random_matrix(5, 8, 3);
    SparseCodeMatrix codes(5);
    codes.push_row({});
    EXPECT_EQ(decode(codes, dict).norm(), 0.0);
}

TEST(Decode, MatchesDenseMatmulOracle)
{
    Dictionary dict;
    dict.atoms = random_matrix(5, 8, 21);
    RowMajorD dense = random_matrix(10, 5, 22, -0.5, 1.0).cwiseMax(0.0);
    const auto codes = SparseCodeMatrix::from_dense(dense);
    const RowMajorD oracle = dense * dict.atoms;
    EXPECT_LT((decode(codes, dict) - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decode, OutOfRangeIndexIsCorruption)
{
    SparseCodeMatrix codes(5);
    const std::vector<CodeEntry> bad{{5, 1.0}};
    try {
        codes.push_row(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Corruption);
    }
    Dictionary small;
    small.atoms = random_matrix(4, 2, 1);
    EXPECT_THROW(decode(SparseCodeMatrix(5), small), Error);
}

TEST(SparseCodes, SaveLoadRoundTrip)
{
    TempDir dir;
    const auto codes = SparseCodeMatrix::from_dense(random_matrix(9, 6, 5).cwiseMax(0.0));
    codes.save(dir.path() / "c.bin");
    EXPECT_EQ(SparseCodeMatrix::load(dir.path() / "c.bin"), codes);
}

// Gradient check on the fixed-mask loss: 6x4 data, K'=8, k=2.
class GradientCheck : public ::testing::Test {
protected:
    void SetUp() override
    {
        cfg.input_dim = 4;
        cfg.n_concepts = 8;
        cfg.top_k = 2;
        cfg.archetypal = true;
        cfg.anchors = 5;
        cfg.aux_lambda = 0.3;
        cfg.aux_k = 2;
        cfg.relaxation_bound = 0.5;
        cfg.seed = 17;
        batch = random_matrix(6, 4, 31, 0.0, 1.0);
        model = initialize(cfg, random_matrix(5, 4, 32, 0.0, 1.0));
        model.w_logits = random_matrix(8, 5, 33);
        model.relaxation = random_matrix(8, 4, 34, -0.1, 0.1);
        model.encoder_weight = random_matrix(8, 4, 35, 0.0, 1.0);
        model.encoder_bias = Eigen::VectorXd::LinSpaced(8, 0.05, 0.2);
        std::vector<bool> dead(8, false);
        dead[5] = dead[6] = dead[7] = true;
        selection = select_latents(model, batch, dead);
    }

    double loss_with(const SaeModel& m) const { return evaluate_loss(m, batch, selection, nullptr).total(); }

    SaeConfig cfg;
    RowMajorD batch;
    SaeModel model;
    Selection selection;
};

TEST_F(GradientCheck, SelectionExercisesAuxPath)
{
    std::size_t aux = 0;
    for (const auto& r : selection.aux) {
        aux += r.size();
    }
    EXPECT_GT(aux, 0U);
}

TEST_F(GradientCheck, AnalyticMatchesCentralDifferences)
{
    Gradients g;
    evaluate_loss(model, batch, selection, &g);

    auto check = [&](RowMajorD SaeModel::*member, const RowMajorD& analytic) {
        const RowMajorD& base = model.*member;
        auto f = [&](const Eigen::VectorXd& v) {
            SaeModel m = model;
            m.*member = Eigen::Map<const RowMajorD>(v.data(), base.rows(), base.cols());
            return loss_with(m);
        };
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(base.data(), base.size());
        const Eigen::VectorXd fd = oracles::central_difference(f, x, 1e-6);
        const Eigen::VectorXd an = Eigen::Map<const Eigen::VectorXd>(analytic.data(), analytic.size());
        return oracles::relative_error(an, fd);
    };
    EXPECT_LT(check(&SaeModel::encoder_weight, g.encoder_weight), 1e-4);
    EXPECT_LT(check(&SaeModel::w_logits, g.w_logits), 1e-4);
    EXPECT_LT(check(&SaeModel::relaxation, g.relaxation), 1e-4);

    auto fb = [&](const Eigen::VectorXd& v) {
        SaeModel m = model;
        m.encoder_bias = v;
        return loss_with(m);
    };
    EXPECT_LT(oracles::relative_error(g.encoder_bias, oracles::central_difference(fb, model.encoder_bias, 1e-6)),
              1e-4);
}

TEST(GradientCheckFree, FreeAtomsMatchCentralDifferences)
{
    SaeConfig cfg;
    cfg.input_dim = 4;
    cfg.n_concepts = 8;
    cfg.top_k = 2;
    cfg.archetypal = false;
    cfg.seed = 2;
    const RowMajorD batch = random_matrix(6, 4, 41, 0.0, 1.0);
    auto model = initialize(cfg, {});
    model.encoder_weight = random_matrix(8, 4, 42, 0.0, 1.0);
    const auto sel = select_latents(model, batch, std::vector<bool>(8, false));
    Gradients g;
    evaluate_loss(model, batch, sel, &g);
    auto f = [&](const Eigen::VectorXd& v) {
        SaeModel m = model;
        m.free_atoms = Eigen::Map<const RowMajorD>(v.data(), 8, 4);
        return evaluate_loss(m, batch, sel, nullptr).total();
    };
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(model.free_atoms.data(), 32);
    const Eigen::VectorXd an = Eigen::Map<const Eigen::VectorXd>(g.free_atoms.data(), 32);
    EXPECT_LT(oracles::relative_error(an, oracles::central_difference(f, x, 1e-6)), 1e-4);
}

TEST(Schedule, WarmupEndReachesPeak)
{
    const WarmupCosineSchedule s(5e-4, 1e-6, 0.05, 1000);
    ASSERT_EQ(s.warmup_steps(), 50U);
    EXPECT_NEAR(s.at(50), 5e-4, 1e-12);
    EXPECT_NEAR(s.at(49), 5e-4, 1e-12);
    EXPECT_LT(s.at(0), s.at(10));
    EXPECT_NEAR(s.at(999), 1e-6, 1e-12);
    for (std::size_t t = 50; t + 1 < 1000; ++t) {
        ASSERT_GE(s.at(t), s.at(t + 1));
    }
}

TEST(Schedule, NoWarmupStartsAtPeak)
{
    const WarmupCosineSchedule s(1e-3, 1e-5, 0.0, 10);
    EXPECT_NEAR(s.at(0), 1e-3, 1e-12);
}

TEST(AdamW, FirstStepMovesBySignTimesLr)
{
    AdamWState st;
    Eigen::ArrayXd p(2);
    p << 1.0, -1.0;
    Eigen::ArrayXd g(2);
    g << 0.5, -2.0;
    st.update(p, g, 0.1, 1, AdamWParams{0.9, 0.999, 0.0, 0.0});
    EXPECT_NEAR(p(0), 0.9, 1e-12);
    EXPECT_NEAR(p(1), -0.9, 1e-12);
}

TEST(Anchors, RandomWithAllRowsIsPermutation)
{
    const RowMajorD data = random_matrix(12, 3, 7);
    const RowMajorD a = fit_anchors(data, 12, AnchorStrategy::Random, 5);
    std::vector<bool> used(12, false);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        bool found = false;
        for (Eigen::Index r = 0; r < 12; ++r) {
            if (!used[static_cast<std::size_t>(r)] && a.row(i) == data.row(r)) {
                used[static_cast<std::size_t>(r)] = true;
                found = true;
                break;
            }
        }
        ASSERT_TRUE(found);
    }
}

TEST(Anchors, RandomTooManyIsArgumentError)
{
    try {
        fit_anchors(random_matrix(3, 2, 1), 4, AnchorStrategy::Random, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Argument);
    }
}

TEST(Anchors, KMeansFindsTwoBlobs)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.5);
    RowMajorD data(400, 3);
    RowMajorD truth = RowMajorD::Zero(2, 3);
    for (Eigen::Index r = 0; r < 400; ++r) {
        const double c = r < 200 ? -5.0 : 5.0;
        for (Eigen::Index k = 0; k < 3; ++k) {
            data(r, k) = c + g(rng);
        }
        truth.row(r < 200 ? 0 : 1) += data.row(r) / 200.0;
    }
    RowMajorD centroids = fit_anchors(data, 2, AnchorStrategy::KMeans, 9);
    if (centroids(0, 0) > centroids(1, 0)) {
        centroids.row(0).swap(centroids.row(1));
    }
    EXPECT_LT((centroids - truth).cwiseAbs().maxCoeff(), 0.1);
    EXPECT_LT((truth.row(0) - RowMajorD::Constant(1, 3, -5.0)).cwiseAbs().maxCoeff(), 0.2);
}

TEST(Anchors, SingleCentroidIsMean)
{
    const RowMajorD data = random_matrix(50, 4, 8);
    const RowMajorD c = fit_anchors(data, 1, AnchorStrategy::KMeans, 1);
    EXPECT_LT((c.row(0) - data.colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Anchors, Deterministic)
{
    const RowMajorD data = random_matrix(100, 4, 8);
    EXPECT_EQ(fit_anchors(data, 7, AnchorStrategy::KMeans, 3), fit_anchors(data, 7, AnchorStrategy::KMeans, 3));
}

namespace {

SaeConfig small_config()
{
    SaeConfig cfg;
    cfg.input_dim = 8;
    cfg.n_concepts = 16;
    cfg.top_k = 3;
    cfg.anchors = 32;
    cfg.epochs = 3;
    cfg.batch_size = 64;
    cfg.lr_max = 1e-2;
    cfg.seed = 5;
    cfg.dead_steps_threshold = 4;
    cfg.aux_k = 4;
    cfg.aux_lambda = 1e-2;
    return cfg;
}

} // namespace

TEST(Train, ZeroEpochsReturnsUntrainedState)
{
    auto cfg = small_config();
    cfg.epochs = 0;
    const auto inst = oracles::sparse_instance(16, 8, 2, 256, 1);
    const auto res = train(inst.data, cfg);
    EXPECT_TRUE(res.report.epochs.empty());
    EXPECT_TRUE(res.report.loss_curve.empty());
    EXPECT_EQ(res.model.n_concepts(), 16U);
}

TEST(Train, ArchetypalWeightsStayStochasticAndInHull)
{
    auto cfg = small_config();
    const auto inst = oracles::sparse_instance(16, 8, 2, 512, 2);
    const auto res = train(inst.data, cfg);
    const auto dict = res.model.dictionary();
    const auto& w = dict.archetypal->weights;
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LT((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
    // Lambda = 0: every archetype is exactly a convex combination of anchors.
    EXPECT_LT((dict.archetypes() - w * dict.archetypal->anchors).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_NO_THROW(dict.check_invariants(cfg.relaxation_bound));
    for (Eigen::Index j = 0; j < dict.atoms.rows(); ++j) {
        EXPECT_NEAR(dict.atoms.row(j).norm(), 1.0, 1e-12);
    }
    for (const auto& e : res.report.epochs) {
        EXPECT_GE(e.mse, 0.0);
        EXPECT_LE(e.dead_latents, 16U);
    }
}

TEST(Train, RelaxationStaysWithinBound)
{
    auto cfg = small_config();
    cfg.relaxation_bound = 0.05;
    const auto inst = oracles::sparse_instance(16, 8, 2, 512, 2);
    const auto res = train(inst.data, cfg);
    EXPECT_LE(res.model.relaxation.rowwise().norm().maxCoeff(), 0.05 + 1e-12);
    EXPECT_GT(res.model.relaxation.norm(), 0.0);
    EXPECT_NO_THROW(res.model.dictionary().check_invariants(cfg.relaxation_bound));
}

TEST(Train, FreeDictionaryAtomsStayUnitNorm)
{
    auto cfg = small_config();
    cfg.archetypal = false;
    const auto inst = oracles::sparse_instance(16, 8, 2, 512, 2);
    const auto res = train(inst.data, cfg);
    for (Eigen::Index j = 0; j < res.model.free_atoms.rows(); ++j) {
        EXPECT_NEAR(res.model.free_atoms.row(j).norm(), 1.0, 1e-12);
    }
}

TEST(Train, DeterministicGivenSeed)
{
    const auto cfg = small_config();
    const auto inst = oracles::sparse_instance(16, 8, 2, 512, 3);
    const auto a = train(inst.data, cfg);
    const auto b = train(inst.data, cfg);
    EXPECT_EQ(a.model.dictionary().atoms, b.model.dictionary().atoms);
    EXPECT_EQ(a.model.encoder_weight, b.model.encoder_weight);
    EXPECT_EQ(a.report.loss_curve, b.report.loss_curve);
}

TEST(Train, DivergenceIsNumericError)
{
    auto cfg = small_config();
    RowMajorD data = RowMajorD::Constant(128, 8, 1e200);
    try {
        train(data, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Numeric);
        EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
    }
}

TEST(Train, TooFewRowsIsValidationError)
{
    auto cfg = small_config();
    const auto inst = oracles::sparse_instance(16, 8, 2, 10, 3);
    EXPECT_THROW(train(inst.data, cfg), Error);
}

TEST(Train, LargerKDoesNotIncreaseMse)
{
    auto cfg = small_config();
    cfg.epochs = 5;
    const auto inst = oracles::sparse_instance(16, 8, 3, 1024, 4);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t k : {1, 2, 3, 4, 6}) {
        cfg.top_k = k;
        const auto res = train(inst.data, cfg);
        const double mse = res.report.epochs.back().mse;
        EXPECT_LE(mse, previous * 1.05) << "k=" << k;
        previous = mse;
    }
}

TEST(Train, DeadLatentsTriggerAuxLoss)
{
    auto cfg = small_config();
    cfg.n_concepts = 32;
    cfg.top_k = 1;
    cfg.epochs = 4;
    const auto inst = oracles::sparse_instance(4, 8, 1, 512, 4);
    const auto res = train(inst.data, cfg);
    // Only a few directions exist, so most latents go dead and the aux term becomes nonzero.
    EXPECT_GT(res.report.epochs.back().dead_latents, 0U);
}

TEST(SaeState, SaveLoadPreservesEncoding)
{
    TempDir dir;
    auto cfg = small_config();
    const auto inst = oracles::sparse_instance(16, 8, 2, 256, 6);
    const auto res = train(inst.data, cfg);
    res.model.save(dir.path() / "sae.bin");
    const auto back = SaeModel::load(dir.path() / "sae.bin");
    EXPECT_EQ(back.encoder_weight, res.model.encoder_weight);
    EXPECT_EQ(back.dictionary().atoms, res.model.dictionary().atoms);
    EXPECT_EQ(encode(inst.data, back), encode(inst.data, res.model));
}
