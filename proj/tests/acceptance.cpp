// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/cooccur/cooccur.hpp"
#include "blindspot/pipeline/pipeline.hpp"
#include "blindspot/rasae/model.hpp"
#include "blindspot/rasae/trainer.hpp"
#include "blindspot/synthdgp/synthdgp.hpp"
#include "blindspot/tensorio/cbfm.hpp"
#include "blindspot/theory/theory.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace blindspot;
using tensorio::RowMajorD;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFlagshipMinutes = 10.0;
constexpr std::size_t kFlagshipMinPerSide = 4;
constexpr double kMinFve = 0.9;
constexpr double kStochasticTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kFidIsometryTol = 1e-6;
constexpr double kFidOneDimTol = 1e-8;
constexpr double kSpotBoundRelTol = 1e-12;
constexpr double kCooccurTol = 1e-6;
constexpr double kSimilarityTol = 1e-9;
constexpr double kEdiffSpot = 0.77730;
constexpr double kEdiffTol = 1e-5;
constexpr double kSkewTol = 1e-12;

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail)
{
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void criterion(const std::string& name, const std::function<bool(std::ostringstream&)>& body)
{
    std::ostringstream detail;
    bool pass = false;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail << "exception: " << e.what();
    }
    report(name, pass, detail.str());
}

RowMajorD gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    RowMajorD m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

RowMajorD correlated(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng, double shift)
{
    RowMajorD x = gaussian(n, d, rng) * gaussian(d, d, rng);
    x.array() += shift;
    return x;
}

bool flagship(std::ostringstream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::size_t, double> planted;
    const std::vector<std::size_t> suppressed{0, 7, 14, 21, 28};
    const std::vector<std::size_t> exaggerated{3, 10, 17, 24, 31};
    for (auto k : suppressed) planted[k] = 0.05;
    for (auto k : exaggerated) planted[k] = 10.0;
    const auto spec = synthdgp::make_spec(64, 256, 0.05, 80.0, planted, 4, 1);

    TempDir dir;
    synthdgp::write_fixture(spec, 4000, dir.path() / "data");
    pipeline::RunConfig cfg;
    cfg.manifest = dir.path() / "data" / "manifest.json";
    cfg.out_dir = dir.path() / "out";
    cfg.seed = 1;
    cfg.sae.n_concepts = 128;
    cfg.sae.top_k = 5;
    cfg.sae.epochs = 10;
    cfg.sae.batch_size = 64;
    cfg.sae.lr_max = 5e-3;
    cfg.sae.relaxation_bound = 0.5;
    pipeline::run_pipeline(cfg);

    const auto dict = rasae::SaeModel::load(cfg.out_dir / pipeline::artifact::kSae).dictionary();
    const auto scores = concepts::load_scores(cfg.out_dir / pipeline::artifact::kScores);
    const auto match = synthdgp::match_concepts(dict.atoms, spec.mixing);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    std::size_t sup_ok = 0, exa_ok = 0, side_ok = 0;
    for (auto k : suppressed) {
        const auto& s = scores[match[k]];
        sup_ok += s.cls == concepts::BlindspotClass::Suppressed;
        side_ok += s.ediff < 0.5;
    }
    for (auto k : exaggerated) {
        const auto& s = scores[match[k]];
        exa_ok += s.cls == concepts::BlindspotClass::Exaggerated;
        side_ok += s.ediff > 0.5;
    }
    out << "suppressed " << sup_ok << "/5, exaggerated " << exa_ok << "/5, correct side " << side_ok
        << "/10, runtime " << minutes << " min";
    return sup_ok >= kFlagshipMinPerSide && exa_ok >= kFlagshipMinPerSide && side_ok == 10 &&
           minutes < kFlagshipMinutes;
}

bool sae_recovery(std::ostringstream& out)
{
    const auto inst = oracles::sparse_instance(32, 16, 3, 20000, 21);
    rasae::SaeConfig cfg;
    cfg.input_dim = 16;
    cfg.n_concepts = 32;
    cfg.top_k = 5;
    cfg.epochs = 20;
    cfg.lr_max = 1e-2;
    cfg.relaxation_bound = 0.5;
    cfg.seed = 3;
    const RowMajorD data = inst.data;
    const auto res = rasae::train(data, cfg);
    const auto dict = res.model.dictionary();
    const auto codes = rasae::encode(data, res.model);
    const double fve = rasae::fraction_variance_explained(data, rasae::decode(codes, dict));
    const double w_err = (dict.archetypal->weights.rowwise().sum().array() - 1.0).abs().maxCoeff();
    out << "FVE " << fve << ", max row nonzeros " << codes.max_row_nonzeros() << " (k=" << cfg.top_k
        << "), max |sum W - 1| " << w_err;
    return fve > kMinFve && codes.max_row_nonzeros() <= cfg.top_k && w_err <= kStochasticTol &&
           dict.archetypal->weights.minCoeff() >= 0.0;
}

bool gradient_check(std::ostringstream& out)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uniform = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
        RowMajorD m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * u(rng);
        return m;
    };
    rasae::SaeConfig cfg;
    cfg.input_dim = 4;
    cfg.n_concepts = 8;
    cfg.top_k = 2;
    cfg.anchors = 5;
    cfg.aux_lambda = 0.3;
    cfg.aux_k = 2;
    cfg.relaxation_bound = 0.5;
    const RowMajorD batch = uniform(6, 4, 0.0, 1.0);
    auto model = rasae::initialize(cfg, uniform(5, 4, 0.0, 1.0));
    model.w_logits = uniform(8, 5, -1.0, 1.0);
    model.relaxation = uniform(8, 4, -0.1, 0.1);
    model.encoder_weight = uniform(8, 4, 0.0, 1.0);
    model.encoder_bias = Eigen::VectorXd::LinSpaced(8, 0.05, 0.2);
    std::vector<bool> dead(8, false);
    dead[5] = dead[6] = dead[7] = true;
    const auto sel = rasae::select_latents(model, batch, dead);
    rasae::Gradients g;
    rasae::evaluate_loss(model, batch, sel, &g);

    auto check = [&](RowMajorD rasae::SaeModel::*member, const RowMajorD& analytic) {
        const RowMajorD& base = model.*member;
        auto f = [&](const Eigen::VectorXd& v) {
            auto m = model;
            m.*member = Eigen::Map<const RowMajorD>(v.data(), base.rows(), base.cols());
            return rasae::evaluate_loss(m, batch, sel, nullptr).total();
        };
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(base.data(), base.size());
        const Eigen::VectorXd an = Eigen::Map<const Eigen::VectorXd>(analytic.data(), analytic.size());
        return oracles::relative_error(an, oracles::central_difference(f, x, 1e-6));
    };
    auto fb = [&](const Eigen::VectorXd& v) {
        auto m = model;
        m.encoder_bias = v;
        return rasae::evaluate_loss(m, batch, sel, nullptr).total();
    };
    const double errs[] = {check(&rasae::SaeModel::encoder_weight, g.encoder_weight),
                           check(&rasae::SaeModel::w_logits, g.w_logits),
                           check(&rasae::SaeModel::relaxation, g.relaxation),
                           oracles::relative_error(g.encoder_bias,
                                                   oracles::central_difference(fb, model.encoder_bias, 1e-6))};
    double worst = 0.0;
    for (double e : errs) worst = std::max(worst, e);
    out << "max relative error " << worst;
    return worst < kGradTol;
}

bool theorem_monotonicity(std::ostringstream& out)
{
    std::mt19937_64 rng(46);
    std::normal_distribution<double> g(0.0, 4.0);
    std::size_t agree = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> d(2 + t % 60);
        for (auto& x : d) x = std::round(g(rng) * 4) / 4;
        std::vector<double> e;
        for (double x : d) e.push_back(concepts::sigmoid(x / 0.8));
        agree += oracles::argsort_insertion(e) == oracles::argsort_insertion(d) && theory::monotonicity_check(d);
    }
    out << agree << "/1000 argsort orders identical";
    return agree == 1000;
}

bool theorem_concentration(std::ostringstream& out)
{
    const theory::SamplerSpec real{theory::SamplerSpec::Kind::TwoPoint, 0.0, 1.0, 0.3};
    const theory::SamplerSpec gen{theory::SamplerSpec::Kind::TwoPoint, 0.0, 1.0, 0.6};
    const auto r = theory::mcdiarmid_empirical(real, gen, 10000, 0.02, 1000, 13);
    const double spot = theory::mcdiarmid_bound(10000, 0.01, 0.0, 1.0);
    const double spot_rel = std::abs(spot / (2.0 * std::exp(-32.0)) - 1.0);
    const std::size_t violations = static_cast<std::size_t>(std::llround(r.empirical_violation_rate * 1000));
    out << violations << " violations in " << r.trials << " trials, bound " << r.bound << ", spot bound " << spot
        << " (2e^-32 rel err " << spot_rel << ")";
    return violations == 0 && r.trials == 1000 && spot_rel <= kSpotBoundRelTol;
}

bool theorem_fid(std::ostringstream& out)
{
    std::mt19937_64 rng(47);
    double worst_iso = 0.0;
    for (int t = 0; t < 50; ++t) {
        const auto a = correlated(80, 4, rng, 0.0);
        const auto b = correlated(80, 4, rng, 0.5);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(gaussian(5 + t % 20, 4, rng)));
        const RowMajorD q = qr.householderQ() * Eigen::MatrixXd::Identity(5 + t % 20, 4);
        const auto rep = theory::fid_sandwich_check(a, b, q);
        worst_iso = std::max(worst_iso, std::abs(rep.fid_embedded - rep.fid_ambient) / std::max(rep.fid_ambient, 1e-300));
    }
    std::size_t sandwich_ok = 0;
    for (int t = 0; t < 100; ++t)
        sandwich_ok += theory::fid_sandwich_check(correlated(60, 4, rng, 0.0), correlated(60, 4, rng, 0.3),
                                                  gaussian(5 + t % 30, 4, rng))
                           .holds;
    theory::GaussianSummary n0{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
    theory::GaussianSummary n1{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1)};
    const double one_d = theory::gaussian_fid(n0, n1);
    out << "isometry worst rel err " << worst_iso << ", sandwich " << sandwich_ok << "/100, 1-D FID " << one_d;
    return worst_iso <= kFidIsometryTol && sandwich_ok == 100 && std::abs(one_d - 1.0) <= kFidOneDimTol;
}

bool cooccurrence(std::ostringstream& out)
{
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0, worst_trace = 0.0, min_eig = 0.0, worst_sim = 0.0;
    for (int t = 0; t < 50; ++t) {
        rasae::SparseCodeMatrix codes(16);
        for (int r = 0; r < 50; ++r) {
            std::vector<rasae::CodeEntry> row;
            for (std::uint32_t c = 0; c < 16; ++c)
                if (u(rng) < 0.25) row.push_back({c, 0.05 + 2.0 * u(rng)});
            codes.push_row(row);
        }
        const auto dense = codes.to_dense();
        Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(16, 16);
        for (Eigen::Index i = 0; i < 16; ++i)
            for (Eigen::Index j = 0; j < 16; ++j)
                for (Eigen::Index r = 0; r < dense.rows(); ++r) oracle(i, j) += dense(r, i) * dense(r, j);
        const auto c = cooccur::cooccurrence(codes);
        worst = std::max(worst, (c - oracle).cwiseAbs().maxCoeff());
        worst_trace = std::max(worst_trace, std::abs(c.trace() - dense.squaredNorm()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff() / std::max(1.0, es.eigenvalues().maxCoeff()));

        // Perturb the diagonal so the spectrum is simple and eigenvectors are unique up to sign.
        Eigen::MatrixXd nondeg = c;
        for (Eigen::Index i = 0; i < 16; ++i) nondeg(i, i) += 0.37 * static_cast<double>(i + 1);
        const auto e = cooccur::eigenspectrum(nondeg, 16);
        const auto sim = cooccur::eigvec_similarity(e.vectors, cooccur::eigenspectrum(nondeg, 16).vectors, 16);
        worst_sim = std::max(worst_sim, (sim.diagonal().array() - 1.0).abs().maxCoeff());
    }
    out << "max |sparse - dense| " << worst << ", max trace err " << worst_trace << ", min scaled eigenvalue "
        << min_eig << ", max |diag sim - 1| " << worst_sim;
    return worst <= kCooccurTol && worst_trace <= kCooccurTol && min_eig >= -kCooccurTol && worst_sim <= kSimilarityTol;
}

bool determinism(std::ostringstream& out)
{
    TempDir dir;
    const auto spec = synthdgp::make_spec(16, 32, 0.2, 20.0, {{2, 0.05}, {9, 4.0}}, 2, 5);
    synthdgp::write_fixture(spec, 300, dir.path() / "data");
    auto run_into = [&](const char* name) {
        pipeline::RunConfig cfg;
        cfg.manifest = dir.path() / "data" / "manifest.json";
        cfg.out_dir = dir.path() / name;
        cfg.seed = 11;
        cfg.sae.n_concepts = 32;
        cfg.sae.top_k = 3;
        cfg.sae.epochs = 4;
        cfg.sae.batch_size = 64;
        cfg.sae.lr_max = 5e-3;
        cfg.cooccur_top = 16;
        pipeline::run_pipeline(cfg);
        std::map<std::string, std::string> files;
        for (const auto& e : fs::directory_iterator(cfg.out_dir))
            if (e.path().filename() != pipeline::artifact::kRunManifest)
                files[e.path().filename().string()] = read_text(e.path());
        return files;
    };
    const auto a = run_into("a");
    const auto b = run_into("b");
    std::size_t same = 0;
    for (const auto& [name, bytes] : a) same += b.count(name) && b.at(name) == bytes;
    out << same << "/" << a.size() << " artifacts bitwise identical";
    return same == a.size() && a.size() == b.size() && a.size() >= 17;
}

bool cbfm_round_trip(std::ostringstream& out)
{
    TempDir dir;
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> dim(0, 16);
    std::uniform_int_distribution<std::uint32_t> bits;
    const auto path = dir.path() / "m.cbfm";
    std::size_t ok = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto rows = dim(rng);
        const auto cols = rows == 0 ? 0 : dim(rng) + 1;
        std::vector<float> data(rows * cols);
        for (auto& v : data) {
            float f = 0;
            do {
                const auto b = bits(rng);
                std::memcpy(&f, &b, 4);
            } while (!std::isfinite(f));
            v = f;
        }
        tensorio::write_feature_matrix(tensorio::FeatureMatrix(rows, cols, data), path);
        const auto back = tensorio::read_feature_matrix(path);
        ok += back.rows() == rows && back.cols() == cols &&
              std::memcmp(back.data().data(), data.data(), data.size() * 4) == 0;
    }
    out << ok << "/1000 matrices round-tripped bit-exactly";
    return ok == 1000;
}

bool statistics(std::ostringstream& out)
{
    const double e = concepts::sigmoid(1.0 / 0.8);
    const double oracle = 1.0 / (1.0 + std::exp(-1.25));
    const double half = concepts::sigmoid(0.0);
    const std::vector<double> triple{-1.5, 0.0, 1.5};
    const double skew = concepts::skewness(triple);
    out << "ediff(1, 0.8) " << e << ", sigmoid(0) " << half << ", skewness " << skew;
    return std::abs(e - kEdiffSpot) <= kEdiffTol && std::abs(e - oracle) <= 1e-15 && half == 0.5 && std::abs(skew) <= kSkewTol;
}

} // namespace

int main()
{
    criterion("planted-blindspot recovery", flagship);
    criterion("sae recovery", sae_recovery);
    criterion("gradient check", gradient_check);
    criterion("theorem: monotonicity", theorem_monotonicity);
    criterion("theorem: concentration bound", theorem_concentration);
    criterion("theorem: fid isometry and sandwich", theorem_fid);
    criterion("co-occurrence", cooccurrence);
    criterion("determinism", determinism);
    criterion("cbfm round-trip", cbfm_round_trip);
    criterion("statistics spot values", statistics);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
