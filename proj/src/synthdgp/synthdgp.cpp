#include "blindspot/synthdgp/synthdgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <Eigen/QR>

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/error.hpp"
#include "blindspot/rng.hpp"
#include "blindspot/tensorio/cbfm.hpp"
#include "blindspot/tensorio/manifest.hpp"

namespace blindspot::synthdgp {

void DgpSpec::validate() const
{
    if (concepts < 1 || dim < concepts) {
        throw Error(ErrorKind::Validation, "spec needs 1 <= K <= d (K=" + std::to_string(concepts) +
                                               ", d=" + std::to_string(dim) + ")");
    }
    if (base_rates.size() != concepts || magnitudes.size() != concepts) {
        throw Error(ErrorKind::Validation, "base_rates and magnitudes must have K entries");
    }
    for (std::size_t k = 0; k < concepts; ++k) {
        if (!(base_rates[k] > 0.0 && base_rates[k] < 1.0)) {
            throw Error(ErrorKind::Validation, "base rate of concept " + std::to_string(k) + " outside (0, 1)");
        }
        if (!(magnitudes[k] > 0.0) || !std::isfinite(magnitudes[k])) {
            throw Error(ErrorKind::Validation, "magnitude of concept " + std::to_string(k) + " must be > 0");
        }
    }
    for (const auto& [k, m] : planted) {
        if (k >= concepts) {
            throw Error(ErrorKind::Validation, "planted concept " + std::to_string(k) + " out of range");
        }
        if (!(m >= 0.0) || !std::isfinite(m)) {
            throw Error(ErrorKind::Validation, "multiplier of concept " + std::to_string(k) + " must be >= 0");
        }
    }
    if (tokens_per_image < 1) {
        throw Error(ErrorKind::Validation, "tokens_per_image must be >= 1");
    }
    if (!(noise_sigma >= 0.0)) {
        throw Error(ErrorKind::Validation, "noise_sigma must be >= 0");
    }
    if (mixing.rows() != static_cast<Eigen::Index>(dim) || mixing.cols() != static_cast<Eigen::Index>(concepts)) {
        throw Error(ErrorKind::Validation, "mixing must be d x K");
    }
    const Eigen::MatrixXd gram = mixing.transpose() * mixing;
    if ((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-8) {
        throw Error(ErrorKind::Validation, "mixing columns are not orthonormal within 1e-8");
    }
}

double DgpSpec::multiplier(std::size_t k) const
{
    const auto it = planted.find(k);
    return it == planted.end() ? 1.0 : it->second;
}

double DgpSpec::effective_rate(std::size_t k) const
{
    return std::min(base_rates[k] * multiplier(k), 1.0);
}

RowMajorD random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    Rng rng = make_rng(seed, "mixing");
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = g(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    // Fix the QR sign ambiguity so the result depends on the seed only.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        if (r(j, j) < 0) {
            q.col(j) = -q.col(j);
        }
    }
    return q;
}

DgpSpec make_spec(std::size_t concepts, std::size_t dim, double base_rate, double magnitude,
                  std::map<std::size_t, double> planted, std::size_t tokens_per_image, std::uint64_t seed)
{
    DgpSpec s;
    s.concepts = concepts;
    s.dim = dim;
    s.base_rates.assign(concepts, base_rate);
    s.magnitudes.assign(concepts, magnitude);
    if (dim >= concepts && concepts > 0) {
        s.mixing = random_orthonormal(dim, concepts, seed);
    }
    s.planted = std::move(planted);
    s.tokens_per_image = tokens_per_image;
    s.seed = seed;
    s.validate();
    return s;
}

std::string_view to_string(Role r) noexcept
{
    return r == Role::Natural ? "natural" : "generated";
}

Role role_from_string(std::string_view s)
{
    if (s == "natural") {
        return Role::Natural;
    }
    if (s == "generated") {
        return Role::Generated;
    }
    throw Error(ErrorKind::Argument, "unknown role '" + std::string(s) + "' (expected natural or generated)");
}

SampledDataset sample_dataset(const DgpSpec& spec, std::size_t n_img, Role role, std::uint64_t draw)
{
    spec.validate();
    const std::size_t k = spec.concepts;
    const std::size_t t = spec.tokens_per_image;
    SampledDataset out;
    std::vector<double> rates(k);
    for (std::size_t c = 0; c < k; ++c) {
        rates[c] = role == Role::Natural ? spec.base_rates[c] : spec.effective_rate(c);
        if (role == Role::Generated && (rates[c] <= 0.0 || rates[c] >= 1.0)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "concept %zu: effective rate %.6g * %.6g clipped to %.6g", c,
                          spec.base_rates[c], spec.multiplier(c), rates[c]);
            out.warnings.emplace_back(buf);
        }
    }

    const std::uint64_t stream = derive_seed(derive_seed(spec.seed, to_string(role)), draw);
    RowMajorD z = RowMajorD::Zero(static_cast<Eigen::Index>(n_img * t), static_cast<Eigen::Index>(k));
    RowMajorD noise(z.rows(), static_cast<Eigen::Index>(spec.dim));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, spec.noise_sigma);
    for (std::size_t img = 0; img < n_img; ++img) {
        Rng rng(derive_seed(stream, img));
        for (std::size_t tok = 0; tok < t; ++tok) {
            const auto row = static_cast<Eigen::Index>(img * t + tok);
            for (std::size_t c = 0; c < k; ++c) {
                if (u(rng) < rates[c]) {
                    std::exponential_distribution<double> e(1.0 / spec.magnitudes[c]);
                    z(row, static_cast<Eigen::Index>(c)) = e(rng);
                }
            }
            for (Eigen::Index j = 0; j < noise.cols(); ++j) {
                noise(row, j) = spec.noise_sigma > 0.0 ? g(rng) : 0.0;
            }
        }
    }
    const RowMajorD x = z * spec.mixing.transpose() + noise;
    out.features = tensorio::FeatureMatrix::from_eigen(x);
    out.grouping = {t, n_img};
    out.activations = std::move(z);
    return out;
}

std::vector<double> oracle_delta(const DgpSpec& spec)
{
    std::vector<double> d(spec.concepts);
    for (std::size_t k = 0; k < spec.concepts; ++k) {
        d[k] = (spec.effective_rate(k) - spec.base_rates[k]) * spec.magnitudes[k];
    }
    return d;
}

std::vector<double> oracle_ediff(const DgpSpec& spec, double temperature)
{
    if (!(temperature > 0.0)) {
        throw Error(ErrorKind::Argument, "temperature must be > 0");
    }
    auto d = oracle_delta(spec);
    for (auto& x : d) {
        x = concepts::sigmoid(x / temperature);
    }
    return d;
}

std::vector<std::size_t> match_concepts(const Eigen::Ref<const RowMajorD>& atoms, const RowMajorD& mixing)
{
    if (atoms.cols() != mixing.rows()) {
        throw Error(ErrorKind::Shape, "atoms and mixing live in different dimensions");
    }
    Eigen::MatrixXd unit = atoms;
    unit.rowwise().normalize();
    const Eigen::MatrixXd cos = unit * mixing; // K' x K
    std::vector<std::size_t> out(static_cast<std::size_t>(mixing.cols()));
    for (Eigen::Index c = 0; c < cos.cols(); ++c) {
        Eigen::Index best = 0;
        cos.col(c).maxCoeff(&best);
        out[static_cast<std::size_t>(c)] = static_cast<std::size_t>(best);
    }
    return out;
}

FixturePaths write_fixture(const DgpSpec& spec, std::size_t n_img, const std::filesystem::path& dir,
                           const std::string& model)
{
    std::filesystem::create_directories(dir);
    FixturePaths p{dir / "manifest.json", dir / "real.cbfm", dir / ("gen_" + model + ".cbfm")};
    const auto real = sample_dataset(spec, n_img, Role::Natural);
    const auto gen = sample_dataset(spec, n_img, Role::Generated);
    tensorio::write_feature_matrix(real.features, p.real);
    tensorio::write_feature_matrix(gen.features, p.gen);

    tensorio::DatasetManifest m;
    m.tokens_per_image = spec.tokens_per_image;
    const std::size_t t = spec.tokens_per_image;
    for (std::size_t i = 0; i < n_img; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "img%06zu", i);
        tensorio::ManifestEntry e;
        e.caption_id = id;
        e.caption = "synthetic image " + std::to_string(i);
        e.real = {p.real, i * t, t};
        e.gen[model] = {p.gen, i * t, t};
        m.entries.push_back(std::move(e));
    }
    tensorio::save_manifest(m, p.manifest);
    return p;
}

void to_json(nlohmann::json& j, const DgpSpec& s)
{
    nlohmann::json planted = nlohmann::json::object();
    for (const auto& [k, m] : s.planted) {
        planted[std::to_string(k)] = m;
    }
    j = {{"concepts", s.concepts},
         {"dim", s.dim},
         {"base_rates", s.base_rates},
         {"magnitudes", s.magnitudes},
         {"planted", planted},
         {"tokens_per_image", s.tokens_per_image},
         {"noise_sigma", s.noise_sigma},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, DgpSpec& s)
{
    try {
        s.concepts = j.at("concepts").get<std::size_t>();
        s.dim = j.at("dim").get<std::size_t>();
        s.seed = j.value("seed", std::uint64_t{0});
        s.tokens_per_image = j.value("tokens_per_image", std::size_t{1});
        s.noise_sigma = j.value("noise_sigma", 0.01);
        const auto rate = j.at("base_rates");
        s.base_rates = rate.is_number() ? std::vector<double>(s.concepts, rate.get<double>())
                                        : rate.get<std::vector<double>>();
        const auto mag = j.at("magnitudes");
        s.magnitudes = mag.is_number() ? std::vector<double>(s.concepts, mag.get<double>())
                                       : mag.get<std::vector<double>>();
        s.planted.clear();
        const auto planted = j.value("planted", nlohmann::json::object());
        for (const auto& [key, value] : planted.items()) {
            s.planted[std::stoul(key)] = value.get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("bad DGP spec: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error(ErrorKind::Validation, "bad DGP spec: planted keys must be concept indices");
    }
    // The mixing matrix is not serialized; it is a function of (d, K, seed).
    if (s.dim >= s.concepts && s.concepts > 0) {
        s.mixing = random_orthonormal(s.dim, s.concepts, s.seed);
    }
    s.validate();
}

DgpSpec load_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open DGP spec " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, "DGP spec " + path.string() + " is not valid JSON: " + e.what());
    }
    return j.get<DgpSpec>();
}

void save_spec(const DgpSpec& spec, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    out << nlohmann::json(spec).dump(2) << '\n';
}

} // namespace blindspot::synthdgp
