#include "blindspot/rasae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "blindspot/error.hpp"
#include "blindspot/rng.hpp"
#include "blindspot/tensorio/cbfm.hpp"

namespace blindspot::rasae {

namespace {

void normalize_rows(RowMajorD& m)
{
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        const double n = m.row(j).norm();
        if (n > 0.0) {
            m.row(j) /= n;
        }
    }
}

} // namespace

RowMajorD SaeModel::stochastic_weights() const
{
    RowMajorD w = w_logits;
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
        const double mx = w.row(j).maxCoeff();
        w.row(j) = (w.row(j).array() - mx).exp();
        w.row(j) /= w.row(j).sum();
    }
    return w;
}

Dictionary SaeModel::dictionary() const
{
    Dictionary d;
    if (config.archetypal) {
        ArchetypalPart part{stochastic_weights(), anchors, relaxation};
        d.atoms = part.weights * part.anchors + part.relaxation;
        normalize_rows(d.atoms);
        d.archetypal = std::move(part);
    } else {
        d.atoms = free_atoms;
    }
    return d;
}

void SaeModel::save(const std::filesystem::path& path) const
{
    tensorio::SectionedFile f;
    nlohmann::json meta = {{"kind", "sae_state"}, {"format", 1}, {"config", config}};
    f.put_json("meta", meta);
    f.put_f64("encoder_weight", encoder_weight);
    f.put_f64("encoder_bias", encoder_bias.transpose());
    const auto dict = dictionary();
    f.put_f64("atoms", dict.atoms);
    if (config.archetypal) {
        f.put_f64("w_logits", w_logits);
        f.put_f64("w", dict.archetypal->weights);
        f.put_f64("anchors", anchors);
        f.put_f64("relaxation", relaxation);
    }
    f.write(path);
}

SaeModel SaeModel::load(const std::filesystem::path& path)
{
    const auto f = tensorio::SectionedFile::read(path);
    const auto meta = f.get_json("meta");
    if (meta.value("kind", std::string{}) != "sae_state") {
        throw Error(ErrorKind::Format, path.string() + ": not an SAE state file");
    }
    if (meta.value("format", 0) != 1) {
        throw Error(ErrorKind::Format, path.string() + ": unsupported SAE state format");
    }
    SaeModel m;
    m.config = meta.at("config").get<SaeConfig>();
    m.encoder_weight = f.get_f64("encoder_weight");
    m.encoder_bias = f.get_f64("encoder_bias").row(0).transpose();
    const auto k = static_cast<Eigen::Index>(m.config.n_concepts);
    const auto d = static_cast<Eigen::Index>(m.config.input_dim);
    if (m.encoder_weight.rows() != k || m.encoder_weight.cols() != d || m.encoder_bias.size() != k) {
        throw Error(ErrorKind::Corruption, path.string() + ": encoder shape disagrees with config");
    }
    if (m.config.archetypal) {
        m.w_logits = f.get_f64("w_logits");
        m.anchors = f.get_f64("anchors");
        m.relaxation = f.get_f64("relaxation");
        if (m.w_logits.rows() != k || m.anchors.cols() != d || m.w_logits.cols() != m.anchors.rows() ||
            m.relaxation.rows() != k || m.relaxation.cols() != d) {
            throw Error(ErrorKind::Corruption, path.string() + ": archetypal sections disagree with config");
        }
    } else {
        m.free_atoms = f.get_f64("atoms");
        if (m.free_atoms.rows() != k || m.free_atoms.cols() != d) {
            throw Error(ErrorKind::Corruption, path.string() + ": atom shape disagrees with config");
        }
    }
    return m;
}

SaeModel initialize(const SaeConfig& cfg, const RowMajorD& anchors)
{
    cfg.validate();
    const auto k = static_cast<Eigen::Index>(cfg.n_concepts);
    const auto d = static_cast<Eigen::Index>(cfg.input_dim);
    SaeModel m;
    m.config = cfg;
    auto rng = make_rng(cfg.seed, "sae/init");

    if (cfg.archetypal) {
        if (anchors.cols() != d || anchors.rows() < 1) {
            throw Error(ErrorKind::Shape, "anchors must be m x " + std::to_string(d));
        }
        const auto count = anchors.rows();
        m.anchors = anchors;
        m.relaxation = RowMajorD::Zero(k, d);
        // Each atom starts concentrated on one anchor so initial atoms are distinct.
        std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::uniform_real_distribution<double> noise(-0.01, 0.01);
        m.w_logits.resize(k, count);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index a = 0; a < count; ++a) {
                m.w_logits(j, a) = noise(rng);
            }
        }
        const double focus = std::log(static_cast<double>(count)) + 2.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            m.w_logits(j, order[static_cast<std::size_t>(j % count)]) += focus;
        }
    } else {
        const double bound = std::sqrt(6.0 / static_cast<double>(k + d));
        std::uniform_real_distribution<double> glorot(-bound, bound);
        m.free_atoms.resize(k, d);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index c = 0; c < d; ++c) {
                m.free_atoms(j, c) = glorot(rng);
            }
        }
        normalize_rows(m.free_atoms);
    }
    m.encoder_weight = m.dictionary().atoms;
    m.encoder_bias = VectorD::Zero(k);
    return m;
}

RowMajorD pre_activations(const SaeModel& model, const Eigen::Ref<const RowMajorD>& x)
{
    if (static_cast<std::size_t>(x.cols()) != model.dim()) {
        throw Error(ErrorKind::Shape, "features have " + std::to_string(x.cols()) + " columns, SAE expects " +
                                          std::to_string(model.dim()));
    }
    RowMajorD pre = x * model.encoder_weight.transpose();
    pre.rowwise() += model.encoder_bias.transpose();
    return pre;
}

std::vector<std::uint32_t> top_k_positive(std::span<const double> values, std::size_t k,
                                          const std::vector<bool>* allowed)
{
    std::vector<std::uint32_t> best;
    best.reserve(k + 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!(v > 0.0) || (allowed != nullptr && !(*allowed)[i])) {
            continue;
        }
        if (best.size() == k && !(v > values[best.back()])) {
            continue;
        }
        // Insert after every entry with value >= v (earlier index wins ties).
        auto pos = std::find_if(best.begin(), best.end(), [&](std::uint32_t j) { return values[j] < v; });
        best.insert(pos, static_cast<std::uint32_t>(i));
        if (best.size() > k) {
            best.pop_back();
        }
    }
    return best;
}

SparseCodeMatrix encode(const Eigen::Ref<const RowMajorD>& features, const SaeModel& model)
{
    const std::size_t k = model.config.top_k;
    SparseCodeMatrix codes(model.n_concepts());
    std::vector<CodeEntry> row;
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index begin = 0; begin < features.rows(); begin += kChunk) {
        const auto count = std::min(kChunk, features.rows() - begin);
        const RowMajorD pre = pre_activations(model, features.middleRows(begin, count));
        for (Eigen::Index r = 0; r < count; ++r) {
            const std::span<const double> values(pre.data() + r * pre.cols(), static_cast<std::size_t>(pre.cols()));
            row.clear();
            for (auto j : top_k_positive(values, k)) {
                row.push_back({j, values[j]});
            }
            codes.push_row(row);
        }
    }
    if (features.rows() == 0 && static_cast<std::size_t>(features.cols()) != model.dim()) {
        throw Error(ErrorKind::Shape, "features have " + std::to_string(features.cols()) + " columns, SAE expects " +
                                          std::to_string(model.dim()));
    }
    return codes;
}

SparseCodeMatrix encode(const tensorio::FeatureMatrix& features, const SaeModel& model)
{
    if (features.cols() != model.dim() && !(features.rows() == 0 && features.cols() == 0)) {
        throw Error(ErrorKind::Shape, "features have " + std::to_string(features.cols()) + " columns, SAE expects " +
                                          std::to_string(model.dim()));
    }
    if (features.rows() == 0) {
        return SparseCodeMatrix(model.n_concepts());
    }
    return encode(features.to_double(), model);
}

RowMajorD decode(const SparseCodeMatrix& codes, const Dictionary& dict)
{
    if (codes.n_concepts() != dict.n_concepts()) {
        throw Error(ErrorKind::Shape, "codes have " + std::to_string(codes.n_concepts()) +
                                          " concepts, dictionary has " + std::to_string(dict.n_concepts()));
    }
    RowMajorD out = RowMajorD::Zero(static_cast<Eigen::Index>(codes.rows()), dict.atoms.cols());
    for (std::size_t r = 0; r < codes.rows(); ++r) {
        for (const auto& e : codes.row(r)) {
            if (e.index >= dict.n_concepts()) {
                throw Error(ErrorKind::Corruption, "code index " + std::to_string(e.index) + " out of range");
            }
            out.row(static_cast<Eigen::Index>(r)) += e.activation * dict.atoms.row(e.index);
        }
    }
    return out;
}

} // namespace blindspot::rasae
