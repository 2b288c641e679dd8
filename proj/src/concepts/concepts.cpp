#include "blindspot/concepts/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "blindspot/error.hpp"
#include "blindspot/tensorio/cbfm.hpp"

namespace blindspot::concepts {

std::string_view to_string(BlindspotClass c) noexcept
{
    switch (c) {
    case BlindspotClass::Suppressed: return "suppressed";
    case BlindspotClass::Neutral: return "neutral";
    case BlindspotClass::Exaggerated: return "exaggerated";
    }
    return "neutral";
}

BlindspotClass class_from_string(std::string_view s)
{
    if (s == "suppressed") {
        return BlindspotClass::Suppressed;
    }
    if (s == "exaggerated") {
        return BlindspotClass::Exaggerated;
    }
    if (s == "neutral") {
        return BlindspotClass::Neutral;
    }
    throw Error(ErrorKind::Validation, "unknown blindspot class '" + std::string(s) + "'");
}

void Thresholds::validate() const
{
    if (!(0.0 < lambda_min && lambda_min < lambda_max && lambda_max < 1.0)) {
        throw Error(ErrorKind::Validation, "thresholds must satisfy 0 < lambda_min < lambda_max < 1");
    }
    if (!(temperature > 0.0)) {
        throw Error(ErrorKind::Validation, "temperature must be > 0");
    }
}

double sigmoid(double x) noexcept
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

BlindspotClass classify(double ediff, const Thresholds& th) noexcept
{
    if (ediff < th.lambda_min) {
        return BlindspotClass::Suppressed;
    }
    if (ediff > th.lambda_max) {
        return BlindspotClass::Exaggerated;
    }
    return BlindspotClass::Neutral;
}

std::vector<EnergyVector> aggregate_energies(const rasae::SparseCodeMatrix& codes,
                                             const tensorio::TokenGrouping& grouping, Aggregation mode,
                                             std::span<const std::string> caption_ids)
{
    if (grouping.tokens_per_image < 1 || codes.rows() != grouping.token_rows()) {
        throw Error(ErrorKind::Shape, std::to_string(codes.rows()) + " code rows do not match " +
                                          std::to_string(grouping.image_count) + " images x " +
                                          std::to_string(grouping.tokens_per_image) + " tokens");
    }
    if (!caption_ids.empty() && caption_ids.size() != grouping.image_count) {
        throw Error(ErrorKind::Shape, "caption id count does not match image count");
    }
    const auto t = grouping.tokens_per_image;
    std::vector<EnergyVector> out(grouping.image_count);
    for (std::size_t img = 0; img < grouping.image_count; ++img) {
        auto& ev = out[img];
        ev.caption_id = caption_ids.empty() ? std::to_string(img) : caption_ids[img];
        ev.energies.assign(codes.n_concepts(), 0.0);
        for (std::size_t tok = 0; tok < t; ++tok) {
            for (const auto& e : codes.row(img * t + tok)) {
                auto& slot = ev.energies[e.index];
                slot = mode == Aggregation::Mean ? slot + e.activation : std::max(slot, e.activation);
            }
        }
        if (mode == Aggregation::Mean) {
            for (auto& v : ev.energies) {
                v /= static_cast<double>(t);
            }
        }
    }
    return out;
}

std::vector<ConceptScore> energy_difference(std::span<const EnergyVector> real, std::span<const EnergyVector> gen,
                                            const Thresholds& th)
{
    th.validate();
    if (real.empty() || gen.empty()) {
        throw Error(ErrorKind::Argument, "energy difference needs non-empty real and generated sets");
    }
    const std::size_t k = real.front().energies.size();
    auto check = [k](std::span<const EnergyVector> set) {
        for (const auto& ev : set) {
            if (ev.energies.size() != k) {
                throw Error(ErrorKind::Shape, "energy vectors disagree on concept count");
            }
        }
    };
    check(real);
    check(gen);

    std::vector<double> mean_real(k, 0.0);
    std::vector<double> mean_gen(k, 0.0);
    std::vector<std::size_t> freq(k, 0);
    for (const auto& ev : real) {
        for (std::size_t c = 0; c < k; ++c) {
            mean_real[c] += ev.energies[c];
            freq[c] += ev.energies[c] > 0.0 ? 1 : 0;
        }
    }
    for (const auto& ev : gen) {
        for (std::size_t c = 0; c < k; ++c) {
            mean_gen[c] += ev.energies[c];
        }
    }
    std::vector<ConceptScore> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        auto& s = out[c];
        s.concept_id = c;
        s.delta = mean_gen[c] / static_cast<double>(gen.size()) - mean_real[c] / static_cast<double>(real.size());
        s.ediff = sigmoid(s.delta / th.temperature);
        s.frequency = freq[c];
        s.cls = classify(s.ediff, th);
    }
    return out;
}

Histogram ediff_histogram(std::span<const ConceptScore> scores, std::size_t bins)
{
    if (bins < 1) {
        throw Error(ErrorKind::Argument, "histogram needs at least one bin");
    }
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges[i] = static_cast<double>(i) / static_cast<double>(bins);
    }
    h.counts.assign(bins, 0);
    for (const auto& s : scores) {
        const double v = std::clamp(s.ediff, 0.0, 1.0);
        const auto b = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
        ++h.counts[b];
    }
    h.log_counts.resize(bins);
    std::transform(h.counts.begin(), h.counts.end(), h.log_counts.begin(),
                   [](std::size_t c) { return std::log10(1.0 + static_cast<double>(c)); });
    return h;
}

double skewness(std::span<const double> values)
{
    const double n = static_cast<double>(values.size());
    if (values.size() < 3) {
        throw Error(ErrorKind::UndefinedStatistic, "skewness needs at least 3 values");
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (!(m2 > 0.0)) {
        throw Error(ErrorKind::UndefinedStatistic, "skewness undefined for zero variance");
    }
    return std::sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / std::pow(m2, 1.5);
}

double skewness(std::span<const ConceptScore> scores)
{
    std::vector<double> v;
    v.reserve(scores.size());
    for (const auto& s : scores) {
        v.push_back(s.ediff);
    }
    return skewness(v);
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.empty()) {
        throw Error(ErrorKind::Shape, "correlation needs two equal-length, non-empty vectors");
    }
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) {
        throw Error(ErrorKind::UndefinedStatistic, "correlation undefined for zero variance");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double cross_model_correlation(std::span<const ConceptScore> a, std::span<const ConceptScore> b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorKind::Shape, "score lists differ in concept count");
    }
    std::vector<double> va;
    std::vector<double> vb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].concept_id != b[i].concept_id) {
            throw Error(ErrorKind::Shape, "score lists differ in concept ordering at position " + std::to_string(i));
        }
        va.push_back(a[i].ediff);
        vb.push_back(b[i].ediff);
    }
    return pearson(va, vb);
}

std::vector<FrequencyPoint> frequency_analysis(std::span<const ConceptScore> scores, double tail_temperature)
{
    if (!(tail_temperature > 0.0)) {
        throw Error(ErrorKind::Argument, "tail temperature must be > 0");
    }
    std::vector<FrequencyPoint> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
        out.push_back({s.concept_id, s.frequency, sigmoid(std::abs(s.delta) / tail_temperature)});
    }
    std::sort(out.begin(), out.end(), [](const FrequencyPoint& x, const FrequencyPoint& y) {
        return x.frequency != y.frequency ? x.frequency < y.frequency : x.concept_id < y.concept_id;
    });
    return out;
}

std::vector<std::size_t> ranking(std::span<const ConceptScore> scores, BlindspotClass cls)
{
    std::vector<const ConceptScore*> picked;
    for (const auto& s : scores) {
        if (s.cls == cls) {
            picked.push_back(&s);
        }
    }
    const bool descending = cls == BlindspotClass::Exaggerated;
    std::sort(picked.begin(), picked.end(), [descending](const ConceptScore* x, const ConceptScore* y) {
        if (x->ediff != y->ediff) {
            return descending ? x->ediff > y->ediff : x->ediff < y->ediff;
        }
        return x->concept_id < y->concept_id;
    });
    std::vector<std::size_t> ids;
    ids.reserve(picked.size());
    for (const auto* s : picked) {
        ids.push_back(s->concept_id);
    }
    return ids;
}

void to_json(nlohmann::json& j, const ConceptScore& s)
{
    j = {{"concept_id", s.concept_id},
         {"ediff", s.ediff},
         {"delta", s.delta},
         {"frequency", s.frequency},
         {"class", std::string(to_string(s.cls))}};
}

void from_json(const nlohmann::json& j, ConceptScore& s)
{
    s.concept_id = j.at("concept_id").get<std::size_t>();
    s.ediff = j.at("ediff").get<double>();
    s.delta = j.at("delta").get<double>();
    s.frequency = j.at("frequency").get<std::size_t>();
    s.cls = class_from_string(j.at("class").get<std::string>());
}

void to_json(nlohmann::json& j, const Histogram& h)
{
    j = {{"edges", h.edges}, {"counts", h.counts}, {"log_counts", h.log_counts}};
}

void save_scores(std::span<const ConceptScore> scores, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : scores) {
        j.push_back(s);
    }
    out << j.dump(1) << '\n';
}

std::vector<ConceptScore> load_scores(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    try {
        return nlohmann::json::parse(in).get<std::vector<ConceptScore>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, path.string() + ": malformed scores: " + e.what());
    }
}

void save_energies(std::span<const EnergyVector> energies, const std::filesystem::path& path)
{
    const std::size_t k = energies.empty() ? 0 : energies.front().energies.size();
    std::vector<double> flat;
    flat.reserve(energies.size() * k);
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& ev : energies) {
        if (ev.energies.size() != k) {
            throw Error(ErrorKind::Shape, "energy vectors disagree on concept count");
        }
        flat.insert(flat.end(), ev.energies.begin(), ev.energies.end());
        ids.push_back(ev.caption_id);
    }
    tensorio::SectionedFile f;
    f.put_json("meta", {{"kind", "energies"}, {"caption_ids", ids}});
    f.put_f64("energies", energies.size(), k, flat);
    f.write(path);
}

std::vector<EnergyVector> load_energies(const std::filesystem::path& path)
{
    const auto f = tensorio::SectionedFile::read(path);
    const auto meta = f.get_json("meta");
    if (meta.value("kind", std::string{}) != "energies") {
        throw Error(ErrorKind::Format, path.string() + ": not an energies file");
    }
    const auto ids = meta.at("caption_ids").get<std::vector<std::string>>();
    const auto m = f.get_f64("energies");
    if (static_cast<std::size_t>(m.rows()) != ids.size()) {
        throw Error(ErrorKind::Corruption, path.string() + ": caption ids and energy rows disagree");
    }
    std::vector<EnergyVector> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out[i].caption_id = ids[i];
        out[i].energies.assign(m.row(static_cast<Eigen::Index>(i)).begin(), m.row(static_cast<Eigen::Index>(i)).end());
    }
    return out;
}

} // namespace blindspot::concepts
