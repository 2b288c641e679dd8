#include "blindspot/datapoint/datapoint.hpp"

#include <algorithm>
#include <cmath>

#include "blindspot/error.hpp"
#include "blindspot/stats.hpp"

namespace blindspot::datapoint {

std::vector<PairDivergence> pair_divergences(std::span<const concepts::EnergyVector> real,
                                             std::span<const concepts::EnergyVector> gen, double temperature)
{
    if (real.size() != gen.size()) {
        throw Error(ErrorKind::Pairing, "real and generated sets differ in size (" + std::to_string(real.size()) +
                                            " vs " + std::to_string(gen.size()) + ")");
    }
    if (!(temperature > 0.0)) {
        throw Error(ErrorKind::Argument, "temperature must be > 0");
    }
    std::vector<PairDivergence> out;
    out.reserve(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) {
        const auto& r = real[i];
        const auto& g = gen[i];
        if (r.caption_id != g.caption_id) {
            throw Error(ErrorKind::Pairing, "pair " + std::to_string(i) + " misaligned: '" + r.caption_id +
                                                "' vs '" + g.caption_id + "'");
        }
        if (r.energies.size() != g.energies.size()) {
            throw Error(ErrorKind::Shape, "pair '" + r.caption_id + "' has mismatched concept counts");
        }
        double sq = 0.0;
        double sig = 0.0;
        for (std::size_t k = 0; k < r.energies.size(); ++k) {
            const double diff = g.energies[k] - r.energies[k];
            sq += diff * diff;
            sig += concepts::sigmoid(diff / temperature);
        }
        const double mean = r.energies.empty() ? 0.5 : sig / static_cast<double>(r.energies.size());
        out.push_back({r.caption_id, std::sqrt(sq), mean});
    }
    return out;
}

RankedPairs rank_pairs(std::span<const PairDivergence> divs, std::size_t n_extreme)
{
    std::vector<PairDivergence> asc(divs.begin(), divs.end());
    std::sort(asc.begin(), asc.end(), [](const PairDivergence& x, const PairDivergence& y) {
        return x.l2 != y.l2 ? x.l2 < y.l2 : x.caption_id < y.caption_id;
    });
    std::vector<PairDivergence> desc(divs.begin(), divs.end());
    std::sort(desc.begin(), desc.end(), [](const PairDivergence& x, const PairDivergence& y) {
        return x.l2 != y.l2 ? x.l2 > y.l2 : x.caption_id < y.caption_id;
    });
    const auto n = std::min(n_extreme, divs.size());
    asc.resize(n);
    desc.resize(n);
    return {std::move(asc), std::move(desc)};
}

Spread spread_of(std::span<const double> values)
{
    Spread s;
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    s.iqr = s.q3 - s.q1;
    return s;
}

VariantComparison compare_variants(std::span<const PairDivergence> a, std::span<const PairDivergence> b,
                                   std::size_t bins)
{
    if (a.empty() || b.empty()) {
        throw Error(ErrorKind::Argument, "variant comparison needs non-empty inputs");
    }
    if (bins < 1) {
        throw Error(ErrorKind::Argument, "histogram needs at least one bin");
    }
    auto l2s = [](std::span<const PairDivergence> d) {
        std::vector<double> v;
        v.reserve(d.size());
        for (const auto& p : d) {
            v.push_back(p.l2);
        }
        return v;
    };
    const auto va = l2s(a);
    const auto vb = l2s(b);
    double lo = std::min(*std::min_element(va.begin(), va.end()), *std::min_element(vb.begin(), vb.end()));
    double hi = std::max(*std::max_element(va.begin(), va.end()), *std::max_element(vb.begin(), vb.end()));
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    VariantComparison c;
    c.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        c.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    auto count = [&](const std::vector<double>& v) {
        std::vector<std::size_t> counts(bins, 0);
        for (double x : v) {
            const double t = (x - lo) / (hi - lo) * static_cast<double>(bins);
            ++counts[std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, t)))];
        }
        return counts;
    };
    c.counts_a = count(va);
    c.counts_b = count(vb);
    c.a = spread_of(va);
    c.b = spread_of(vb);
    return c;
}

void to_json(nlohmann::json& j, const PairDivergence& p)
{
    j = {{"caption_id", p.caption_id}, {"l2", p.l2}, {"sigmoid_mean", p.sigmoid_mean}};
}

void from_json(const nlohmann::json& j, PairDivergence& p)
{
    p.caption_id = j.at("caption_id").get<std::string>();
    p.l2 = j.at("l2").get<double>();
    p.sigmoid_mean = j.at("sigmoid_mean").get<double>();
}

void to_json(nlohmann::json& j, const Spread& s)
{
    j = {{"median", s.median}, {"q1", s.q1}, {"q3", s.q3}, {"iqr", s.iqr}};
}

void to_json(nlohmann::json& j, const VariantComparison& c)
{
    j = {{"edges", c.edges}, {"counts_a", c.counts_a}, {"counts_b", c.counts_b}, {"a", c.a}, {"b", c.b}};
}

} // namespace blindspot::datapoint
