#include "blindspot/explorer/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <set>

#include "blindspot/error.hpp"

namespace blindspot::explorer {

RowMajorD embed_2d(const Eigen::Ref<const RowMajorD>& rows)
{
    const auto n = rows.rows();
    RowMajorD out = RowMajorD::Zero(n, 2);
    if (n == 0 || rows.cols() == 0) {
        return out;
    }
    const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::Numeric, "PCA eigendecomposition failed");
    }
    const auto d = cov.rows();
    const double top = std::max(es.eigenvalues()(d - 1), 0.0);
    // Centering roundoff is O(eps * |x|), so variance below this floor is noise.
    const double floor = 1e-24 * rows.squaredNorm();
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(2, d); ++j) {
        const double lambda = es.eigenvalues()(d - 1 - j);
        if (!(lambda > 1e-12 * top) || !(lambda > floor)) {
            continue; // rank-deficient: the component stays zero
        }
        Eigen::VectorXd axis = es.eigenvectors().col(d - 1 - j);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis(arg) < 0) {
            axis = -axis;
        }
        out.col(j) = centered * axis;
    }
    return out;
}

RowMajorD embed_2d(const rasae::Dictionary& dict)
{
    return embed_2d(dict.atoms);
}

namespace {

std::vector<std::string> order_images(const std::vector<double>& value, std::size_t n,
                                      std::span<const std::string> ids)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] > 0.0) {
            idx.push_back(i);
        }
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });
    idx.resize(std::min(n, idx.size()));
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(ids.empty() ? std::to_string(i) : ids[i]);
    }
    return out;
}

} // namespace

std::vector<std::string> top_exemplars(const rasae::SparseCodeMatrix& codes, const tensorio::TokenGrouping& grouping,
                                       std::size_t concept_id, std::size_t n, std::span<const std::string> image_ids)
{
    if (codes.rows() != grouping.token_rows()) {
        throw Error(ErrorKind::Shape, "codes have " + std::to_string(codes.rows()) + " rows but grouping expects " +
                                          std::to_string(grouping.token_rows()));
    }
    if (concept_id >= codes.n_concepts()) {
        throw Error(ErrorKind::Argument, "concept " + std::to_string(concept_id) + " out of range");
    }
    if (!image_ids.empty() && image_ids.size() != grouping.image_count) {
        throw Error(ErrorKind::Shape, "image id count does not match the grouping");
    }
    std::vector<double> best(grouping.image_count, 0.0);
    for (std::size_t r = 0; r < codes.rows(); ++r) {
        for (const auto& e : codes.row(r)) {
            if (e.index == concept_id) {
                auto& b = best[r / grouping.tokens_per_image];
                b = std::max(b, e.activation);
            }
        }
    }
    return order_images(best, n, image_ids);
}

std::vector<std::vector<std::string>> top_exemplars_all(std::span<const concepts::EnergyVector> max_energies,
                                                        std::size_t n)
{
    if (max_energies.empty()) {
        return {};
    }
    const std::size_t k = max_energies.front().energies.size();
    std::vector<std::string> ids;
    ids.reserve(max_energies.size());
    for (const auto& e : max_energies) {
        if (e.energies.size() != k) {
            throw Error(ErrorKind::Shape, "energy vectors differ in length");
        }
        ids.push_back(e.caption_id);
    }
    std::vector<std::vector<std::string>> out(k);
    std::vector<double> col(max_energies.size());
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < max_energies.size(); ++i) {
            col[i] = max_energies[i].energies[c];
        }
        out[c] = order_images(col, n, ids);
    }
    return out;
}

std::vector<std::vector<Partner>> top_partners(const cooccur::CooccurrenceMatrix& c, std::size_t n)
{
    const auto k = static_cast<std::size_t>(c.rows());
    std::vector<std::vector<Partner>> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<Partner> row;
        for (std::size_t j = 0; j < k; ++j) {
            const double w = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (j != i && w > 0.0) {
                row.push_back({j, w});
            }
        }
        std::stable_sort(row.begin(), row.end(), [](const Partner& a, const Partner& b) { return a.weight > b.weight; });
        row.resize(std::min(n, row.size()));
        out[i] = std::move(row);
    }
    return out;
}

nlohmann::json export_bundle(const BundleInputs& in)
{
    using nlohmann::json;
    auto require = [](bool present, const char* stage) {
        if (!present) {
            throw Error(ErrorKind::Dependency, std::string("bundle export needs the '") + stage + "' stage output");
        }
    };
    require(in.scores.has_value(), "energy-diff");
    require(in.coordinates.has_value(), "embedding");
    require(in.cooccurrence.has_value(), "cooccur");
    require(in.real_max_energies.has_value() && in.gen_max_energies.has_value(), "encode");
    in.thresholds.validate();

    const auto& scores = *in.scores;
    const std::size_t k = scores.size();
    if (static_cast<std::size_t>(in.coordinates->rows()) != k || in.coordinates->cols() != 2) {
        throw Error(ErrorKind::Shape, "embedding must be K' x 2 with K' = " + std::to_string(k));
    }
    if (static_cast<std::size_t>(in.cooccurrence->rows()) != k) {
        throw Error(ErrorKind::Shape, "co-occurrence matrix does not match K' = " + std::to_string(k));
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (scores[i].concept_id != i) {
            throw Error(ErrorKind::Validation, "scores must be ordered by concept id");
        }
    }
    const auto real_top = top_exemplars_all(*in.real_max_energies, in.exemplars);
    const auto gen_top = top_exemplars_all(*in.gen_max_energies, in.exemplars);
    if ((!real_top.empty() && real_top.size() != k) || (!gen_top.empty() && gen_top.size() != k)) {
        throw Error(ErrorKind::Shape, "energy vectors do not match K' = " + std::to_string(k));
    }
    const auto partners = top_partners(*in.cooccurrence, in.partners);

    json list = json::array();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& s = scores[i];
        json co = json::array();
        for (const auto& p : partners[i]) {
            co.push_back({{"concept_id", p.concept_id}, {"weight", p.weight}});
        }
        list.push_back({{"concept_id", s.concept_id},
                        {"x", (*in.coordinates)(static_cast<Eigen::Index>(i), 0)},
                        {"y", (*in.coordinates)(static_cast<Eigen::Index>(i), 1)},
                        {"ediff", s.ediff},
                        {"delta", s.delta},
                        {"frequency", s.frequency},
                        {"class", concepts::to_string(s.cls)},
                        {"top_real_image_ids", real_top.empty() ? json::array() : json(real_top[i])},
                        {"top_gen_image_ids", gen_top.empty() ? json::array() : json(gen_top[i])},
                        {"cooccurring", co}});
    }

    json meta = {{"n_concepts", k},
                 {"thresholds", {{"lambda_min", in.thresholds.lambda_min}, {"lambda_max", in.thresholds.lambda_max}}},
                 {"temperature", in.thresholds.temperature},
                 {"created_at", in.created_at}};
    if (in.thumbnail_dir) {
        meta["thumbnail_dir"] = *in.thumbnail_dir;
    }
    return {{"schema_version", kSchemaVersion},
            {"model_name", in.model_name},
            {"embedding_method", in.embedding_method},
            {"concepts", list},
            {"rankings",
             {{"suppressed", concepts::ranking(scores, concepts::BlindspotClass::Suppressed)},
              {"exaggerated", concepts::ranking(scores, concepts::BlindspotClass::Exaggerated)}}},
            {"histogram", concepts::ediff_histogram(scores)},
            {"metadata", meta}};
}

std::vector<std::string> validate_bundle(const nlohmann::json& b)
{
    std::vector<std::string> problems;
    auto fail = [&](std::string msg) { problems.push_back(std::move(msg)); };
    try {
        if (b.at("schema_version") != kSchemaVersion) {
            fail("unsupported schema_version " + b.at("schema_version").dump());
            return problems;
        }
        for (const char* key : {"model_name", "embedding_method", "concepts", "rankings", "histogram", "metadata"}) {
            if (!b.contains(key)) {
                fail(std::string("missing key '") + key + "'");
            }
        }
        if (!problems.empty()) {
            return problems;
        }
        const auto& list = b.at("concepts");
        const std::size_t k = list.size();
        if (b.at("metadata").at("n_concepts").get<std::size_t>() != k) {
            fail("metadata.n_concepts does not match the concept list");
        }
        const double lmin = b.at("metadata").at("thresholds").at("lambda_min").get<double>();
        const double lmax = b.at("metadata").at("thresholds").at("lambda_max").get<double>();
        std::vector<concepts::ConceptScore> scores;
        for (std::size_t i = 0; i < k; ++i) {
            const auto& c = list[i];
            concepts::ConceptScore s = c.get<concepts::ConceptScore>();
            if (s.concept_id != i) {
                fail("concept at position " + std::to_string(i) + " has id " + std::to_string(s.concept_id));
            }
            if (!(s.ediff >= 0.0 && s.ediff <= 1.0)) {
                fail("concept " + std::to_string(i) + " has ediff outside [0, 1]");
            }
            const auto expect = concepts::classify(s.ediff, {lmin, lmax, 1.0});
            if (expect != s.cls) {
                fail("concept " + std::to_string(i) + " class disagrees with thresholds");
            }
            for (const auto& p : c.at("cooccurring")) {
                if (p.at("concept_id").get<std::size_t>() >= k) {
                    fail("concept " + std::to_string(i) + " references co-occurring id out of range");
                }
            }
            scores.push_back(s);
        }
        for (auto [name, cls] : {std::pair{"suppressed", concepts::BlindspotClass::Suppressed},
                                 std::pair{"exaggerated", concepts::BlindspotClass::Exaggerated}}) {
            const auto stored = b.at("rankings").at(name).get<std::vector<std::size_t>>();
            if (stored != concepts::ranking(scores, cls)) {
                fail(std::string("rankings.") + name + " is not reconstructible from the concept list");
            }
        }
        const auto counts = b.at("histogram").at("counts").get<std::vector<std::size_t>>();
        if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) != k) {
            fail("histogram counts do not sum to the number of concepts");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("malformed bundle: ") + e.what());
    } catch (const Error& e) {
        fail(std::string("malformed bundle: ") + e.what());
    }
    return problems;
}

void write_bundle(const nlohmann::json& bundle, const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    out << bundle.dump(1) << '\n';
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
}

std::string created_at_from_env()
{
    std::time_t t = 0;
    if (const char* s = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(s, &end, 10);
        if (end != s && *end == '\0' && v >= 0) {
            t = static_cast<std::time_t>(v);
        }
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace blindspot::explorer
