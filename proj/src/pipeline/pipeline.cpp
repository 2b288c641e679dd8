#include "blindspot/pipeline/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "blindspot/cooccur/cooccur.hpp"
#include "blindspot/error.hpp"
#include "blindspot/explorer/explorer.hpp"
#include "blindspot/rasae/model.hpp"
#include "blindspot/rasae/trainer.hpp"
#include "blindspot/rng.hpp"
#include "blindspot/tensorio/cbfm.hpp"
#include "blindspot/tensorio/manifest.hpp"

namespace blindspot::pipeline {

using nlohmann::json;
using tensorio::RowMajorD;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p)
{
    return p.is_absolute() ? p : base / p;
}

[[noreturn]] void invalid(const std::string& msg)
{
    throw Error(ErrorKind::Validation, "run config: " + msg);
}

std::string aggregation_name(concepts::Aggregation a)
{
    return a == concepts::Aggregation::Mean ? "mean" : "max";
}

concepts::Aggregation aggregation_from(const std::string& s)
{
    if (s == "mean") return concepts::Aggregation::Mean;
    if (s == "max") return concepts::Aggregation::Max;
    invalid("aggregation must be \"mean\" or \"max\", got \"" + s + "\"");
}

json thresholds_json(const concepts::Thresholds& t)
{
    return {{"lambda_min", t.lambda_min}, {"lambda_max", t.lambda_max}, {"temperature", t.temperature}};
}

std::string selected_model(const RunConfig& c, const tensorio::DatasetManifest& m)
{
    auto models = tensorio::complete_models(m);
    if (!c.model.empty()) {
        if (std::find(models.begin(), models.end(), c.model) == models.end())
            invalid("model \"" + c.model + "\" is not present for every manifest entry");
        return c.model;
    }
    if (models.empty()) invalid("manifest has no generator model covering every entry");
    return models.front();
}

std::set<fs::path> referenced_files(const tensorio::DatasetManifest& m, const std::string& model)
{
    std::set<fs::path> files;
    for (const auto& e : m.entries) {
        files.insert(e.real.path);
        files.insert(e.gen.at(model).path);
    }
    return files;
}

void write_cooccur_matrix(const cooccur::CooccurrenceMatrix& c, const fs::path& path)
{
    tensorio::SectionedFile f;
    f.put_json("meta", {{"kind", "cooccurrence"}});
    f.put_f64("cooccurrence", RowMajorD(c));
    f.write(path);
}

cooccur::CooccurrenceMatrix read_cooccur_matrix(const fs::path& path)
{
    return tensorio::SectionedFile::read(path).get_f64("cooccurrence");
}

struct Stage {
    std::string name;
    bool enabled = true;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    json fingerprint;
    std::function<void()> action;
};

std::optional<fs::file_time_type> mtime(const fs::path& p)
{
    std::error_code ec;
    auto t = fs::last_write_time(p, ec);
    if (ec) return std::nullopt;
    return t;
}

bool outputs_fresh(const Stage& s)
{
    std::optional<fs::file_time_type> newest_input;
    for (const auto& in : s.inputs) {
        auto t = mtime(in);
        if (!t) return false;
        if (!newest_input || *t > *newest_input) newest_input = t;
    }
    for (const auto& out : s.outputs) {
        auto t = mtime(out);
        if (!t) return false;
        if (newest_input && *t < *newest_input) return false;
    }
    return true;
}

} // namespace

void write_text(const fs::path& path, const std::string& text)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir)
{
    if (!j.is_object()) invalid("expected a JSON object");
    RunConfig c;
    try {
        if (!j.contains("manifest")) invalid("missing \"manifest\"");
        c.manifest = resolve(base_dir, j.at("manifest").get<std::string>());
        c.model = j.value("model", std::string{});
        c.out_dir = resolve(base_dir, j.value("out_dir", std::string{"run"}));
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("sae")) c.sae = j.at("sae").get<rasae::SaeConfig>();
        if (j.contains("sae_path") && !j.at("sae_path").is_null())
            c.sae_path = resolve(base_dir, j.at("sae_path").get<std::string>());
        if (j.contains("thresholds")) {
            const auto& t = j.at("thresholds");
            c.thresholds.lambda_min = t.value("lambda_min", c.thresholds.lambda_min);
            c.thresholds.lambda_max = t.value("lambda_max", c.thresholds.lambda_max);
            c.thresholds.temperature = t.value("temperature", c.thresholds.temperature);
        }
        c.aggregation = aggregation_from(j.value("aggregation", std::string{"mean"}));
        c.tail_temperature = j.value("tail_temperature", c.tail_temperature);
        if (j.contains("pairs")) {
            const auto& p = j.at("pairs");
            c.pairs = p.value("enabled", c.pairs);
            c.pairs_top = p.value("top", c.pairs_top);
        }
        if (j.contains("cooccur")) {
            const auto& p = j.at("cooccur");
            c.cooccur = p.value("enabled", c.cooccur);
            c.cooccur_top = p.value("top", c.cooccur_top);
            if (p.contains("epsilons")) c.epsilons = p.at("epsilons").get<std::vector<double>>();
        }
        if (j.contains("export")) {
            const auto& p = j.at("export");
            c.export_bundle = p.value("enabled", c.export_bundle);
            c.embedding = p.value("embedding", c.embedding);
            c.exemplars = p.value("exemplars", c.exemplars);
            if (p.contains("thumbnail_dir") && !p.at("thumbnail_dir").is_null())
                c.thumbnail_dir = p.at("thumbnail_dir").get<std::string>();
        }
    } catch (const json::exception& e) {
        invalid(e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path)
{
    if (!fs::exists(path)) throw Error(ErrorKind::Validation, "run config not found: " + path.string());
    json j;
    try {
        j = read_json(path);
    } catch (const Error& e) {
        throw Error(ErrorKind::Validation, e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

json run_config_to_json(const RunConfig& c)
{
    json j = {
        {"manifest", c.manifest.string()},
        {"model", c.model},
        {"out_dir", c.out_dir.string()},
        {"seed", c.seed},
        {"sae", c.sae},
        {"sae_path", c.sae_path ? json(c.sae_path->string()) : json(nullptr)},
        {"thresholds", thresholds_json(c.thresholds)},
        {"aggregation", aggregation_name(c.aggregation)},
        {"tail_temperature", c.tail_temperature},
        {"pairs", {{"enabled", c.pairs}, {"top", c.pairs_top}}},
        {"cooccur", {{"enabled", c.cooccur}, {"top", c.cooccur_top}, {"epsilons", c.epsilons}}},
        {"export",
         {{"enabled", c.export_bundle},
          {"embedding", c.embedding},
          {"exemplars", c.exemplars},
          {"thumbnail_dir", c.thumbnail_dir ? json(*c.thumbnail_dir) : json(nullptr)}}},
    };
    return j;
}

rasae::SaeConfig resolved_sae_config(const RunConfig& c, std::size_t input_dim)
{
    auto cfg = c.sae;
    if (cfg.input_dim == 0) cfg.input_dim = input_dim;
    cfg.seed = derive_seed(c.seed, "sae");
    return cfg;
}

void validate_run_config(const RunConfig& c)
{
    if (!fs::exists(c.manifest)) invalid("manifest not found: " + c.manifest.string());
    tensorio::DatasetManifest manifest;
    try {
        manifest = tensorio::load_manifest(c.manifest);
    } catch (const Error& e) {
        invalid(std::string("manifest: ") + e.what());
    }
    if (manifest.entries.empty()) invalid("manifest has no entries");
    const auto model = selected_model(c, manifest);
    const auto dim = tensorio::read_feature_matrix_shape(manifest.entries.front().real.path).second;

    if (c.sae_path) {
        if (!fs::exists(*c.sae_path)) invalid("sae_path not found: " + c.sae_path->string());
    } else {
        auto cfg = resolved_sae_config(c, dim);
        if (cfg.input_dim != dim)
            invalid("sae.input_dim " + std::to_string(cfg.input_dim) + " does not match feature dim " +
                    std::to_string(dim));
        try {
            cfg.validate();
        } catch (const Error& e) {
            invalid(std::string("sae: ") + e.what());
        }
    }
    try {
        c.thresholds.validate();
    } catch (const Error& e) {
        invalid(std::string("thresholds: ") + e.what());
    }
    if (!(c.tail_temperature > 0.0)) invalid("tail_temperature must be positive");
    if (c.cooccur_top == 0) invalid("cooccur.top must be positive");
    if (!std::is_sorted(c.epsilons.begin(), c.epsilons.end())) invalid("cooccur.epsilons must be ascending");
    if (c.embedding != "atoms" && c.embedding != "cooccurrence")
        invalid("export.embedding must be \"atoms\" or \"cooccurrence\"");
    if (c.export_bundle && !c.cooccur) invalid("export needs the cooccur stage enabled");
    (void)model;
}

json distribution_report(std::span<const concepts::ConceptScore> scores, double tail_temperature)
{
    json j;
    j["histogram"] = concepts::ediff_histogram(scores);
    try {
        j["skewness"] = concepts::skewness(scores);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedStatistic) throw;
        j["skewness"] = nullptr;
        j["skewness_note"] = e.what();
    }
    json freq = json::array();
    for (const auto& p : concepts::frequency_analysis(scores, tail_temperature))
        freq.push_back({{"concept_id", p.concept_id}, {"frequency", p.frequency}, {"value", p.value}});
    j["tail_temperature"] = tail_temperature;
    j["frequency"] = std::move(freq);
    return j;
}

json pairs_report(std::span<const datapoint::PairDivergence> divs, std::size_t top)
{
    auto ranked = datapoint::rank_pairs(divs, top);
    std::vector<double> l2;
    l2.reserve(divs.size());
    for (const auto& d : divs) l2.push_back(d.l2);
    json j;
    j["pairs"] = divs;
    j["lowest"] = ranked.lowest;
    j["highest"] = ranked.highest;
    j["spread"] = datapoint::spread_of(l2);
    return j;
}

json cooccur_report(const rasae::SparseCodeMatrix& real, const rasae::SparseCodeMatrix& gen, std::size_t top,
                    std::span<const double> epsilons)
{
    auto c_real = cooccur::cooccurrence(real);
    auto c_gen = cooccur::cooccurrence(gen);
    const auto t = std::min<std::size_t>(top, static_cast<std::size_t>(c_real.rows()));
    auto e_real = cooccur::eigenspectrum(c_real, t);
    auto e_gen = cooccur::eigenspectrum(c_gen, t);
    auto sim = cooccur::eigvec_similarity(e_real.vectors, e_gen.vectors, t);

    auto curve = [&](const cooccur::CooccurrenceMatrix& c) {
        json a = json::array();
        for (const auto& p : cooccur::l0_curve(c, epsilons)) a.push_back({{"epsilon", p.epsilon}, {"count", p.count}});
        return a;
    };
    json unique = json::array();
    for (double eps : epsilons)
        unique.push_back({{"epsilon", eps},
                          {"gen_only", cooccur::unique_entries(c_gen, c_real, eps)},
                          {"real_only", cooccur::unique_entries(c_real, c_gen, eps)}});
    json diag = json::array();
    for (Eigen::Index i = 0; i < sim.rows(); ++i) diag.push_back(sim(i, i));
    json rows = json::array();
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index k = 0; k < sim.cols(); ++k) r.push_back(sim(i, k));
        rows.push_back(std::move(r));
    }
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {
        {"n_concepts", c_real.rows()},
        {"l0_real", curve(c_real)},
        {"l0_gen", curve(c_gen)},
        {"unique_entries", std::move(unique)},
        {"eigenvalues_real", vec(e_real.values)},
        {"eigenvalues_gen", vec(e_gen.values)},
        {"eigvec_similarity", std::move(rows)},
        {"eigvec_similarity_diagonal", std::move(diag)},
    };
}

RunResult run_pipeline(const RunConfig& config, const RunOptions& options)
{
    validate_run_config(config);
    auto log = [&](const std::string& s) {
        if (options.log) options.log(s);
    };

    const auto manifest = tensorio::load_manifest(config.manifest);
    const auto model = selected_model(config, manifest);
    const auto& out = config.out_dir;
    fs::create_directories(out);
    auto at = [&](const char* name) { return out / name; };

    const auto run_path = at(artifact::kRunManifest);
    json previous;
    if (fs::exists(run_path)) {
        try {
            previous = read_json(run_path);
        } catch (const Error&) {
            previous = json();
        }
    }
    auto previous_stage = [&](const std::string& name) -> json {
        if (!previous.is_object() || !previous.contains("stages")) return json();
        for (const auto& s : previous["stages"])
            if (s.value("name", "") == name) return s;
        return json();
    };

    const auto sae_cfg_json = [&]() -> json {
        if (config.sae_path) return {{"pretrained", config.sae_path->string()}};
        auto dim = tensorio::read_feature_matrix_shape(manifest.entries.front().real.path).second;
        return resolved_sae_config(config, dim);
    }();

    std::vector<Stage> stages;

    {
        Stage s;
        s.name = "ingest";
        s.inputs.push_back(config.manifest);
        for (const auto& f : referenced_files(manifest, model)) s.inputs.push_back(f);
        s.outputs = {at(artifact::kFeaturesReal), at(artifact::kFeaturesGen), at(artifact::kIngest)};
        s.fingerprint = {{"manifest", config.manifest.string()}, {"model", model}};
        s.action = [&, model] {
            auto paired = tensorio::load_paired_features(manifest, model);
            tensorio::write_feature_matrix(paired.real, at(artifact::kFeaturesReal));
            tensorio::write_feature_matrix(paired.gen, at(artifact::kFeaturesGen));
            write_text(at(artifact::kIngest), json{{"model", model},
                                                   {"caption_ids", paired.caption_ids},
                                                   {"tokens_per_image", paired.grouping.tokens_per_image},
                                                   {"images", paired.grouping.image_count},
                                                   {"dim", paired.real.cols()}}
                                                  .dump(1));
        };
        stages.push_back(std::move(s));
    }
    {
        Stage s;
        s.name = "train";
        s.inputs = {at(artifact::kFeaturesReal)};
        if (config.sae_path) s.inputs.push_back(*config.sae_path);
        s.outputs = {at(artifact::kSae), at(artifact::kTrainReport)};
        s.fingerprint = sae_cfg_json;
        s.action = [&] {
            if (config.sae_path) {
                auto m = rasae::SaeModel::load(*config.sae_path);
                m.save(at(artifact::kSae));
                write_text(at(artifact::kTrainReport),
                           json{{"pretrained", config.sae_path->string()}, {"config", m.config}}.dump(1));
                return;
            }
            auto features = tensorio::read_feature_matrix(at(artifact::kFeaturesReal));
            auto cfg = resolved_sae_config(config, features.cols());
            auto result = rasae::train(features, cfg, [&](std::size_t e, const rasae::EpochStats& st) {
                std::ostringstream msg;
                msg << "train: epoch " << e + 1 << "/" << cfg.epochs << " mse " << st.mse << " fve " << st.fve
                    << " dead " << st.dead_latents;
                log(msg.str());
            });
            result.model.save(at(artifact::kSae));
            json epochs = json::array();
            for (const auto& st : result.report.epochs)
                epochs.push_back(
                    {{"mse", st.mse}, {"fve", st.fve}, {"dead_latents", st.dead_latents}, {"mean_l0", st.mean_l0}});
            write_text(at(artifact::kTrainReport), json{{"config", cfg},
                                                        {"epochs", std::move(epochs)},
                                                        {"loss_curve", result.report.loss_curve},
                                                        {"warnings", result.report.warnings}}
                                                       .dump(1));
        };
        stages.push_back(std::move(s));
    }
    {
        Stage s;
        s.name = "encode";
        s.inputs = {at(artifact::kFeaturesReal), at(artifact::kFeaturesGen), at(artifact::kIngest),
                    at(artifact::kSae)};
        s.outputs = {at(artifact::kCodesReal),        at(artifact::kCodesGen),       at(artifact::kEnergiesReal),
                     at(artifact::kEnergiesGen),      at(artifact::kMaxEnergiesReal), at(artifact::kMaxEnergiesGen)};
        s.fingerprint = {{"aggregation", aggregation_name(config.aggregation)}};
        s.action = [&] {
            auto ingest = read_json(at(artifact::kIngest));
            auto ids = ingest.at("caption_ids").get<std::vector<std::string>>();
            auto sae = rasae::SaeModel::load(at(artifact::kSae));
            auto run_side = [&](const char* features, const char* codes_out, const char* mean_out,
                                const char* max_out) {
                auto f = tensorio::read_feature_matrix(at(features));
                auto grouping = tensorio::grouping_for(f.rows(), ingest.at("tokens_per_image").get<std::size_t>());
                auto codes = rasae::encode(f, sae);
                codes.save(at(codes_out));
                concepts::save_energies(concepts::aggregate_energies(codes, grouping, config.aggregation, ids),
                                        at(mean_out));
                concepts::save_energies(concepts::aggregate_energies(codes, grouping, concepts::Aggregation::Max, ids),
                                        at(max_out));
            };
            run_side(artifact::kFeaturesReal, artifact::kCodesReal, artifact::kEnergiesReal,
                     artifact::kMaxEnergiesReal);
            run_side(artifact::kFeaturesGen, artifact::kCodesGen, artifact::kEnergiesGen, artifact::kMaxEnergiesGen);
        };
        stages.push_back(std::move(s));
    }
    {
        Stage s;
        s.name = "energy-diff";
        s.inputs = {at(artifact::kEnergiesReal), at(artifact::kEnergiesGen)};
        s.outputs = {at(artifact::kScores), at(artifact::kDistribution)};
        s.fingerprint = {{"thresholds", thresholds_json(config.thresholds)},
                         {"tail_temperature", config.tail_temperature}};
        s.action = [&] {
            auto real = concepts::load_energies(at(artifact::kEnergiesReal));
            auto gen = concepts::load_energies(at(artifact::kEnergiesGen));
            auto scores = concepts::energy_difference(real, gen, config.thresholds);
            concepts::save_scores(scores, at(artifact::kScores));
            write_text(at(artifact::kDistribution), distribution_report(scores, config.tail_temperature).dump(1));
        };
        stages.push_back(std::move(s));
    }
    {
        Stage s;
        s.name = "datapoint";
        s.enabled = config.pairs;
        s.inputs = {at(artifact::kEnergiesReal), at(artifact::kEnergiesGen)};
        s.outputs = {at(artifact::kPairs)};
        s.fingerprint = {{"temperature", config.thresholds.temperature}, {"top", config.pairs_top}};
        s.action = [&] {
            auto real = concepts::load_energies(at(artifact::kEnergiesReal));
            auto gen = concepts::load_energies(at(artifact::kEnergiesGen));
            auto divs = datapoint::pair_divergences(real, gen, config.thresholds.temperature);
            write_text(at(artifact::kPairs), pairs_report(divs, config.pairs_top).dump(1));
        };
        stages.push_back(std::move(s));
    }
    {
        Stage s;
        s.name = "cooccur";
        s.enabled = config.cooccur;
        s.inputs = {at(artifact::kCodesReal), at(artifact::kCodesGen)};
        s.outputs = {at(artifact::kCooccur), at(artifact::kCooccurMatrix)};
        s.fingerprint = {{"top", config.cooccur_top}, {"epsilons", config.epsilons}};
        s.action = [&] {
            auto real = rasae::SparseCodeMatrix::load(at(artifact::kCodesReal));
            auto gen = rasae::SparseCodeMatrix::load(at(artifact::kCodesGen));
            write_text(at(artifact::kCooccur), cooccur_report(real, gen, config.cooccur_top, config.epsilons).dump(1));
            write_cooccur_matrix(cooccur::cooccurrence(real), at(artifact::kCooccurMatrix));
        };
        stages.push_back(std::move(s));
    }
    {
        Stage s;
        s.name = "export";
        s.enabled = config.export_bundle;
        s.inputs = {at(artifact::kScores), at(artifact::kSae), at(artifact::kCooccurMatrix),
                    at(artifact::kMaxEnergiesReal), at(artifact::kMaxEnergiesGen)};
        s.outputs = {at(artifact::kBundle)};
        const auto created_at = explorer::created_at_from_env();
        s.fingerprint = {{"model", model},
                         {"thresholds", thresholds_json(config.thresholds)},
                         {"embedding", config.embedding},
                         {"exemplars", config.exemplars},
                         {"created_at", created_at},
                         {"thumbnail_dir", config.thumbnail_dir ? json(*config.thumbnail_dir) : json(nullptr)}};
        s.action = [&, model, created_at] {
            explorer::BundleInputs in;
            in.model_name = model;
            in.scores = concepts::load_scores(at(artifact::kScores));
            in.cooccurrence = read_cooccur_matrix(at(artifact::kCooccurMatrix));
            if (config.embedding == "atoms") {
                in.coordinates = explorer::embed_2d(rasae::SaeModel::load(at(artifact::kSae)).dictionary());
                in.embedding_method = "pca";
            } else {
                in.coordinates = explorer::embed_2d(RowMajorD(*in.cooccurrence));
                in.embedding_method = "pca-cooccurrence";
            }
            in.real_max_energies = concepts::load_energies(at(artifact::kMaxEnergiesReal));
            in.gen_max_energies = concepts::load_energies(at(artifact::kMaxEnergiesGen));
            in.thresholds = config.thresholds;
            in.created_at = created_at;
            in.thumbnail_dir = config.thumbnail_dir;
            in.exemplars = config.exemplars;
            explorer::write_bundle(explorer::export_bundle(in), at(artifact::kBundle));
        };
        stages.push_back(std::move(s));
    }

    json record = {{"config", run_config_to_json(config)}, {"model", model}, {"stages", json::array()},
                   {"failed_stage", nullptr}};
    for (const auto& s : stages) {
        json outs = json::array();
        for (const auto& o : s.outputs) outs.push_back(o.filename().string());
        record["stages"].push_back({{"name", s.name},
                                    {"status", s.enabled ? "pending" : "disabled"},
                                    {"fingerprint", s.fingerprint},
                                    {"outputs", std::move(outs)}});
    }
    auto flush = [&] { write_text(run_path, record.dump(1)); };

    RunResult result;
    result.run_manifest = run_path;
    std::set<fs::path> regenerated;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        auto& rec = record["stages"][i];
        if (!s.enabled) continue;
        auto prev = previous_stage(s.name);
        bool stale_input = std::any_of(s.inputs.begin(), s.inputs.end(),
                                       [&](const fs::path& p) { return regenerated.count(p) > 0; });
        bool reusable = !options.force && !stale_input && prev.is_object() && prev.value("status", "") != "failed" &&
                        prev.value("status", "") != "pending" && prev.contains("fingerprint") &&
                        prev["fingerprint"] == s.fingerprint && outputs_fresh(s);
        if (reusable) {
            rec["status"] = "skipped";
            log(s.name + ": up to date");
        } else {
            log(s.name + ": running");
            try {
                s.action();
            } catch (const std::exception& e) {
                rec["status"] = "failed";
                record["failed_stage"] = s.name;
                record["error"] = e.what();
                flush();
                throw;
            }
            rec["status"] = "ran";
            regenerated.insert(s.outputs.begin(), s.outputs.end());
        }
        result.stages.push_back({s.name, rec["status"].get<std::string>(), s.outputs});
        flush();
    }
    flush();
    return result;
}

} // namespace blindspot::pipeline
