#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/cooccur/cooccur.hpp"
#include "blindspot/datapoint/datapoint.hpp"
#include "blindspot/error.hpp"
#include "blindspot/explorer/explorer.hpp"
#include "blindspot/interp/interp.hpp"
#include "blindspot/pipeline/pipeline.hpp"
#include "blindspot/rasae/model.hpp"
#include "blindspot/rasae/trainer.hpp"
#include "blindspot/synthdgp/synthdgp.hpp"
#include "blindspot/tensorio/cbfm.hpp"
#include "blindspot/theory/theory.hpp"

#include "CLI11.hpp"

namespace bs = blindspot;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_line(const std::string& s)
{
    std::cerr << s << '\n';
}

void emit(const json& j, const std::string& out)
{
    if (out.empty() || out == "-") {
        std::cout << j.dump(1) << '\n';
        return;
    }
    bs::pipeline::write_text(out, j.dump(1));
}

bs::concepts::Aggregation parse_aggregation(const std::string& s)
{
    if (s == "mean") return bs::concepts::Aggregation::Mean;
    if (s == "max") return bs::concepts::Aggregation::Max;
    throw bs::Error(bs::ErrorKind::Argument, "aggregation must be mean or max");
}

std::map<std::size_t, double> parse_plants(const std::vector<std::string>& items)
{
    std::map<std::size_t, double> out;
    for (const auto& item : items) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw bs::Error(bs::ErrorKind::Argument, "--plant expects concept=multiplier");
        try {
            out[std::stoul(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
        } catch (const std::logic_error&) {
            throw bs::Error(bs::ErrorKind::Argument, "--plant: cannot parse \"" + item + "\"");
        }
    }
    return out;
}

struct ThresholdOpts {
    double lambda_min = 0.1;
    double lambda_max = 0.9;
    double temperature = 0.8;

    void add(CLI::App* app)
    {
        app->add_option("--lambda-min", lambda_min, "Suppressed below this ediff")->capture_default_str();
        app->add_option("--lambda-max", lambda_max, "Exaggerated above this ediff")->capture_default_str();
        app->add_option("--temperature", temperature, "Sigmoid temperature")->capture_default_str();
    }
    bs::concepts::Thresholds get() const
    {
        bs::concepts::Thresholds t{lambda_min, lambda_max, temperature};
        t.validate();
        return t;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Concept-level blindspot analysis of generative image models"};
    app.require_subcommand(1);
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "Worker threads for parallel stages")->capture_default_str();

    // run
    auto* run = app.add_subcommand("run", "Run the full pipeline from a JSON run config");
    std::string run_config;
    bool force = false;
    std::optional<std::uint64_t> seed_override;
    std::string out_override, model_override;
    run->add_option("config", run_config, "Run config (JSON)")->required();
    run->add_flag("--force", force, "Rerun every stage");
    run->add_option("--seed", seed_override, "Override the root seed");
    run->add_option("--out", out_override, "Override the output directory");
    run->add_option("--model", model_override, "Override the generator model");

    // train-sae
    auto* train = app.add_subcommand("train-sae", "Train a sparse autoencoder on a feature matrix");
    std::string train_features, train_config, train_out, train_report;
    bs::rasae::SaeConfig sae_cfg;
    train->add_option("--features", train_features, "Feature matrix (CBFM)")->required();
    train->add_option("--config", train_config, "SaeConfig JSON; flags below override it");
    train->add_option("--concepts", sae_cfg.n_concepts, "Number of latents");
    train->add_option("--top-k", sae_cfg.top_k, "Active latents per row");
    train->add_option("--epochs", sae_cfg.epochs, "Training epochs");
    train->add_option("--seed", sae_cfg.seed, "Seed");
    train->add_option("--out", train_out, "Model output (CBFM)")->required();
    train->add_option("--report", train_report, "Training report JSON");

    // encode
    auto* encode = app.add_subcommand("encode", "Encode features into sparse codes and per-image energies");
    std::string enc_sae, enc_features, enc_codes, enc_energies, enc_aggregation = "mean";
    std::size_t enc_tokens = 1;
    encode->add_option("--sae", enc_sae, "Trained model (CBFM)")->required();
    encode->add_option("--features", enc_features, "Feature matrix (CBFM)")->required();
    encode->add_option("--tokens-per-image", enc_tokens, "Rows per image")->capture_default_str();
    encode->add_option("--codes", enc_codes, "Sparse codes output")->required();
    encode->add_option("--energies", enc_energies, "Per-image energies output");
    encode->add_option("--aggregation", enc_aggregation, "mean or max")->capture_default_str();

    // energy-diff
    auto* ediff = app.add_subcommand("energy-diff", "Score concepts from real and generated energies");
    std::string ed_real, ed_gen, ed_out, ed_dist;
    double tail_temperature = 0.4;
    ThresholdOpts ed_th;
    ediff->add_option("--real", ed_real, "Real energies (CBFM)")->required();
    ediff->add_option("--gen", ed_gen, "Generated energies (CBFM)")->required();
    ediff->add_option("--out", ed_out, "Scores JSON")->required();
    ediff->add_option("--distribution", ed_dist, "Histogram, skewness and frequency analysis JSON");
    ediff->add_option("--tail-temperature", tail_temperature, "Temperature for the tail analysis")
        ->capture_default_str();
    ed_th.add(ediff);

    // pairs
    auto* pairs = app.add_subcommand("pairs", "Per-pair divergence between real and generated energies");
    std::string pr_real, pr_gen, pr_out;
    std::size_t pr_top = 20;
    double pr_temperature = 0.8;
    pairs->add_option("--real", pr_real, "Real energies (CBFM)")->required();
    pairs->add_option("--gen", pr_gen, "Generated energies (CBFM)")->required();
    pairs->add_option("--out", pr_out, "Output JSON (- for stdout)");
    pairs->add_option("--top", pr_top, "Extreme pairs to list on each end")->capture_default_str();
    pairs->add_option("--temperature", pr_temperature, "Sigmoid temperature")->capture_default_str();

    // cooccur
    auto* cooc = app.add_subcommand("cooccur", "Compare concept co-occurrence of real and generated codes");
    std::string co_real, co_gen, co_out, co_matrix;
    std::size_t co_top = 100;
    std::vector<double> co_eps{0.0, 0.1, 1.0, 10.0};
    cooc->add_option("--real", co_real, "Real sparse codes (CBFM)")->required();
    cooc->add_option("--gen", co_gen, "Generated sparse codes (CBFM)")->required();
    cooc->add_option("--out", co_out, "Report JSON (- for stdout)");
    cooc->add_option("--matrix", co_matrix, "Write the real co-occurrence matrix (CBFM)");
    cooc->add_option("--top", co_top, "Eigenpairs to compare")->capture_default_str();
    cooc->add_option("--epsilons", co_eps, "Ascending thresholds for the L0 curve");

    // verify-theorems
    auto* verify = app.add_subcommand("verify-theorems", "Numerically check the analytic guarantees");
    bs::theory::SuiteOptions suite;
    std::string vt_out;
    verify->add_option("--trials", suite.trials, "Monte Carlo trials")->capture_default_str();
    verify->add_option("--seed", suite.seed, "Seed")->capture_default_str();
    verify->add_option("--out", vt_out, "Report JSON (- for stdout)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset with planted blindspots");
    std::string sim_spec, sim_out;
    std::size_t sim_images = 1000, sim_k = 64, sim_d = 256, sim_t = 1;
    double sim_rate = 0.05, sim_mag = 20.0;
    std::uint64_t sim_seed = 0;
    std::vector<std::string> sim_plant;
    std::string sim_model = "synth";
    sim->add_option("--spec", sim_spec, "DGP spec JSON; replaces the shape flags");
    sim->add_option("--images", sim_images, "Images per side")->capture_default_str();
    sim->add_option("--concepts", sim_k, "True concepts")->capture_default_str();
    sim->add_option("--dim", sim_d, "Feature dimension")->capture_default_str();
    sim->add_option("--rate", sim_rate, "Base activation rate")->capture_default_str();
    sim->add_option("--magnitude", sim_mag, "Mean active energy")->capture_default_str();
    sim->add_option("--tokens-per-image", sim_t, "Rows per image")->capture_default_str();
    sim->add_option("--plant", sim_plant, "concept=multiplier for generated data (repeatable)");
    sim->add_option("--seed", sim_seed, "Seed")->capture_default_str();
    sim->add_option("--model", sim_model, "Generator model name")->capture_default_str();
    sim->add_option("--out-dir", sim_out, "Output directory")->required();

    // export
    auto* exp = app.add_subcommand("export", "Assemble an explorer bundle from a run directory");
    std::string ex_dir, ex_out, ex_model, ex_embedding = "atoms", ex_thumbs;
    std::size_t ex_exemplars = 8;
    ThresholdOpts ex_th;
    exp->add_option("--run-dir", ex_dir, "Directory holding pipeline artifacts")->required();
    exp->add_option("--out", ex_out, "Bundle JSON")->required();
    exp->add_option("--model", ex_model, "Model name recorded in the bundle")->required();
    exp->add_option("--embedding", ex_embedding, "atoms or cooccurrence")->capture_default_str();
    exp->add_option("--thumbnail-dir", ex_thumbs, "Exemplar thumbnail directory");
    exp->add_option("--exemplars", ex_exemplars, "Exemplars per concept")->capture_default_str();
    ex_th.add(exp);

    // interp
    auto* interp = app.add_subcommand("interp", "Exemplar masking and concept descriptions");
    interp->require_subcommand(1);
    auto* mask = interp->add_subcommand("mask", "Mask an image to the regions where a concept fires");
    std::string mk_image, mk_codes, mk_out;
    std::size_t mk_tokens = 1, mk_index = 0, mk_concept = 0, mk_h = 0, mk_w = 0;
    double mk_q = 0.7;
    mask->add_option("--image", mk_image, "PNG image")->required();
    mask->add_option("--codes", mk_codes, "Sparse codes (CBFM)")->required();
    mask->add_option("--tokens-per-image", mk_tokens, "Rows per image")->required();
    mask->add_option("--image-index", mk_index, "Image index within the codes")->required();
    mask->add_option("--concept", mk_concept, "Concept id")->required();
    mask->add_option("--grid-h", mk_h, "Token grid height")->required();
    mask->add_option("--grid-w", mk_w, "Token grid width")->required();
    mask->add_option("--quantile", mk_q, "Activation quantile kept visible")->capture_default_str();
    mask->add_option("--out", mk_out, "Masked PNG")->required();
    auto* describe = interp->add_subcommand("describe", "Ask a vision-language model to name a concept");
    bs::interp::VlmConfig vlm;
    std::vector<std::string> ds_images;
    std::string ds_out;
    long timeout_ms = 30000;
    describe->add_option("--endpoint", vlm.endpoint, "Chat-completions URL")->required();
    describe->add_option("--model", vlm.model, "Model name")->capture_default_str();
    describe->add_option("--api-key-env", vlm.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    describe->add_option("--prompt", vlm.prompt, "Prompt sent with each exemplar");
    describe->add_option("--timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str();
    describe->add_option("--retries", vlm.max_retries, "Retries per request")->capture_default_str();
    describe->add_option("--images", ds_images, "Masked exemplar PNGs")->required();
    describe->add_option("--out", ds_out, "Description JSON (- for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            auto cfg = bs::pipeline::load_run_config(run_config);
            if (seed_override) cfg.seed = *seed_override;
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (!model_override.empty()) cfg.model = model_override;
            bs::pipeline::RunOptions opts;
            opts.force = force;
            opts.log = log_line;
            auto result = bs::pipeline::run_pipeline(cfg, opts);
            for (const auto& s : result.stages) std::cout << s.name << '\t' << s.status << '\n';
            std::cout << "manifest\t" << result.run_manifest.string() << '\n';
        } else if (*train) {
            bs::rasae::SaeConfig cfg;
            if (!train_config.empty()) cfg = bs::pipeline::read_json(train_config).get<bs::rasae::SaeConfig>();
            auto features = bs::tensorio::read_feature_matrix(train_features);
            if (cfg.input_dim == 0) cfg.input_dim = features.cols();
            if (train->count("--concepts")) cfg.n_concepts = sae_cfg.n_concepts;
            if (train->count("--top-k")) cfg.top_k = sae_cfg.top_k;
            if (train->count("--epochs")) cfg.epochs = sae_cfg.epochs;
            if (train->count("--seed")) cfg.seed = sae_cfg.seed;
            for (const auto& w : cfg.validate()) log_line("warning: " + w);
            auto result = bs::rasae::train(features, cfg, [&](std::size_t e, const bs::rasae::EpochStats& s) {
                log_line("epoch " + std::to_string(e + 1) + " mse " + std::to_string(s.mse) + " fve " +
                         std::to_string(s.fve) + " dead " + std::to_string(s.dead_latents));
            });
            result.model.save(train_out);
            if (!train_report.empty()) {
                json epochs = json::array();
                for (const auto& s : result.report.epochs)
                    epochs.push_back(
                        {{"mse", s.mse}, {"fve", s.fve}, {"dead_latents", s.dead_latents}, {"mean_l0", s.mean_l0}});
                emit({{"config", cfg}, {"epochs", epochs}, {"warnings", result.report.warnings}}, train_report);
            }
        } else if (*encode) {
            auto model = bs::rasae::SaeModel::load(enc_sae);
            auto features = bs::tensorio::read_feature_matrix(enc_features);
            auto grouping = bs::tensorio::grouping_for(features.rows(), enc_tokens);
            auto codes = bs::rasae::encode(features, model);
            codes.save(enc_codes);
            if (!enc_energies.empty())
                bs::concepts::save_energies(
                    bs::concepts::aggregate_energies(codes, grouping, parse_aggregation(enc_aggregation)),
                    enc_energies);
        } else if (*ediff) {
            auto real = bs::concepts::load_energies(ed_real);
            auto gen = bs::concepts::load_energies(ed_gen);
            auto scores = bs::concepts::energy_difference(real, gen, ed_th.get());
            bs::concepts::save_scores(scores, ed_out);
            if (!ed_dist.empty()) emit(bs::pipeline::distribution_report(scores, tail_temperature), ed_dist);
        } else if (*pairs) {
            auto real = bs::concepts::load_energies(pr_real);
            auto gen = bs::concepts::load_energies(pr_gen);
            emit(bs::pipeline::pairs_report(bs::datapoint::pair_divergences(real, gen, pr_temperature), pr_top),
                 pr_out);
        } else if (*cooc) {
            auto real = bs::rasae::SparseCodeMatrix::load(co_real);
            auto gen = bs::rasae::SparseCodeMatrix::load(co_gen);
            emit(bs::pipeline::cooccur_report(real, gen, co_top, co_eps), co_out);
            if (!co_matrix.empty()) {
                bs::tensorio::SectionedFile f;
                f.put_json("meta", {{"kind", "cooccurrence"}});
                f.put_f64("cooccurrence", bs::tensorio::RowMajorD(bs::cooccur::cooccurrence(real)));
                f.write(co_matrix);
            }
        } else if (*verify) {
            auto report = bs::theory::verify_theorems(suite);
            emit(report, vt_out);
            if (!report.value("pass", false)) {
                log_line("theorem verification failed");
                return bs::exit_code_for(bs::ErrorKind::Numeric);
            }
        } else if (*sim) {
            bs::synthdgp::DgpSpec spec = sim_spec.empty()
                                             ? bs::synthdgp::make_spec(sim_k, sim_d, sim_rate, sim_mag,
                                                                       parse_plants(sim_plant), sim_t, sim_seed)
                                             : bs::synthdgp::load_spec(sim_spec);
            fs::create_directories(sim_out);
            auto paths = bs::synthdgp::write_fixture(spec, sim_images, sim_out, sim_model);
            bs::synthdgp::save_spec(spec, fs::path(sim_out) / "spec.json");
            emit({{"manifest", paths.manifest.string()},
                  {"real", paths.real.string()},
                  {"gen", paths.gen.string()},
                  {"oracle_delta", bs::synthdgp::oracle_delta(spec)}},
                 (fs::path(sim_out) / "oracle.json").string());
            std::cout << paths.manifest.string() << '\n';
        } else if (*exp) {
            namespace art = bs::pipeline::artifact;
            fs::path dir = ex_dir;
            bs::explorer::BundleInputs in;
            in.model_name = ex_model;
            in.thresholds = ex_th.get();
            in.created_at = bs::explorer::created_at_from_env();
            in.exemplars = ex_exemplars;
            if (!ex_thumbs.empty()) in.thumbnail_dir = ex_thumbs;
            auto have = [&](const char* name) { return fs::exists(dir / name); };
            if (have(art::kScores)) in.scores = bs::concepts::load_scores(dir / art::kScores);
            if (have(art::kCooccurMatrix))
                in.cooccurrence =
                    bs::tensorio::SectionedFile::read(dir / art::kCooccurMatrix).get_f64("cooccurrence");
            if (ex_embedding == "atoms") {
                if (have(art::kSae))
                    in.coordinates = bs::explorer::embed_2d(bs::rasae::SaeModel::load(dir / art::kSae).dictionary());
            } else if (ex_embedding == "cooccurrence") {
                if (in.cooccurrence) in.coordinates = bs::explorer::embed_2d(bs::tensorio::RowMajorD(*in.cooccurrence));
                in.embedding_method = "pca-cooccurrence";
            } else {
                throw bs::Error(bs::ErrorKind::Argument, "embedding must be atoms or cooccurrence");
            }
            if (have(art::kMaxEnergiesReal))
                in.real_max_energies = bs::concepts::load_energies(dir / art::kMaxEnergiesReal);
            if (have(art::kMaxEnergiesGen))
                in.gen_max_energies = bs::concepts::load_energies(dir / art::kMaxEnergiesGen);
            bs::explorer::write_bundle(bs::explorer::export_bundle(in), ex_out);
        } else if (*mask) {
            auto image = bs::interp::read_png(mk_image);
            auto codes = bs::rasae::SparseCodeMatrix::load(mk_codes);
            auto grouping = bs::tensorio::grouping_for(codes.rows(), mk_tokens);
            auto map = bs::interp::activation_map(codes, grouping, mk_index, mk_concept, mk_h, mk_w,
                                                  std::to_string(mk_index));
            bs::interp::write_png(bs::interp::alpha_mask(image, map, mk_q), mk_out);
        } else if (*describe) {
            vlm.timeout = std::chrono::milliseconds(timeout_ms);
            vlm.concurrency = threads;
            vlm.log = log_line;
            std::vector<bs::interp::Bitmap> exemplars;
            for (const auto& p : ds_images) exemplars.push_back(bs::interp::read_png(p));
            auto d = bs::interp::describe_concept(exemplars, vlm);
            emit({{"text", d.text}, {"per_exemplar", d.per_exemplar}, {"retries", d.retries}}, ds_out);
        }
    } catch (const bs::Error& e) {
        std::cerr << "error (" << bs::to_string(e.kind()) << "): " << e.what() << '\n';
        return bs::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
