#include "blindspot/rasae/config.hpp"

#include <cmath>

#include "blindspot/error.hpp"

namespace blindspot::rasae {

std::vector<std::string> SaeConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Validation, "SAE config: " + msg); };
    if (input_dim < 1) {
        fail("input_dim must be >= 1");
    }
    if (n_concepts < 1) {
        fail("n_concepts must be >= 1");
    }
    if (top_k < 1 || top_k > n_concepts) {
        fail("top_k must lie in [1, n_concepts]");
    }
    if (batch_size < 1) {
        fail("batch_size must be >= 1");
    }
    if (!(lr_max > 0.0) || !(lr_final >= 0.0) || lr_final > lr_max) {
        fail("need 0 <= lr_final <= lr_max, lr_max > 0");
    }
    if (!(warmup_frac >= 0.0 && warmup_frac <= 1.0)) {
        fail("warmup_frac must lie in [0, 1]");
    }
    if (!(weight_decay >= 0.0) || !(aux_lambda >= 0.0) || !(relaxation_bound >= 0.0)) {
        fail("weight_decay, aux_lambda and relaxation_bound must be >= 0");
    }
    if (archetypal && anchor_count() < 1) {
        fail("archetypal dictionary needs at least one anchor");
    }
    std::vector<std::string> warnings;
    if (archetypal && anchor_count() < n_concepts) {
        warnings.push_back("anchors (" + std::to_string(anchor_count()) + ") < n_concepts (" +
                           std::to_string(n_concepts) + ")");
    }
    if (2 * top_k > n_concepts) {
        warnings.push_back("top_k is not small relative to n_concepts");
    }
    return warnings;
}

void to_json(nlohmann::json& j, const SaeConfig& c)
{
    j = {{"input_dim", c.input_dim},
         {"n_concepts", c.n_concepts},
         {"top_k", c.top_k},
         {"archetypal", c.archetypal},
         {"anchors", c.anchors},
         {"anchor_strategy", c.anchor_strategy == AnchorStrategy::KMeans ? "kmeans" : "random"},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"lr_max", c.lr_max},
         {"lr_final", c.lr_final},
         {"warmup_frac", c.warmup_frac},
         {"weight_decay", c.weight_decay},
         {"aux_lambda", c.aux_lambda},
         {"aux_k", c.aux_k},
         {"dead_steps_threshold", c.dead_steps_threshold},
         {"seed", c.seed},
         {"relaxation_bound", c.relaxation_bound}};
}

void from_json(const nlohmann::json& j, SaeConfig& c)
{
    SaeConfig d;
    c.input_dim = j.value("input_dim", d.input_dim);
    c.n_concepts = j.value("n_concepts", d.n_concepts);
    c.top_k = j.value("top_k", d.top_k);
    c.archetypal = j.value("archetypal", d.archetypal);
    c.anchors = j.value("anchors", d.anchors);
    const auto strategy = j.value("anchor_strategy", std::string("kmeans"));
    if (strategy != "kmeans" && strategy != "random") {
        throw Error(ErrorKind::Validation, "unknown anchor_strategy '" + strategy + "'");
    }
    c.anchor_strategy = strategy == "kmeans" ? AnchorStrategy::KMeans : AnchorStrategy::Random;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr_max = j.value("lr_max", d.lr_max);
    c.lr_final = j.value("lr_final", d.lr_final);
    c.warmup_frac = j.value("warmup_frac", d.warmup_frac);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.aux_lambda = j.value("aux_lambda", d.aux_lambda);
    c.aux_k = j.value("aux_k", d.aux_k);
    c.dead_steps_threshold = j.value("dead_steps_threshold", d.dead_steps_threshold);
    c.seed = j.value("seed", d.seed);
    c.relaxation_bound = j.value("relaxation_bound", d.relaxation_bound);
}

} // namespace blindspot::rasae
