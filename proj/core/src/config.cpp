#include "affect/config.hpp"

#include <functional>
#include <sstream>

#include "json.hpp"

#include "affect/csv.hpp"

namespace affect {

namespace {

using json = nlohmann::json;

struct Key {
  const char* block;
  const char* name;
  const char* type;
  const char* doc;
  std::function<void(ExperimentConfig&, const json&)> set;
  std::function<json(const ExperimentConfig&)> get;
};

[[noreturn]] void bad(const Key& k, const std::string& what) {
  throw Error(ErrorKind::kParse,
              std::string("config key ") + k.block + "." + k.name + ": " + what);
}

double as_real(const Key& k, const json& j) {
  if (!j.is_number()) bad(k, "expected a number");
  return j.get<double>();
}

std::size_t as_count(const Key& k, const json& j) {
  if (!j.is_number_unsigned()) bad(k, "expected a non-negative integer");
  return j.get<std::size_t>();
}

bool as_bool(const Key& k, const json& j) {
  if (!j.is_boolean()) bad(k, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const Key& k, const json& j) {
  if (!j.is_string()) bad(k, "expected a string");
  return j.get<std::string>();
}

#define REAL(block, name, field, doc)                                                   \
  Key {                                                                                \
    block, name, "real", doc,                                                          \
        [](ExperimentConfig& c, const json& j) { c.field = as_real(keys_for(block, name), j); }, \
        [](const ExperimentConfig& c) { return json(c.field); }                          \
  }
#define COUNT(block, name, field, doc)                                                   \
  Key {                                                                                 \
    block, name, "integer", doc,                                                        \
        [](ExperimentConfig& c, const json& j) { c.field = as_count(keys_for(block, name), j); }, \
        [](const ExperimentConfig& c) { return json(c.field); }                           \
  }
#define FLAG(block, name, field, doc)                                                   \
  Key {                                                                                \
    block, name, "bool", doc,                                                          \
        [](ExperimentConfig& c, const json& j) { c.field = as_bool(keys_for(block, name), j); }, \
        [](const ExperimentConfig& c) { return json(c.field); }                          \
  }
#define TEXT(block, name, field, doc)                                                     \
  Key {                                                                                  \
    block, name, "string", doc,                                                          \
        [](ExperimentConfig& c, const json& j) { c.field = as_string(keys_for(block, name), j); }, \
        [](const ExperimentConfig& c) { return json(c.field); }                            \
  }

const Key& keys_for(std::string_view block, std::string_view name);

const std::vector<Key>& keys() {
  static const std::vector<Key> all{
      COUNT("generator", "n_va", generator.n_va, "VA-Set training samples"),
      COUNT("generator", "n_au", generator.n_au, "AU-Set training samples"),
      COUNT("generator", "n_expr", generator.n_expr, "EXPR-Set training samples"),
      COUNT("generator", "n_test", generator.n_test, "held-out samples per pool"),
      COUNT("generator", "n_full", generator.n_full,
            "fully labeled samples (full.csv) for infer-table"),
      COUNT("generator", "feature_dim", generator.feature_dim, "feature vector width"),
      REAL("generator", "noise_sigma", generator.noise_sigma, "Gaussian feature noise"),
      REAL("generator", "au_background_rate", generator.au_background_rate,
           "activation rate of AUs not associated with the emotion, in [0, 0.5)"),
      COUNT("generator", "annotated_aus", generator.annotated_aus,
            "AUs annotated per AU-Set training sample (random subset)"),
      REAL("generator", "expr_va_overlap", generator.expr_va_overlap,
           "fraction of EXPR-Set samples that keep VA labels"),
      REAL("generator", "emotion_scale", generator.emotion_scale,
           "weight of the expression one-hot in the feature map"),
      REAL("generator", "va_scale", generator.va_scale, "weight of valence/arousal in the feature map"),
      REAL("generator", "au_scale", generator.au_scale, "weight of AU bits in the feature map"),
      TEXT("generator", "table", generator_table,
           "generating relatedness table: cognitive, empirical or a JSON file"),
      Key{"generator", "va_regions", "object",
          "per-emotion [valence, arousal, spread], e.g. {\"happiness\": [0.6, 0.35, 0.15]}",
          [](ExperimentConfig& c, const json& j) {
            const auto& k = keys_for("generator", "va_regions");
            if (!j.is_object()) bad(k, "expected an object");
            for (const auto& [name, v] : j.items()) {
              const auto e = parse_emotion(name);
              if (!e) bad(k, "unknown emotion '" + name + "'");
              if (!v.is_array() || v.size() != 3) bad(k, "expected [valence, arousal, spread]");
              c.generator.va_regions[index_of(*e)] = {as_real(k, v[0]), as_real(k, v[1]),
                                                      as_real(k, v[2])};
            }
          },
          [](const ExperimentConfig& c) {
            json out = json::object();
            for (const auto e : kAllEmotions) {
              const auto& r = c.generator.va_regions[index_of(e)];
              out[std::string(emotion_name(e))] = {r.valence, r.arousal, r.spread};
            }
            return out;
          }},

      Key{"network", "hidden_dims", "array",
          "widths of the tanh trunk layers",
          [](ExperimentConfig& c, const json& j) {
            const auto& k = keys_for("network", "hidden_dims");
            if (!j.is_array()) bad(k, "expected an array of widths");
            c.network.hidden_dims.clear();
            for (const auto& w : j) c.network.hidden_dims.push_back(as_count(k, w));
          },
          [](const ExperimentConfig& c) { return json(c.network.hidden_dims); }},
      REAL("network", "dropout_rate", network.dropout_rate, "dropout after each trunk layer"),

      REAL("train", "learning_rate", train.learning_rate, "SGD step size"),
      REAL("train", "momentum", train.momentum, "heavy-ball momentum in [0, 1)"),
      COUNT("train", "epochs", train.epochs, "training epochs"),
      COUNT("train", "iterations_per_epoch", train.iterations_per_epoch,
            "concatenated batches per epoch; per-pool batch size is pool size / iterations"),
      REAL("train", "lambda1", train.weights.lambda1, "AU loss weight"),
      REAL("train", "lambda2", train.weights.lambda2, "VA loss weight"),

      FLAG("coupling", "co_annotation", train.coupling.co_annotation,
           "hard co-annotation (train only; ablate sets it per variant)"),
      FLAG("coupling", "soft_co_annotation", train.coupling.soft_co_annotation,
           "soft co-annotation (train only)"),
      FLAG("coupling", "distribution_matching", train.coupling.distribution_matching,
           "distribution matching (train only)"),
      REAL("coupling", "mu_dm", train.weights.mu_dm, "distribution matching weight (train)"),
      REAL("coupling", "mu_sca", train.weights.mu_sca, "soft co-annotation weight (train)"),
      FLAG("coupling", "weighted_q", train.coupling.weighted_q,
           "use agreement weights in the AU mixture"),
      FLAG("coupling", "weighted_soft", train.coupling.weighted_soft,
           "use agreement weights in soft labels"),
      FLAG("coupling", "weighted_co_annotation", train.coupling.weighted_co_annotation,
           "weight co-annotated observational AU targets"),
      FLAG("coupling", "stop_gradient_q", train.coupling.stop_gradient_q,
           "treat the AU mixture as a constant target"),
      FLAG("coupling", "full_bernoulli_dm", train.coupling.full_bernoulli_dm,
           "add the (1 - p) log(1 - q) term to distribution matching"),
      TEXT("coupling", "table", coupling_table,
           "relatedness table used for coupling: cognitive, empirical or a JSON file"),

      COUNT("ablation", "seeds", ablation_seeds, "grid seeds (first one is --seed)"),
      REAL("ablation", "mu_dm", mu_dm, "distribution matching weight of the grid variants"),
      REAL("ablation", "mu_sca", mu_sca, "soft co-annotation weight of the grid variants"),
      FLAG("ablation", "single_task", ablation_single_task, "also run single-task baselines"),
      COUNT("ablation", "jobs", ablation_jobs, "parallel grid workers"),

      REAL("fine_tune", "learning_rate", fine_tune.train.learning_rate, "SGD step size"),
      REAL("fine_tune", "momentum", fine_tune.train.momentum, "heavy-ball momentum"),
      COUNT("fine_tune", "epochs", fine_tune.train.epochs, "passes over the small training set"),
      COUNT("fine_tune", "batch_size", fine_tune.train.batch_size, "mini-batch rows"),
      FLAG("fine_tune", "freeze_trunk", fine_tune.train.freeze_trunk, "update only the heads"),
      COUNT("fine_tune", "train_per_class", fine_tune.train_per_class,
            "compound training samples per class"),
      COUNT("fine_tune", "test_per_class", fine_tune.test_per_class,
            "compound test samples per class"),

      FLAG("zero_shot", "weighted", zero_shot.weighted, "p(AU|class) = w instead of 1"),
      FLAG("zero_shot", "valence_term", zero_shot.valence_term, "enable the valence-sign term"),
      COUNT("zero_shot", "per_class", zero_shot.per_class, "compound samples per class"),
      TEXT("zero_shot", "classes", zero_shot.classes, "default or a compound class list file"),
  };
  return all;
}

const Key& keys_for(std::string_view block, std::string_view name) {
  for (const auto& k : keys()) {
    if (block == k.block && name == k.name) return k;
  }
  throw Error(ErrorKind::kState, "unregistered config key");
}

#undef REAL
#undef COUNT
#undef FLAG
#undef TEXT

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

RelatednessTable resolve_table(std::string_view source, const std::filesystem::path& base_dir) {
  if (source == "cognitive") return cognitive_table();
  if (source == "empirical") return empirical_table();
  return load_table(resolve(std::filesystem::path(source), base_dir));
}

ExperimentConfig ExperimentConfig::benchmark() {
  ExperimentConfig c;
  c.generator.emotion_scale = 0.3;
  c.generator.va_scale = 0.3;
  c.train.learning_rate = 0.05;
  c.train.epochs = 20;
  c.train.iterations_per_epoch = 10;
  c.mu_dm = 0.005;
  c.mu_sca = 0.1;
  return c;
}

void ExperimentConfig::finalize() {
  generator.table = resolve_table(generator_table, base_dir);
  train.coupling.table = resolve_table(coupling_table, base_dir);
  network.input_dim = generator.feature_dim;
  network.emotion_classes = kNumEmotions;
  generator.validate();
  network.validate();
  train.validate();
  if (ablation_seeds < 1) throw Error(ErrorKind::kValidation, "ablation: seeds must be >= 1");
  if (!(mu_dm >= 0.0 && mu_sca >= 0.0)) {
    throw Error(ErrorKind::kValidation, "ablation: coupling weights must be >= 0");
  }
  if (fine_tune.train_per_class < 1 || fine_tune.test_per_class < 1) {
    throw Error(ErrorKind::kValidation, "fine_tune: per-class counts must be >= 1");
  }
  if (zero_shot.per_class < 1) throw Error(ErrorKind::kValidation, "zero_shot: per_class must be >= 1");
}

void ExperimentConfig::apply_seed(std::uint64_t seed) {
  generator.seed = seed;
  network.seed = derive_seed(seed, 101);
  train.seed = derive_seed(seed, 102);
  fine_tune.train.seed = derive_seed(seed, 104);
}

AblationConfig ExperimentConfig::ablation(std::uint64_t first_seed) const {
  AblationConfig a;
  a.generator = generator;
  a.network = network;
  a.train = train;
  a.seeds.clear();
  for (std::size_t i = 0; i < ablation_seeds; ++i) a.seeds.push_back(first_seed + i);
  a.mu_dm = mu_dm;
  a.mu_sca = mu_sca;
  a.single_task = ablation_single_task;
  a.jobs = ablation_jobs;
  return a;
}

CompoundPredictionConfig ExperimentConfig::zero_shot_config() const {
  CompoundPredictionConfig z;
  z.classes = zero_shot.classes == "default"
                  ? default_compound_classes(train.coupling.table)
                  : load_compound_classes(resolve(zero_shot.classes, base_dir), train.coupling.table);
  z.weighted = zero_shot.weighted;
  z.valence_term = zero_shot.valence_term;
  z.validate();
  return z;
}

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "config: top level must be an object");
  ExperimentConfig cfg = ExperimentConfig::benchmark();
  cfg.base_dir = base_dir;
  for (const auto& [block, body] : doc.items()) {
    if (!body.is_object()) {
      throw Error(ErrorKind::kParse, "config block '" + block + "' must be an object");
    }
    bool known_block = false;
    for (const auto& k : keys()) known_block = known_block || block == k.block;
    if (!known_block) throw Error(ErrorKind::kValidation, "unknown config block '" + block + "'");
    for (const auto& [name, value] : body.items()) {
      const Key* key = nullptr;
      for (const auto& k : keys()) {
        if (block == k.block && name == k.name) key = &k;
      }
      if (key == nullptr) {
        throw Error(ErrorKind::kValidation, "unknown config key '" + block + "." + name + "'");
      }
      key->set(cfg, value);
    }
  }
  cfg.finalize();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path), path.parent_path());
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json doc = json::object();
  for (const auto& k : keys()) doc[k.block][k.name] = k.get(cfg);
  return doc.dump(2) + "\n";
}

std::string config_reference() {
  const auto defaults = ExperimentConfig::benchmark();
  std::ostringstream out;
  for (const auto& k : keys()) {
    const std::string key = std::string(k.block) + "." + k.name;
    out << "  " << key << std::string(key.size() < 34 ? 34 - key.size() : 1, ' ') << k.type
        << std::string(9 - std::string_view(k.type).size(), ' ') << k.doc << " (default "
        << k.get(defaults).dump() << ")\n";
  }
  return out.str();
}

}  // namespace affect
