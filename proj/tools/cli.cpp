#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "affect/config.hpp"
#include "affect/coupling.hpp"
#include "affect/csv.hpp"
#include "affect/relatedness.hpp"
#include "affect/synthdata.hpp"
#include "affect/trainer.hpp"
#include "affect/zeroshot.hpp"

namespace affect::cli {

namespace fs = std::filesystem;

namespace {

// Compound sample streams.
constexpr std::uint64_t kZeroShotStream = 1;
constexpr std::uint64_t kFineTuneTrainStream = 2;
constexpr std::uint64_t kFineTuneTestStream = 3;

// Wall-clock notes go to <out>/run.log only, never into reports.
class RunLog {
 public:
  explicit RunLog(const fs::path& dir) : path_(dir / "run.log") {}

  void note(const std::string& line) const {
    std::ofstream f(path_, std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    f << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << '\n';
  }

 private:
  fs::path path_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

ExperimentConfig config_from(const std::string& path) {
  if (path.empty()) {
    auto cfg = ExperimentConfig::benchmark();
    cfg.finalize();
    return cfg;
  }
  return load_experiment_config(path);
}

std::string seed_text(std::uint64_t s) { return std::to_string(s); }

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string input;
  std::string checkpoint;
  std::string preds;
  std::string classes;
  std::string table = "cognitive";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> generate_n;
  std::size_t compound_per_class = 0;
  double threshold = kDefaultInferenceThreshold;
  std::string split = "test";
  bool write_predictions = false;
  bool unweighted = false;
  bool weighted = false;
  bool no_valence = false;
  bool from_scratch = false;
};

std::uint64_t required_seed(const Options& o, std::string_view command) {
  if (!o.seed) {
    throw Error(ErrorKind::kValidation, std::string(command) + " requires --seed");
  }
  return *o.seed;
}

std::vector<std::string> class_names(const CompoundPredictionConfig& z) {
  std::vector<std::string> names;
  for (const auto& c : z.classes) names.push_back(c.name);
  return names;
}

// ---- subcommands -----------------------------------------------------------

int cmd_generate(const Options& o, std::ostream& out) {
  auto cfg = config_from(o.config);
  cfg.apply_seed(o.seed.value_or(0));
  const fs::path dir(o.out);
  make_dir(dir);
  Stopwatch clock;
  const auto data = generate(cfg.generator);
  save_datasets(data, dir);
  if (o.compound_per_class > 0) {
    const auto z = cfg.zero_shot_config();
    save_dataset(generate_compound(cfg.generator, z.classes, o.compound_per_class, kZeroShotStream),
                 dir / "compound.csv");
  }
  write_text_file(dir / "config.json", experiment_config_json(cfg));
  RunLog(dir).note("generate seed=" + seed_text(cfg.generator.seed) +
                   " wall_seconds=" + std::to_string(clock.seconds()));
  out << "wrote datasets to " << dir.string() << '\n';
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  auto cfg = config_from(o.config);
  cfg.apply_seed(required_seed(o, "train"));
  const fs::path dir(o.out);
  make_dir(dir);
  Stopwatch clock;
  const auto data = o.data.empty() ? generate(cfg.generator) : load_datasets(o.data);
  cfg.network.input_dim = data.feature_dim();
  Network net(cfg.network);
  auto report = train(net, data, cfg.train);
  score_report(net, data, report);
  write_text_file(dir / "config.json", experiment_config_json(cfg));
  write_text_file(dir / "losses.csv", report.loss_csv());
  write_text_file(dir / "metrics.csv", report.metrics_csv());
  save_checkpoint(net, dir / "checkpoint.json");
  RunLog(dir).note("train seed=" + seed_text(*o.seed) +
                   " wall_seconds=" + std::to_string(clock.seconds()));
  const auto& h = report.headline;
  out << "va ccc_mean " << format_double(h.va.value_or(0)) << ", expr score "
      << format_double(h.expr.value_or(0)) << ", au score " << format_double(h.au.value_or(0))
      << '\n';
  return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty()) throw Error(ErrorKind::kValidation, "evaluate requires --checkpoint");
  if (o.data.empty() == o.input.empty()) {
    throw Error(ErrorKind::kValidation, "evaluate needs exactly one of --data or --input");
  }
  if (o.split != "test" && o.split != "train") {
    throw Error(ErrorKind::kValidation, "--split must be test or train");
  }
  const auto net = load_checkpoint(o.checkpoint);
  const fs::path dir(o.out);
  make_dir(dir);
  std::vector<MetricRecord> records;
  auto score = [&](std::span<const Sample> samples, const std::string& split,
                   const std::string& pred_file) {
    const auto preds = predict(net, samples);
    evaluate_predictions(preds, samples).append_records(split, records);
    if (o.write_predictions) write_text_file(dir / pred_file, predictions_csv(preds));
  };
  if (!o.input.empty()) {
    score(load_dataset(o.input), "input", "predictions.csv");
  } else {
    const auto data = load_datasets(o.data);
    for (const auto s : kAllTaskSets) {
      const auto& pool = data.pool(s);
      const auto& samples = o.split == "test" ? pool.test : pool.train;
      if (samples.empty()) continue;
      const std::string name(task_set_name(s));
      score(samples, name + "_" + o.split, "predictions_" + name + ".csv");
    }
  }
  write_text_file(dir / "metrics.csv", metrics_csv(records));
  out << "wrote " << records.size() << " metrics to " << (dir / "metrics.csv").string() << '\n';
  return kOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  auto cfg = config_from(o.config);
  const auto seed = required_seed(o, "ablate");
  if (o.seeds) cfg.ablation_seeds = *o.seeds;
  if (o.jobs) cfg.ablation_jobs = *o.jobs;
  cfg.finalize();
  const fs::path dir(o.out);
  make_dir(dir);
  Stopwatch clock;
  const auto result = run_ablation(cfg.ablation(seed));
  write_text_file(dir / "config.json", experiment_config_json(cfg));
  write_text_file(dir / "runs.csv", result.runs_csv());
  write_text_file(dir / "summary.csv", result.summary_csv());
  std::ostringstream losses;
  losses << "variant,seed," << loss_csv_header() << '\n';
  for (const auto& r : result.runs) {
    for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
      losses << r.variant << ',' << r.seed << ',' << loss_csv_row(e + 1, r.epoch_losses[e]) << '\n';
    }
  }
  write_text_file(dir / "losses.csv", losses.str());
  RunLog(dir).note("ablate seed=" + seed_text(seed) + " seeds=" +
                   std::to_string(cfg.ablation_seeds) + " jobs=" +
                   std::to_string(cfg.ablation_jobs) +
                   " wall_seconds=" + std::to_string(clock.seconds()));
  out << result.summary_text();
  return kOk;
}

int cmd_infer_table(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<Sample> samples;
  if (o.generate_n) {
    auto cfg = config_from(o.config);
    cfg.apply_seed(required_seed(o, "infer-table --generate"));
    cfg.generator.n_full = *o.generate_n;
    cfg.generator.n_va = cfg.generator.n_au = cfg.generator.n_expr = 1;
    cfg.generator.n_test = 0;
    samples = generate(cfg.generator).full;
  } else if (!o.data.empty()) {
    const fs::path p(o.data);
    samples = load_dataset(fs::is_directory(p) ? p / "full.csv" : p);
  } else {
    throw Error(ErrorKind::kValidation, "infer-table needs --data or --generate");
  }
  const auto obs = au_observations(samples);
  if (obs.empty()) {
    throw Error(ErrorKind::kValidation, "no rows carry both an expression and all 17 AUs");
  }
  const auto inferred = infer_table(obs, o.threshold);
  for (const auto& w : inferred.warnings) err << "warning: " << w << '\n';
  const fs::path dir(o.out);
  make_dir(dir);
  save_table(inferred.table, dir / "table.json");
  out << "inferred table from " << obs.size() << " samples\n";
  return kOk;
}

int cmd_co_annotate(const Options& o, std::ostream& out) {
  if (o.data.empty()) throw Error(ErrorKind::kValidation, "co-annotate requires --data");
  const auto table = resolve_table(o.table);
  const auto samples = load_dataset(o.data);
  const bool weighted = !o.unweighted;
  std::ostringstream csv;
  csv << "row,emo,coannotated_emo";
  for (const auto e : kAllEmotions) csv << ",soft_" << emotion_name(e);
  for (const int id : kCanonicalAuIds) csv << ",target_au_" << id;
  csv << '\n';
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& s = samples[r];
    csv << r << ',';
    if (s.emotion != kNoLabel) csv << s.emotion;
    csv << ',';
    std::array<std::string, kNumAus> targets;
    if (s.has_au()) {
      AuVector active{};
      for (std::size_t k = 0; k < kNumAus; ++k) active[k] = s.au_mask[k] && s.au[k] ? 1 : 0;
      if (const auto e = co_annotate_aus_to_emotion(active, table)) csv << index_of(*e);
      const auto soft = soft_emotion_label(active, table, weighted);
      for (Eigen::Index i = 0; i < soft.size(); ++i) csv << ',' << format_double(soft(i));
    } else {
      for (std::size_t i = 0; i < kNumEmotions; ++i) csv << ',';
      if (s.emotion != kNoLabel && s.emotion < static_cast<int>(kNumEmotions)) {
        for (const auto& t :
             co_annotate_emotion_to_aus(emotion_at(static_cast<std::size_t>(s.emotion)), table,
                                        weighted)) {
          targets[*au_index(t.au)] = format_double(t.weight);
        }
      }
    }
    for (const auto& t : targets) csv << ',' << t;
    csv << '\n';
  }
  const fs::path dir(o.out);
  make_dir(dir);
  write_text_file(dir / "coannotated.csv", csv.str());
  out << "co-annotated " << samples.size() << " rows\n";
  return kOk;
}

CompoundPredictionConfig zero_shot_from(const Options& o, const ExperimentConfig& cfg) {
  CompoundPredictionConfig z;
  const auto table = o.config.empty() ? resolve_table(o.table) : cfg.train.coupling.table;
  z.classes = o.classes.empty() ? (o.config.empty() ? default_compound_classes(table)
                                                    : cfg.zero_shot_config().classes)
                                : load_compound_classes(o.classes, table);
  z.weighted = o.weighted || cfg.zero_shot.weighted;
  z.valence_term = !o.no_valence && cfg.zero_shot.valence_term;
  z.validate();
  return z;
}

void write_compound_metrics(const fs::path& file, const ConfusionStats& stats,
                            std::span<const std::string> names) {
  std::vector<MetricRecord> records;
  records.push_back({"compound", "mean_diagonal", "test", stats.mean_diagonal});
  records.push_back({"compound", "total_accuracy", "test", stats.total_accuracy});
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (std::isnan(stats.recalls[c])) continue;
    records.push_back({"compound", "recall_" + names[c], "test", stats.recalls[c]});
  }
  write_text_file(file, metrics_csv(records));
}

int cmd_zero_shot(const Options& o, std::ostream& out) {
  auto cfg = config_from(o.config);
  const auto z = zero_shot_from(o, cfg);
  const fs::path dir(o.out);
  make_dir(dir);
  if (!o.preds.empty()) {
    const auto preds = load_predictions(o.preds);
    const auto results = classify_all(preds, z);
    write_text_file(dir / "scores.csv", scores_csv(results, z));
    out << "scored " << preds.size() << " predictions\n";
    return kOk;
  }
  if (o.checkpoint.empty()) {
    throw Error(ErrorKind::kValidation, "zero-shot needs --preds or --checkpoint");
  }
  cfg.apply_seed(required_seed(o, "zero-shot --checkpoint"));
  const auto net = load_checkpoint(o.checkpoint);
  const auto samples =
      generate_compound(cfg.generator, z.classes, cfg.zero_shot.per_class, kZeroShotStream);
  const auto eval = evaluate_zero_shot(net, samples, z);
  write_text_file(dir / "scores.csv", scores_csv(eval.results, z));
  write_compound_metrics(dir / "metrics.csv", eval.stats, class_names(z));
  out << "mean diagonal " << format_double(eval.stats.mean_diagonal) << '\n';
  return kOk;
}

int cmd_fine_tune(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty()) throw Error(ErrorKind::kValidation, "fine-tune requires --checkpoint");
  auto cfg = config_from(o.config);
  cfg.apply_seed(required_seed(o, "fine-tune"));
  const auto z = zero_shot_from(o, cfg);
  auto pretrained = load_checkpoint(o.checkpoint);
  if (o.from_scratch) {
    auto nc = pretrained.config();
    nc.seed = derive_seed(*o.seed, 105);
    pretrained = Network(nc);
  }
  const fs::path dir(o.out);
  make_dir(dir);
  Stopwatch clock;
  const auto train_set = generate_compound(cfg.generator, z.classes,
                                           cfg.fine_tune.train_per_class, kFineTuneTrainStream);
  const auto test_set = generate_compound(cfg.generator, z.classes, cfg.fine_tune.test_per_class,
                                          kFineTuneTestStream);
  const auto names = class_names(z);
  const auto result = fine_tune_compound(pretrained, train_set, test_set, names, cfg.fine_tune.train);
  write_text_file(dir / "losses.csv", result.report.loss_csv());
  write_text_file(dir / "metrics.csv", result.report.metrics_csv());
  save_checkpoint(result.network, dir / "checkpoint.json");
  RunLog(dir).note("fine-tune seed=" + seed_text(*o.seed) +
                   " wall_seconds=" + std::to_string(clock.seconds()));
  out << "mean diagonal " << format_double(result.test_stats.mean_diagonal) << '\n';
  return kOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return kParseError;
    case ErrorKind::kValidation:
    case ErrorKind::kInvalidArgument: return kValidationError;
    case ErrorKind::kIo: return kIoError;
    case ErrorKind::kNumeric: return kNumericError;
    case ErrorKind::kState: return kInternalError;
  }
  return kInternalError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task affect model with coupled expression/AU losses on synthetic data"};
  app.name("affect");
  app.require_subcommand(1, 1);
  app.footer("Config file keys (JSON blocks; every key optional):\n" + config_reference() +
             "\nExit codes: 0 ok, 2 usage, 3 parse, 4 validation, 5 io, 6 numeric, 7 internal.");
  Options o;

  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", o.config, "experiment config JSON (default: built-in benchmark)");
  };
  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", o.out, "output directory")->required();
  };
  auto add_seed = [&](CLI::App* c, const std::string& what) {
    c->add_option("--seed", o.seed, what);
  };

  auto* gen = app.add_subcommand("generate", "write synthetic VA/AU/EXPR datasets");
  add_config(gen);
  add_out(gen);
  add_seed(gen, "master seed (default 0)");
  gen->add_option("--compound-per-class", o.compound_per_class,
                  "also write compound.csv with this many samples per compound class");

  auto* tr = app.add_subcommand("train", "train the joint network and report test metrics");
  add_config(tr);
  add_out(tr);
  add_seed(tr, "master seed (required)");
  tr->add_option("--data", o.data, "dataset directory from generate (default: generate in memory)");

  auto* ev = app.add_subcommand("evaluate", "score a checkpoint on datasets");
  add_out(ev);
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint.json from train")->required();
  ev->add_option("--data", o.data, "dataset directory; scores every pool");
  ev->add_option("--input", o.input, "single dataset CSV");
  ev->add_option("--split", o.split, "test or train (with --data)");
  ev->add_flag("--predictions", o.write_predictions, "also write prediction CSVs");

  auto* ab = app.add_subcommand("ablate", "coupling ablation grid with single-task baselines");
  add_config(ab);
  add_out(ab);
  add_seed(ab, "first grid seed (required)");
  ab->add_option("--seeds", o.seeds, "number of consecutive grid seeds");
  ab->add_option("--jobs", o.jobs, "parallel workers");

  auto* it = app.add_subcommand("infer-table", "infer a relatedness table from labeled samples");
  add_config(it);
  add_out(it);
  add_seed(it, "seed for --generate");
  it->add_option("--data", o.data, "dataset CSV (or directory holding full.csv)");
  it->add_option("--generate", o.generate_n, "generate this many fully labeled samples instead");
  it->add_option("--threshold", o.threshold, "minimum frequency for membership");

  auto* co = app.add_subcommand("co-annotate", "apply the co-annotation rules to a dataset CSV");
  add_out(co);
  co->add_option("--data", o.data, "dataset CSV")->required();
  co->add_option("--table", o.table, "cognitive, empirical or a table JSON file");
  co->add_flag("--unweighted", o.unweighted, "ignore agreement weights");

  auto* zs = app.add_subcommand("zero-shot", "zero-shot compound expression classification");
  add_config(zs);
  add_out(zs);
  add_seed(zs, "seed for compound samples (with --checkpoint)");
  zs->add_option("--preds", o.preds, "prediction CSV (emo_*, au_*, valence, arousal)");
  zs->add_option("--checkpoint", o.checkpoint, "score generated compound samples with this network");
  zs->add_option("--classes", o.classes, "compound class list JSON");
  zs->add_option("--table", o.table, "table for class AU sets without --config");
  zs->add_flag("--weighted", o.weighted, "p(AU|class) = w");
  zs->add_flag("--no-valence-term", o.no_valence, "disable the valence-sign term");

  auto* ft = app.add_subcommand("fine-tune", "fine-tune a K-way compound head on a small set");
  add_config(ft);
  add_out(ft);
  add_seed(ft, "master seed (required)");
  ft->add_option("--checkpoint", o.checkpoint, "pretrained checkpoint")->required();
  ft->add_option("--classes", o.classes, "compound class list JSON");
  ft->add_flag("--from-scratch", o.from_scratch, "use a randomly initialized trunk instead");

  std::vector<std::string> argv_store{"affect"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "affect: usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out);
    if (tr->parsed()) return cmd_train(o, out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    if (ab->parsed()) return cmd_ablate(o, out);
    if (it->parsed()) return cmd_infer_table(o, out, err);
    if (co->parsed()) return cmd_co_annotate(o, out);
    if (zs->parsed()) return cmd_zero_shot(o, out);
    if (ft->parsed()) return cmd_fine_tune(o, out);
  } catch (const Error& e) {
    err << "affect: " << error_kind_name(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "affect: internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUsage;
}

}  // namespace affect::cli
