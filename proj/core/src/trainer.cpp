#include "affect/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "affect/csv.hpp"

namespace affect {

namespace {

using Index = Eigen::Index;

// Stream tags for derive_seed.
constexpr std::uint64_t kStreamDropout = 11;
constexpr std::uint64_t kStreamEpoch = 12;
constexpr std::uint64_t kStreamNetwork = 101;
constexpr std::uint64_t kStreamTrain = 102;
constexpr std::uint64_t kStreamFineTune = 103;

Matrix features_of(std::span<const Sample> samples) {
  const std::size_t dim = samples.empty() ? 0 : samples.front().features.size();
  Matrix x(static_cast<Index>(samples.size()), static_cast<Index>(dim));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r].features.size() != dim) {
      throw Error(ErrorKind::kInvalidArgument, "ragged feature dimensions");
    }
    for (std::size_t i = 0; i < dim; ++i) {
      x(static_cast<Index>(r), static_cast<Index>(i)) = samples[r].features[i];
    }
  }
  return x;
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.l_emo) && std::isfinite(b.l_au) && std::isfinite(b.l_va) &&
         std::isfinite(b.l_dm) && std::isfinite(b.l_sca) && std::isfinite(b.total);
}

void add_into(LossBreakdown& acc, const LossBreakdown& b) {
  acc.l_emo += b.l_emo;
  acc.l_au += b.l_au;
  acc.l_va += b.l_va;
  acc.l_dm += b.l_dm;
  acc.l_sca += b.l_sca;
  acc.total += b.total;
  acc.has_emo = acc.has_emo || b.has_emo;
  acc.has_au = acc.has_au || b.has_au;
  acc.has_va = acc.has_va || b.has_va;
  acc.has_dm = acc.has_dm || b.has_dm;
  acc.has_sca = acc.has_sca || b.has_sca;
}

void scale(LossBreakdown& b, double s) {
  b.l_emo *= s;
  b.l_au *= s;
  b.l_va *= s;
  b.l_dm *= s;
  b.l_sca *= s;
  b.total *= s;
}

std::string describe(const LossBreakdown& b) {
  std::ostringstream out;
  out << "l_emo=" << b.l_emo << " l_au=" << b.l_au << " l_va=" << b.l_va << " l_dm=" << b.l_dm
      << " l_sca=" << b.l_sca << " total=" << b.total;
  return out.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error(ErrorKind::kValidation, "train: learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorKind::kValidation, "train: momentum must lie in [0, 1)");
  }
  if (epochs < 1) throw Error(ErrorKind::kValidation, "train: epochs must be >= 1");
  if (iterations_per_epoch < 1) {
    throw Error(ErrorKind::kValidation, "train: iterations_per_epoch must be >= 1");
  }
  if (!(active_pools[0] || active_pools[1] || active_pools[2])) {
    throw Error(ErrorKind::kValidation, "train: no active pool");
  }
  weights.validate();
}

void TaskMetrics::append_records(std::string_view split, std::vector<MetricRecord>& out) const {
  const std::string s(split);
  if (va) {
    out.push_back({"va", "ccc_valence", s, va->ccc_valence});
    out.push_back({"va", "ccc_arousal", s, va->ccc_arousal});
    out.push_back({"va", "ccc_mean", s, va->ccc_mean()});
  }
  if (expr) {
    out.push_back({"expr", "total_accuracy", s, expr->stats.total_accuracy});
    out.push_back({"expr", "mean_diagonal", s, expr->stats.mean_diagonal});
    out.push_back({"expr", "uar", s, expr->stats.uar});
    out.push_back({"expr", "mean_f1", s, expr->stats.mean_f1});
    out.push_back({"expr", "expr_score", s, expr->expr_score});
  }
  if (au) {
    for (std::size_t k = 0; k < au->per_au_f1.size(); ++k) {
      if (std::isnan(au->per_au_f1[k])) continue;
      const auto id = std::to_string(kCanonicalAuIds[k]);
      out.push_back({"au", "f1_au" + id, s, au->per_au_f1[k]});
      out.push_back({"au", "acc_au" + id, s, au->per_au_acc[k]});
    }
    out.push_back({"au", "mean_f1", s, au->mean_f1});
    out.push_back({"au", "mean_acc", s, au->mean_acc});
    out.push_back({"au", "au_score", s, au->au_score});
  }
}

std::string ExperimentReport::loss_csv() const {
  std::ostringstream out;
  out << loss_csv_header() << '\n';
  for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
    out << loss_csv_row(e + 1, epoch_losses[e]) << '\n';
  }
  return out.str();
}

std::string ExperimentReport::metrics_csv() const { return affect::metrics_csv(metrics); }

Predictions predict(const Network& net, std::span<const Sample> samples) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidArgument, "predict: no samples");
  return net.forward(features_of(samples), Mode::kEval).preds;
}

TaskMetrics evaluate_predictions(const Predictions& preds, std::span<const Sample> samples) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidArgument, "evaluate: empty split");
  if (preds.rows() != samples.size()) {
    throw Error(ErrorKind::kInvalidArgument, "evaluate: prediction count mismatch");
  }
  TaskMetrics out;

  std::vector<double> tv, ta, pv, pa;
  const auto classes = static_cast<std::size_t>(preds.emo_probs.cols());
  ConfusionMatrix cm(classes);
  bool any_expr = false;
  std::array<std::vector<std::uint8_t>, kNumAus> au_truth, au_pred;

  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& s = samples[r];
    const auto ri = static_cast<Index>(r);
    if (s.has_va) {
      tv.push_back(s.valence);
      ta.push_back(s.arousal);
      pv.push_back(std::clamp(preds.va(ri, 0), -1.0, 1.0));
      pa.push_back(std::clamp(preds.va(ri, 1), -1.0, 1.0));
    }
    if (s.emotion != kNoLabel) {
      if (static_cast<std::size_t>(s.emotion) >= classes) {
        throw Error(ErrorKind::kInvalidArgument, "evaluate: label outside the expression head");
      }
      Index arg = 0;
      preds.emo_probs.row(ri).maxCoeff(&arg);
      cm.add(static_cast<std::size_t>(s.emotion), static_cast<std::size_t>(arg));
      any_expr = true;
    }
    for (std::size_t k = 0; k < kNumAus; ++k) {
      if (s.au_mask[k] == 0) continue;
      au_truth[k].push_back(s.au[k]);
      au_pred[k].push_back(preds.au_probs(ri, static_cast<Index>(k)) > 0.5 ? 1 : 0);
    }
  }

  if (tv.size() >= 2) out.va = VaMetrics{ccc(tv, pv), ccc(ta, pa)};
  if (any_expr) {
    ExprMetrics m;
    m.stats = confusion_stats(cm);
    m.expr_score = 0.5 * (m.stats.mean_f1 + m.stats.uar);
    out.expr = m;
  }
  AuMetrics au;
  au.per_au_f1.assign(kNumAus, std::numeric_limits<double>::quiet_NaN());
  au.per_au_acc.assign(kNumAus, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> f1s, accs;
  for (std::size_t k = 0; k < kNumAus; ++k) {
    if (au_truth[k].empty()) continue;
    au.per_au_f1[k] = f1_binary(au_truth[k], au_pred[k]);
    au.per_au_acc[k] = binary_accuracy(au_truth[k], au_pred[k]);
    f1s.push_back(au.per_au_f1[k]);
    accs.push_back(au.per_au_acc[k]);
  }
  if (!f1s.empty()) {
    au.mean_f1 = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(f1s.size());
    au.mean_acc = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    au.au_score = challenge_scores(f1s, accs, 0.0, 0.0).au_score;
    out.au = std::move(au);
  }
  return out;
}

TaskMetrics evaluate(const Network& net, std::span<const Sample> samples) {
  return evaluate_predictions(predict(net, samples), samples);
}

LossBreakdown objective(Network& net, const LabeledBatch& batch, const TrainConfig& cfg, Mode mode,
                        std::mt19937_64* rng, bool accumulate) {
  if (cfg.coupling.distribution_matching && net.config().emotion_classes != kNumEmotions) {
    throw Error(ErrorKind::kInvalidArgument,
                "distribution matching needs the 7-way expression head");
  }
  auto fwd = net.forward(batch.features, mode, rng);
  ProbabilityGradients pg;
  const auto loss =
      aggregate(batch, fwd.preds, cfg.weights, cfg.coupling, accumulate ? &pg : nullptr);
  if (accumulate) net.backward(fwd.cache, to_logit_gradients(fwd.preds, pg));
  return loss;
}

ExperimentReport train(Network& net, const AffectDatasets& data, const TrainConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto schedule =
      make_schedule({data.va.train.size(), data.au.train.size(), data.expr.train.size()},
                    cfg.iterations_per_epoch);
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, kStreamDropout));

  ExperimentReport report;
  report.seed = cfg.seed;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochSampler sampler(schedule, data, derive_seed(cfg.seed, kStreamEpoch, epoch),
                         cfg.active_pools);
    LossBreakdown sum;
    sum.weights = cfg.weights;
    std::size_t steps = 0;
    while (!sampler.exhausted()) {
      const auto iteration = sampler.iteration();
      LabeledBatch batch = sampler.next_batch();
      if (cfg.coupling.any()) couple_batch(batch, cfg.coupling);
      if (cfg.observer) cfg.observer(epoch, iteration, batch);
      net.zero_gradients();
      const auto loss = objective(net, batch, cfg, Mode::kTrain, &dropout_rng, true);
      if (!finite(loss) || !net.gradients().allFinite()) {
        throw Error(ErrorKind::kNumeric,
                    "non-finite loss at epoch " + std::to_string(epoch + 1) + ", iteration " +
                        std::to_string(iteration + 1) + ": " + describe(loss) +
                        ", parameter norm " + std::to_string(net.parameters().norm()));
      }
      net.sgd_step(cfg.learning_rate, cfg.momentum);
      add_into(sum, loss);
      ++steps;
    }
    scale(sum, 1.0 / static_cast<double>(steps));
    report.epoch_losses.push_back(sum);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void score_report(const Network& net, const AffectDatasets& data, ExperimentReport& report,
                  std::array<bool, 3> pools) {
  for (const auto s : kAllTaskSets) {
    if (!pools[static_cast<std::size_t>(s)]) continue;
    const auto& test = data.pool(s).test;
    if (test.empty()) continue;
    const auto m = evaluate(net, test);
    m.append_records("test", report.metrics);
    if (s == TaskSet::kVa && m.va) report.headline.va = m.va->ccc_mean();
    if (s == TaskSet::kExpr && m.expr) report.headline.expr = m.expr->expr_score;
    if (s == TaskSet::kAu && m.au) report.headline.au = m.au->au_score;
  }
}

std::array<ExperimentReport, 3> single_task_baselines(const AffectDatasets& data,
                                                      const NetworkConfig& net_cfg,
                                                      const TrainConfig& cfg) {
  std::array<ExperimentReport, 3> out;
  for (const auto s : kAllTaskSets) {
    const auto i = static_cast<std::size_t>(s);
    TrainConfig c = cfg;
    c.coupling.co_annotation = false;
    c.coupling.soft_co_annotation = false;
    c.coupling.distribution_matching = false;
    c.active_pools = {false, false, false};
    c.active_pools[i] = true;
    Network net(net_cfg);
    out[i] = train(net, data, c);
    out[i].name = "single-task-" + std::string(task_set_name(s));
    std::array<bool, 3> pools{false, false, false};
    pools[i] = true;
    score_report(net, data, out[i], pools);
  }
  return out;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kNone: return "none";
    case Variant::kCoAnnotation: return "co-annotation";
    case Variant::kSoftCoAnnotation: return "soft co-annotation";
    case Variant::kDistrMatching: return "distr-matching";
    case Variant::kSoftAndDistr: return "soft co-annotation + distr-matching";
  }
  return "?";
}

TrainConfig variant_config(const TrainConfig& base, Variant v, double mu_dm, double mu_sca) {
  TrainConfig c = base;
  c.coupling.co_annotation = v == Variant::kCoAnnotation;
  c.coupling.soft_co_annotation = v == Variant::kSoftCoAnnotation || v == Variant::kSoftAndDistr;
  c.coupling.distribution_matching = v == Variant::kDistrMatching || v == Variant::kSoftAndDistr;
  c.weights.mu_dm = c.coupling.distribution_matching ? mu_dm : 0.0;
  c.weights.mu_sca = c.coupling.soft_co_annotation ? mu_sca : 0.0;
  return c;
}

AblationResult run_ablation(const AblationConfig& cfg) {
  struct Job {
    std::size_t seed_index;
    std::optional<Variant> variant;  // nullopt: single-task baselines
  };
  std::vector<AffectDatasets> data(cfg.seeds.size());
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    GeneratorConfig g = cfg.generator;
    g.seed = cfg.seeds[i];
    data[i] = generate(g);
  }
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    for (const auto v : kAllVariants) jobs.push_back({i, v});
    if (cfg.single_task) jobs.push_back({i, std::nullopt});
  }

  std::vector<std::vector<AblationRun>> results(jobs.size());
  auto run_job = [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto seed = cfg.seeds[job.seed_index];
    NetworkConfig nc = cfg.network;
    nc.seed = derive_seed(seed, kStreamNetwork);
    TrainConfig base = cfg.train;
    base.seed = derive_seed(seed, kStreamTrain);
    base.observer = nullptr;
    const auto& d = data[job.seed_index];
    if (job.variant) {
      Network net(nc);
      auto rep = train(net, d, variant_config(base, *job.variant, cfg.mu_dm, cfg.mu_sca));
      score_report(net, d, rep);
      results[j].push_back({std::string(variant_name(*job.variant)), seed, rep.headline,
                            std::move(rep.metrics), std::move(rep.epoch_losses)});
    } else {
      auto reps = single_task_baselines(d, nc, variant_config(base, Variant::kNone, 0.0, 0.0));
      for (auto& rep : reps) {
        results[j].push_back(
            {"single-task", seed, rep.headline, std::move(rep.metrics), std::move(rep.epoch_losses)});
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.jobs, jobs.size()));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(j);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  AblationResult out;
  for (auto& r : results) {
    for (auto& run : r) out.runs.push_back(std::move(run));
  }
  return out;
}

std::vector<std::pair<std::string, Headline>> AblationResult::mean_headlines() const {
  std::vector<std::string> order;
  std::map<std::string, std::array<std::pair<double, int>, 3>> acc;
  for (const auto& r : runs) {
    if (!acc.contains(r.variant)) order.push_back(r.variant);
    auto& a = acc[r.variant];
    if (r.headline.va) a[0].first += *r.headline.va, ++a[0].second;
    if (r.headline.au) a[1].first += *r.headline.au, ++a[1].second;
    if (r.headline.expr) a[2].first += *r.headline.expr, ++a[2].second;
  }
  std::vector<std::pair<std::string, Headline>> out;
  for (const auto& name : order) {
    const auto& a = acc[name];
    Headline h;
    if (a[0].second > 0) h.va = a[0].first / a[0].second;
    if (a[1].second > 0) h.au = a[1].first / a[1].second;
    if (a[2].second > 0) h.expr = a[2].first / a[2].second;
    out.emplace_back(name, h);
  }
  return out;
}

std::string AblationResult::runs_csv() const {
  std::ostringstream out;
  out << "variant,seed,task,metric,split,value\n";
  for (const auto& r : runs) {
    for (const auto& m : r.metrics) {
      out << r.variant << ',' << r.seed << ',' << m.task << ',' << m.metric << ',' << m.split
          << ',' << format_double(m.value) << '\n';
    }
  }
  return out.str();
}

namespace {

struct SummaryColumn {
  const char* header;
  const char* task;
  const char* metric;
};

constexpr std::array<SummaryColumn, 9> kSummaryColumns{{
    {"ccc_v", "va", "ccc_valence"},
    {"ccc_a", "va", "ccc_arousal"},
    {"expr_acc", "expr", "total_accuracy"},
    {"expr_uar", "expr", "uar"},
    {"expr_f1", "expr", "mean_f1"},
    {"expr_score", "expr", "expr_score"},
    {"au_f1", "au", "mean_f1"},
    {"au_acc", "au", "mean_acc"},
    {"au_score", "au", "au_score"},
}};

// variant -> column -> (sum, count), variants in first-appearance order.
std::vector<std::pair<std::string, std::array<double, kSummaryColumns.size()>>> summarize(
    const std::vector<AblationRun>& runs) {
  std::vector<std::string> order;
  std::map<std::string, std::array<std::pair<double, int>, kSummaryColumns.size()>> acc;
  for (const auto& r : runs) {
    if (!acc.contains(r.variant)) order.push_back(r.variant);
    auto& a = acc[r.variant];
    for (const auto& m : r.metrics) {
      for (std::size_t c = 0; c < kSummaryColumns.size(); ++c) {
        if (m.task == kSummaryColumns[c].task && m.metric == kSummaryColumns[c].metric) {
          a[c].first += m.value;
          ++a[c].second;
        }
      }
    }
  }
  std::vector<std::pair<std::string, std::array<double, kSummaryColumns.size()>>> out;
  for (const auto& name : order) {
    std::array<double, kSummaryColumns.size()> row{};
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& [sum, n] = acc[name][c];
      row[c] = n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    }
    out.emplace_back(name, row);
  }
  return out;
}

}  // namespace

std::string AblationResult::summary_csv() const {
  std::ostringstream out;
  out << "variant";
  for (const auto& c : kSummaryColumns) out << ',' << c.header;
  out << '\n';
  for (const auto& [name, row] : summarize(runs)) {
    out << name;
    for (const double v : row) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::string AblationResult::summary_text() const {
  std::ostringstream out;
  out << std::left << std::setw(38) << "variant";
  for (const auto& c : kSummaryColumns) out << std::right << std::setw(11) << c.header;
  out << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, row] : summarize(runs)) {
    out << std::left << std::setw(38) << name;
    for (const double v : row) out << std::right << std::setw(11) << v;
    out << '\n';
  }
  return out.str();
}

FineTuneResult fine_tune_compound(const Network& pretrained, std::span<const Sample> train_set,
                                  std::span<const Sample> test_set,
                                  std::span<const std::string> class_names,
                                  const FineTuneConfig& cfg) {
  const std::size_t k = class_names.size();
  if (k < 2) throw Error(ErrorKind::kInvalidArgument, "fine-tune: needs at least 2 classes");
  if (train_set.empty() || test_set.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "fine-tune: empty train or test set");
  }
  if (cfg.batch_size < 1 || cfg.epochs < 1) {
    throw Error(ErrorKind::kInvalidArgument, "fine-tune: batch_size and epochs must be >= 1");
  }
  for (const auto* set : {&train_set, &test_set}) {
    for (const auto& s : *set) {
      if (s.emotion < 0 || static_cast<std::size_t>(s.emotion) >= k) {
        throw Error(ErrorKind::kInvalidArgument, "fine-tune: sample label outside [0, K)");
      }
    }
  }
  const auto start = std::chrono::steady_clock::now();

  NetworkConfig nc = pretrained.config();
  nc.emotion_classes = k;
  nc.seed = derive_seed(cfg.seed, kStreamFineTune);
  Network net(nc);
  net.copy_trunk_from(pretrained);

  const Matrix x = features_of(train_set);
  std::vector<int> labels;
  labels.reserve(train_set.size());
  for (const auto& s : train_set) labels.push_back(s.emotion);

  std::mt19937_64 rng(derive_seed(cfg.seed, kStreamFineTune, 1));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ExperimentReport report;
  report.name = "fine-tune";
  report.seed = cfg.seed;
  const std::size_t first_param = cfg.freeze_trunk ? net.trunk_parameter_count() : 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    std::size_t steps = 0;
    for (std::size_t start_row = 0; start_row < order.size(); start_row += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start_row + cfg.batch_size);
      Matrix xb(static_cast<Index>(end - start_row), x.cols());
      std::vector<int> yb;
      for (std::size_t i = start_row; i < end; ++i) {
        xb.row(static_cast<Index>(i - start_row)) = x.row(static_cast<Index>(order[i]));
        yb.push_back(labels[order[i]]);
      }
      auto fwd = net.forward(xb, Mode::kTrain, &rng);
      ProbabilityGradients pg = ProbabilityGradients::zeros(yb.size(), k);
      const double loss = expression_ce(fwd.preds.emo_probs, yb, &pg.emo_probs);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kNumeric, "fine-tune: non-finite loss at epoch " +
                                             std::to_string(epoch + 1));
      }
      net.zero_gradients();
      net.backward(fwd.cache, to_logit_gradients(fwd.preds, pg));
      net.sgd_step(cfg.learning_rate, cfg.momentum, first_param);
      sum.l_emo += loss;
      ++steps;
    }
    sum.l_emo /= static_cast<double>(steps);
    sum.total = sum.l_emo;
    sum.has_emo = true;
    report.epoch_losses.push_back(sum);
  }

  const auto metrics = evaluate(net, test_set);
  const auto& stats = metrics.expr->stats;
  report.metrics.push_back({"compound", "mean_diagonal", "test", stats.mean_diagonal});
  report.metrics.push_back({"compound", "total_accuracy", "test", stats.total_accuracy});
  for (std::size_t c = 0; c < k; ++c) {
    if (std::isnan(stats.recalls[c])) continue;
    report.metrics.push_back({"compound", "recall_" + class_names[c], "test", stats.recalls[c]});
  }
  report.headline.expr = stats.mean_diagonal;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(report), stats, std::move(net)};
}

}  // namespace affect
