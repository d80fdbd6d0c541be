#pragma once

// Training loop, evaluation, single-task baselines, the coupling ablation
// grid and compound-expression fine-tuning.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect/coupling.hpp"
#include "affect/losses.hpp"
#include "affect/metrics.hpp"
#include "affect/network.hpp"
#include "affect/synthdata.hpp"

namespace affect {

struct TrainConfig {
  double learning_rate = 1e-4;
  double momentum = 0.0;
  std::size_t epochs = 30;
  std::size_t iterations_per_epoch = 10;
  LossWeights weights;
  CouplingConfig coupling;
  std::uint64_t seed = 0;
  /// Pools that contribute rows to each batch (VA, AU, EXPR).
  std::array<bool, 3> active_pools{true, true, true};
  /// Called with every batch right before its forward pass (audits, logging).
  std::function<void(std::size_t epoch, std::size_t iteration, const LabeledBatch&)> observer;

  void validate() const;
};

struct VaMetrics {
  double ccc_valence = 0.0;
  double ccc_arousal = 0.0;
  double ccc_mean() const { return 0.5 * (ccc_valence + ccc_arousal); }
};

struct ExprMetrics {
  ConfusionStats stats;
  double expr_score = 0.0;
};

struct AuMetrics {
  std::vector<double> per_au_f1;   // NaN where an AU has no annotated samples
  std::vector<double> per_au_acc;
  double mean_f1 = 0.0;
  double mean_acc = 0.0;
  double au_score = 0.0;
};

struct TaskMetrics {
  std::optional<VaMetrics> va;
  std::optional<ExprMetrics> expr;
  std::optional<AuMetrics> au;

  void append_records(std::string_view split, std::vector<MetricRecord>& out) const;
};

/// Headline metric per task: mean CCC, expression challenge score, AU
/// challenge score.
struct Headline {
  std::optional<double> va;
  std::optional<double> expr;
  std::optional<double> au;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<LossBreakdown> epoch_losses;  // mean over the epoch's iterations
  std::vector<MetricRecord> metrics;
  Headline headline;
  double wall_seconds = 0.0;  // never written to CSV outputs

  std::string loss_csv() const;
  std::string metrics_csv() const;
};

/// Eval-mode predictions for a list of samples.
Predictions predict(const Network& net, std::span<const Sample> samples);

/// Scores predictions against whichever labels the samples carry. VA
/// predictions are clamped to [-1, 1]. Throws on an empty sample list.
TaskMetrics evaluate_predictions(const Predictions& preds, std::span<const Sample> samples);
TaskMetrics evaluate(const Network& net, std::span<const Sample> samples);

/// Coupled objective for one batch. `batch` must already be coupled. When
/// `accumulate` is true the parameter gradients are added to net.
LossBreakdown objective(Network& net, const LabeledBatch& batch, const TrainConfig& cfg, Mode mode,
                        std::mt19937_64* rng, bool accumulate);

/// Trains `net` in place. Throws Error(kNumeric) on a non-finite loss with the
/// offending epoch, iteration and loss terms in the message.
ExperimentReport train(Network& net, const AffectDatasets& data, const TrainConfig& cfg);

/// Evaluates on every pool's test split; fills metrics and headline.
void score_report(const Network& net, const AffectDatasets& data, ExperimentReport& report,
                  std::array<bool, 3> pools = {true, true, true});

/// Three networks, each trained on one pool with only its own loss term and
/// the same schedule and budget as the joint run. Indexed by TaskSet.
std::array<ExperimentReport, 3> single_task_baselines(const AffectDatasets& data,
                                                      const NetworkConfig& net_cfg,
                                                      const TrainConfig& cfg);

enum class Variant { kNone, kCoAnnotation, kSoftCoAnnotation, kDistrMatching, kSoftAndDistr };

inline constexpr std::array<Variant, 5> kAllVariants{
    Variant::kNone, Variant::kCoAnnotation, Variant::kSoftCoAnnotation, Variant::kDistrMatching,
    Variant::kSoftAndDistr};

std::string_view variant_name(Variant v);

/// Enables the strategies of `v` on top of `base` (coupling weights taken from
/// `mu_dm` / `mu_sca`).
TrainConfig variant_config(const TrainConfig& base, Variant v, double mu_dm, double mu_sca);

struct AblationConfig {
  GeneratorConfig generator;
  NetworkConfig network;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double mu_dm = 1.0;
  double mu_sca = 1.0;
  bool single_task = true;
  std::size_t jobs = 1;
};

struct AblationRun {
  std::string variant;  // variant name or "single-task"
  std::uint64_t seed = 0;
  Headline headline;
  std::vector<MetricRecord> metrics;
  std::vector<LossBreakdown> epoch_losses;
};

struct AblationResult {
  std::vector<AblationRun> runs;

  /// Mean headline per variant across seeds, in run order of first appearance.
  std::vector<std::pair<std::string, Headline>> mean_headlines() const;

  /// Long-format CSV: variant,seed,task,metric,split,value.
  std::string runs_csv() const;
  /// Table with one row per variant and columns CCC-V, CCC-A, expression
  /// metrics and AU F1, averaged over seeds.
  std::string summary_csv() const;
  std::string summary_text() const;
};

/// Per-seed generator, network and training seeds are derived from the grid
/// seed, so variants of the same seed are paired on identical data and
/// initialization.
AblationResult run_ablation(const AblationConfig& cfg);

struct FineTuneConfig {
  double learning_rate = 0.05;
  double momentum = 0.0;
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  bool freeze_trunk = false;
  std::uint64_t seed = 0;
};

struct FineTuneResult {
  ExperimentReport report;
  ConfusionStats test_stats;
  Network network;
};

/// Replaces the expression head with a K-way head (K = class_names.size())
/// on top of `pretrained`'s trunk and trains it with cross entropy on
/// `train_set`. Reports mean confusion diagonal and per-class recalls on
/// `test_set`.
FineTuneResult fine_tune_compound(const Network& pretrained, std::span<const Sample> train_set,
                                  std::span<const Sample> test_set,
                                  std::span<const std::string> class_names,
                                  const FineTuneConfig& cfg);

}  // namespace affect
