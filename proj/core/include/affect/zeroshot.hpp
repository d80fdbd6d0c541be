#pragma once

// Zero-shot compound expression classification from basic-task predictions.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect/metrics.hpp"
#include "affect/network.hpp"
#include "affect/relatedness.hpp"
#include "affect/synthdata.hpp"

namespace affect {

struct CompoundPredictionConfig {
  std::vector<CompoundClass> classes;
  /// Use p(AU|cls) = w instead of 1 for the class AUs.
  bool weighted = false;
  /// Adds the valence-sign term for classes flagged with it.
  bool valence_term = true;

  static CompoundPredictionConfig defaults(const RelatednessTable& table);
  void validate() const;
};

/// Candidate score of `cls` for one prediction. A valence of exactly 0
/// contributes nothing.
double candidate_score(const PredictionTriple& pred, const CompoundClass& cls, bool weighted,
                       bool valence_term = true);

struct Classification {
  std::size_t best = 0;  // lowest index among maximal scores
  bool tie = false;
  std::vector<double> scores;
};

Classification classify(const PredictionTriple& pred, const CompoundPredictionConfig& cfg);
std::vector<Classification> classify_all(std::span<const PredictionTriple> preds,
                                         const CompoundPredictionConfig& cfg);

/// Prediction CSV: emo_<name> x7, au_<id> x17, valence, arousal.
std::string predictions_csv(const Predictions& preds);
std::vector<PredictionTriple> parse_predictions_csv(std::string_view text, std::string_view context);
std::vector<PredictionTriple> load_predictions(const std::filesystem::path& path);

/// row, one score column per class, argmax, tie.
std::string scores_csv(std::span<const Classification> results, const CompoundPredictionConfig& cfg);

struct ZeroShotEvaluation {
  std::vector<Classification> results;
  ConfusionStats stats;
};

/// `labels[i]` is the class index of `preds[i]`.
ZeroShotEvaluation evaluate_zero_shot(std::span<const PredictionTriple> preds,
                                      std::span<const int> labels,
                                      const CompoundPredictionConfig& cfg);
/// Runs the network on compound samples whose `emotion` holds the class index.
ZeroShotEvaluation evaluate_zero_shot(const Network& net, std::span<const Sample> samples,
                                      const CompoundPredictionConfig& cfg);

}  // namespace affect
