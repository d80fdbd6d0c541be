#pragma once

// Evaluation measures: concordance correlation, F1, confusion statistics and
// the challenge composite scores. All functions are pure.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affect/types.hpp"

namespace affect {

/// Concordance correlation coefficient with population (1/N) moments:
///   2 cov(t, p) / (var(t) + var(p) + (mean(t) - mean(p))^2)
/// When both series are constant the result is 1 if the constants are equal
/// and 0 otherwise.
double ccc(std::span<const double> truth, std::span<const double> pred);

/// 2TP / (2TP + FP + FN); 1 when neither series has a positive.
double f1_binary(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred);

/// Fraction of positions where truth == pred.
double binary_accuracy(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(std::size_t truth, std::size_t pred, std::uint64_t count = 1);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts_[truth * classes_ + pred];
  }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t truth) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct ConfusionStats {
  double total_accuracy = 0.0;
  double mean_diagonal = 0.0;  // mean of the row-normalized diagonal
  double uar = 0.0;
  std::vector<double> recalls;  // per class; NaN for rows without samples
  std::vector<double> f1;       // per class one-vs-rest
  double mean_f1 = 0.0;
};

/// Rows with zero truth count are excluded from the averages.
ConfusionStats confusion_stats(const ConfusionMatrix& cm);

struct ChallengeScores {
  double au_score = 0.0;    // (mean AU F1 + mean AU accuracy) / 2
  double expr_score = 0.0;  // (mean expression F1 + UAR) / 2
};

ChallengeScores challenge_scores(std::span<const double> per_au_f1,
                                 std::span<const double> per_au_acc,
                                 double emo_f1_mean, double uar);

/// One line of a metrics report.
struct MetricRecord {
  std::string task;
  std::string metric;
  std::string split;
  double value = 0.0;
};

/// CSV with header "task,metric,split,value"; values at round-trip precision.
std::string metrics_csv(std::span<const MetricRecord> records);

}  // namespace affect
