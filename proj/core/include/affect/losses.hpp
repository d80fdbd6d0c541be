#pragma once

// Task losses and the weighted multi-task objective
//   total = L_emo + lambda1 L_au + lambda2 L_va + mu_dm L_dm + mu_sca L_sca.
//
// Every loss optionally returns its gradient with respect to its inputs
// (probabilities or VA values); aggregate() collects those into
// ProbabilityGradients for the network's backward pass.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affect/coupling.hpp"
#include "affect/network.hpp"
#include "affect/types.hpp"

namespace affect {

/// Annotation pool a row was drawn from.
enum class TaskSet : std::uint8_t { kVa = 0, kAu = 1, kExpr = 2 };

inline constexpr std::array<TaskSet, 3> kAllTaskSets{TaskSet::kVa, TaskSet::kAu,
                                                     TaskSet::kExpr};

std::string_view task_set_name(TaskSet s);

/// A concatenated mini-batch with partial labels. Absent labels are encoded
/// per row: kNoLabel for the expression, an all-zero mask row for AUs and
/// has_va / has_soft flags for the remaining blocks.
struct LabeledBatch {
  Matrix features;                  // N x D
  std::vector<int> emo_labels;      // N, kNoLabel when absent
  Matrix au_labels;                 // N x 17
  Matrix au_mask;                   // N x 17, delta: 1 where annotated
  Matrix va_labels;                 // N x 2
  std::vector<std::uint8_t> has_va; // N
  Matrix soft_emo_targets;          // N x 7
  std::vector<std::uint8_t> has_soft;
  std::vector<std::vector<AuTarget>> coanno_au;  // N, hard co-annotation targets
  std::vector<std::uint8_t> emo_coannotated;     // N, label came from AU evidence
  std::vector<TaskSet> origin;                   // N

  static LabeledBatch with_rows(std::size_t rows, std::size_t feature_dim);

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }

  /// Throws Error(kValidation) on any shape or simplex violation.
  void validate() const;
};

struct LossWeights {
  double lambda1 = 1.0;  // AU term
  double lambda2 = 1.0;  // VA term
  double mu_dm = 0.0;    // distribution matching
  double mu_sca = 0.0;   // soft co-annotation

  void validate() const;
};

struct LossBreakdown {
  double l_emo = 0.0;
  double l_au = 0.0;
  double l_va = 0.0;
  double l_dm = 0.0;
  double l_sca = 0.0;
  double total = 0.0;
  LossWeights weights;
  bool has_emo = false;
  bool has_au = false;
  bool has_va = false;
  bool has_dm = false;
  bool has_sca = false;
};

/// Mean over labeled rows of -log max(p[label], eps). Rows with kNoLabel are
/// skipped; throws when no row is labeled.
double expression_ce(const Matrix& emo_probs, std::span<const int> labels,
                     Matrix* grad = nullptr);

/// Masked binary cross entropy. `weights` generalizes the 0/1 mask delta:
/// each row contributes -sum_i w_i [y_i log p_i + (1-y_i) log(1-p_i)]
/// divided by the number of entries with w_i > 0; rows without any such
/// entry are excluded from the row average. Returns 0 when every row is
/// unannotated.
double masked_au_bce(const Matrix& au_probs, const Matrix& au_labels, const Matrix& weights,
                     Matrix* grad = nullptr);

/// 1 - (CCC(valence) + CCC(arousal)) / 2 over the batch dimension. Needs at
/// least two rows.
double va_ccc_loss(const Matrix& va_pred, const Matrix& va_labels, Matrix* grad = nullptr);

/// Applies the enabled hard and soft co-annotation strategies to a batch:
/// expression rows gain AU targets, AU rows may gain an expression label
/// and/or a soft expression target.
void couple_batch(LabeledBatch& batch, const CouplingConfig& coupling);

/// Evaluates every available term, zero-fills absent ones and applies the
/// weights. When `grad` is non-null it receives d total / d outputs.
/// Distribution matching runs over all rows when enabled in `coupling`.
LossBreakdown aggregate(const LabeledBatch& batch, const Predictions& preds,
                        const LossWeights& weights, const CouplingConfig& coupling,
                        ProbabilityGradients* grad = nullptr);

/// Column names and row formatting for per-iteration/epoch loss logs.
std::string loss_csv_header();
std::string loss_csv_row(std::size_t index, const LossBreakdown& b);

}  // namespace affect
