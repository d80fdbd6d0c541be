#pragma once

// Coupling between the expression and AU tasks through a relatedness table:
//
//  * hard co-annotation: an expression label implies targets for its AUs,
//    and a complete AU pattern implies an expression label;
//  * soft co-annotation: AU annotations yield a soft expression distribution
//    that the expression head is trained to match;
//  * distribution matching: predicted AU probabilities are matched against
//    the AU distribution implied by the predicted expression mixture.

#include <optional>
#include <vector>

#include "affect/relatedness.hpp"
#include "affect/types.hpp"

namespace affect {

/// Floor added inside logarithms of the coupling losses.
inline constexpr double kLogFloor = 1e-12;

struct CouplingConfig {
  RelatednessTable table = cognitive_table();
  bool co_annotation = false;
  bool soft_co_annotation = false;
  bool distribution_matching = false;
  /// Use annotator-agreement weights in the AU mixture instead of 0/1.
  bool weighted_q = false;
  /// Use weights in the soft-label scores ("re-weighting").
  bool weighted_soft = true;
  /// Re-weight co-annotated observational AU targets by their weight.
  bool weighted_co_annotation = true;
  /// Treat the mixture q as a constant target in distribution matching.
  bool stop_gradient_q = false;
  /// Add the (1 - p) log(1 - q) complement to distribution matching.
  bool full_bernoulli_dm = false;

  bool any() const { return co_annotation || soft_co_annotation || distribution_matching; }
};

struct AuTarget {
  AuId au;
  double target = 1.0;
  double weight = 1.0;

  friend bool operator==(const AuTarget&, const AuTarget&) = default;
};

/// All AUs associated with `e` as positive targets; prototypical entries get
/// weight 1, observational ones their table weight (or 1 when `weighted` is
/// false). Neutral yields an empty list.
std::vector<AuTarget> co_annotate_emotion_to_aus(Emotion e, const RelatednessTable& table,
                                                 bool weighted = true);

/// The emotion whose full entry set is active in `active`. Among several
/// candidates the one with the most entries wins; an unresolved tie or no
/// candidate yields nullopt.
std::optional<Emotion> co_annotate_aus_to_emotion(const AuVector& active,
                                                  const RelatednessTable& table);

/// Per-emotion fraction of (weighted) entries present; neutral scores 0.
std::array<double, kNumEmotions> soft_emotion_scores(const AuVector& active,
                                                     const RelatednessTable& table,
                                                     bool weighted);

/// Softmax over soft_emotion_scores.
Vector soft_emotion_label(const AuVector& active, const RelatednessTable& table, bool weighted);

/// 7 x 17 matrix B with q = p_emo * B: column i holds p(AU_i | emotion)
/// normalized by the number (or weight sum) of emotions associated with AU_i.
/// AUs associated with no emotion have an all-zero column.
Matrix mixture_matrix(const RelatednessTable& table, bool weighted);

/// Row-wise AU mixture q for an N x 7 matrix of expression probabilities.
Matrix mixture_q(const Matrix& emo_probs, const RelatednessTable& table, bool weighted);

/// mean over rows of sum_i -p_i log(q_i + eps) (plus the complement term
/// when `full_bernoulli`). Optional outputs receive d loss / d p and
/// d loss / d q.
double distribution_matching_loss(const Matrix& au_probs, const Matrix& q,
                                  bool full_bernoulli = false, Matrix* grad_p = nullptr,
                                  Matrix* grad_q = nullptr);

/// mean over rows of sum_e -s_e log(p_e + eps) with s the soft target.
double soft_coannotation_loss(const Matrix& emo_probs, const Matrix& soft_targets,
                              Matrix* grad_p = nullptr);

}  // namespace affect
