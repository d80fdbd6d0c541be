#include "affect/coupling.hpp"

#include <cmath>

namespace affect {

std::vector<AuTarget> co_annotate_emotion_to_aus(Emotion e, const RelatednessTable& table,
                                                 bool weighted) {
  std::vector<AuTarget> out;
  for (const auto& entry : table.entries(e)) {
    out.push_back({entry.au, 1.0, weighted ? entry.weight : 1.0});
  }
  return out;
}

std::optional<Emotion> co_annotate_aus_to_emotion(const AuVector& active,
                                                  const RelatednessTable& table) {
  std::optional<Emotion> best;
  std::size_t best_size = 0;
  bool tied = false;
  for (const Emotion e : kAllEmotions) {
    const auto& entries = table.entries(e);
    if (entries.empty()) continue;
    bool all_present = true;
    for (const auto& entry : entries) {
      if (active[*au_index(entry.au)] == 0) {
        all_present = false;
        break;
      }
    }
    if (!all_present) continue;
    if (entries.size() > best_size) {
      best = e;
      best_size = entries.size();
      tied = false;
    } else if (entries.size() == best_size) {
      tied = true;
    }
  }
  if (tied) return std::nullopt;
  return best;
}

std::array<double, kNumEmotions> soft_emotion_scores(const AuVector& active,
                                                     const RelatednessTable& table,
                                                     bool weighted) {
  std::array<double, kNumEmotions> scores{};
  for (const Emotion e : kAllEmotions) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& entry : table.entries(e)) {
      const double w = weighted ? entry.weight : 1.0;
      den += w;
      if (active[*au_index(entry.au)] != 0) num += w;
    }
    scores[index_of(e)] = den > 0.0 ? num / den : 0.0;
  }
  return scores;
}

Vector soft_emotion_label(const AuVector& active, const RelatednessTable& table, bool weighted) {
  const auto scores = soft_emotion_scores(active, table, weighted);
  Vector out(static_cast<Eigen::Index>(kNumEmotions));
  double m = scores[0];
  for (const double s : scores) m = std::max(m, s);
  for (std::size_t e = 0; e < kNumEmotions; ++e) {
    out[static_cast<Eigen::Index>(e)] = std::exp(scores[e] - m);
  }
  out /= out.sum();
  return out;
}

Matrix mixture_matrix(const RelatednessTable& table, bool weighted) {
  Matrix b = Matrix::Zero(static_cast<Eigen::Index>(kNumEmotions),
                          static_cast<Eigen::Index>(kNumAus));
  for (std::size_t i = 0; i < kNumAus; ++i) {
    double z = 0.0;
    for (const Emotion e : kAllEmotions) {
      const double w = table.weight(e, i);
      if (w <= 0.0) continue;
      const double a = weighted ? w : 1.0;
      b(static_cast<Eigen::Index>(index_of(e)), static_cast<Eigen::Index>(i)) = a;
      z += a;
    }
    if (z > 0.0) b.col(static_cast<Eigen::Index>(i)) /= z;
  }
  return b;
}

Matrix mixture_q(const Matrix& emo_probs, const RelatednessTable& table, bool weighted) {
  if (emo_probs.cols() != static_cast<Eigen::Index>(kNumEmotions)) {
    throw Error(ErrorKind::kInvalidArgument, "mixture_q: expected 7 expression columns");
  }
  return emo_probs * mixture_matrix(table, weighted);
}

double distribution_matching_loss(const Matrix& au_probs, const Matrix& q, bool full_bernoulli,
                                  Matrix* grad_p, Matrix* grad_q) {
  if (au_probs.rows() != q.rows() || au_probs.cols() != q.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "distribution_matching_loss: shape mismatch");
  }
  const Eigen::Index n = au_probs.rows();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  const auto p = au_probs.array();
  const auto qa = q.array();
  const Eigen::ArrayXXd log_q = (qa + kLogFloor).log();
  double total = -(p * log_q).sum();
  Eigen::ArrayXXd gp = -log_q;
  Eigen::ArrayXXd gq = -p / (qa + kLogFloor);
  if (full_bernoulli) {
    const Eigen::ArrayXXd log_1mq = (1.0 - qa + kLogFloor).log();
    total -= ((1.0 - p) * log_1mq).sum();
    gp += log_1mq;
    gq += (1.0 - p) / (1.0 - qa + kLogFloor);
  }
  if (grad_p != nullptr) *grad_p = (gp * inv_n).matrix();
  if (grad_q != nullptr) *grad_q = (gq * inv_n).matrix();
  return total * inv_n;
}

double soft_coannotation_loss(const Matrix& emo_probs, const Matrix& soft_targets,
                              Matrix* grad_p) {
  if (emo_probs.rows() != soft_targets.rows() || emo_probs.cols() != soft_targets.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "soft_coannotation_loss: shape mismatch");
  }
  const Eigen::Index n = emo_probs.rows();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto p = emo_probs.array();
  const auto s = soft_targets.array();
  const double total = -(s * (p + kLogFloor).log()).sum();
  if (grad_p != nullptr) *grad_p = (-s / (p + kLogFloor) * inv_n).matrix();
  return total * inv_n;
}

}  // namespace affect
