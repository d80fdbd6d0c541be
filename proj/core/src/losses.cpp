#include "affect/losses.hpp"

#include <cmath>
#include <sstream>

#include "affect/csv.hpp"

namespace affect {

namespace {

using Index = Eigen::Index;

Matrix gather_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

void scatter_add_rows(Matrix& dst, const Matrix& src, const std::vector<Index>& rows,
                      double scale) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dst.row(rows[i]) += scale * src.row(static_cast<Index>(i));
  }
}

struct CccParts {
  double value;
  Vector grad;  // d ccc / d pred
};

CccParts ccc_with_gradient(const Eigen::Ref<const Vector>& truth,
                           const Eigen::Ref<const Vector>& pred) {
  const double n = static_cast<double>(truth.size());
  const double mx = truth.mean();
  const double my = pred.mean();
  const Vector dx = truth.array() - mx;
  const Vector dy = pred.array() - my;
  const double sxx = dx.squaredNorm() / n;
  const double syy = dy.squaredNorm() / n;
  const double sxy = dx.dot(dy) / n;
  const double num = 2.0 * sxy;
  const double den = sxx + syy + (mx - my) * (mx - my);
  CccParts out;
  if (den == 0.0) {
    out.value = mx == my ? 1.0 : 0.0;
    out.grad = Vector::Zero(pred.size());
    return out;
  }
  out.value = num / den;
  const Vector dnum = 2.0 * dx / n;
  const Vector dden = (2.0 * dy.array() - 2.0 * (mx - my)) / n;
  out.grad = (dnum * den - num * dden) / (den * den);
  return out;
}

}  // namespace

std::string_view task_set_name(TaskSet s) {
  switch (s) {
    case TaskSet::kVa: return "va";
    case TaskSet::kAu: return "au";
    case TaskSet::kExpr: return "expr";
  }
  return "?";
}

LabeledBatch LabeledBatch::with_rows(std::size_t rows, std::size_t feature_dim) {
  const auto n = static_cast<Index>(rows);
  LabeledBatch b;
  b.features = Matrix::Zero(n, static_cast<Index>(feature_dim));
  b.emo_labels.assign(rows, kNoLabel);
  b.au_labels = Matrix::Zero(n, static_cast<Index>(kNumAus));
  b.au_mask = Matrix::Zero(n, static_cast<Index>(kNumAus));
  b.va_labels = Matrix::Zero(n, static_cast<Index>(kNumVa));
  b.has_va.assign(rows, 0);
  b.soft_emo_targets = Matrix::Zero(n, static_cast<Index>(kNumEmotions));
  b.has_soft.assign(rows, 0);
  b.coanno_au.assign(rows, {});
  b.emo_coannotated.assign(rows, 0);
  b.origin.assign(rows, TaskSet::kVa);
  return b;
}

void LabeledBatch::validate() const {
  const auto n = features.rows();
  const auto un = static_cast<std::size_t>(n);
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kValidation, "batch: " + msg); };
  if (emo_labels.size() != un || has_va.size() != un || has_soft.size() != un ||
      coanno_au.size() != un || emo_coannotated.size() != un || origin.size() != un) {
    fail("per-row vectors do not match row count");
  }
  if (au_labels.rows() != n || au_mask.rows() != n || va_labels.rows() != n ||
      soft_emo_targets.rows() != n) {
    fail("label blocks do not match row count");
  }
  if (au_labels.cols() != static_cast<Index>(kNumAus) ||
      au_mask.cols() != static_cast<Index>(kNumAus) ||
      va_labels.cols() != static_cast<Index>(kNumVa)) {
    fail("label block widths are wrong");
  }
  for (Index r = 0; r < n; ++r) {
    if (has_soft[static_cast<std::size_t>(r)] != 0 &&
        std::abs(soft_emo_targets.row(r).sum() - 1.0) > 1e-9) {
      fail("soft expression target row " + std::to_string(r) + " is not on the simplex");
    }
    for (Index k = 0; k < au_mask.cols(); ++k) {
      const double d = au_mask(r, k);
      if (d != 0.0 && d != 1.0) fail("AU mask entries must be 0 or 1");
    }
  }
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && mu_dm >= 0.0 && mu_sca >= 0.0)) {
    throw Error(ErrorKind::kValidation, "loss weights must be non-negative");
  }
}

double expression_ce(const Matrix& emo_probs, std::span<const int> labels, Matrix* grad) {
  if (static_cast<Index>(labels.size()) != emo_probs.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "expression_ce: label count mismatch");
  }
  std::size_t count = 0;
  for (const int y : labels) count += y != kNoLabel ? 1 : 0;
  if (count == 0) throw Error(ErrorKind::kInvalidArgument, "expression_ce: no labeled rows");
  const double inv = 1.0 / static_cast<double>(count);
  if (grad != nullptr) *grad = Matrix::Zero(emo_probs.rows(), emo_probs.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y == kNoLabel) continue;
    if (y < 0 || y >= emo_probs.cols()) {
      throw Error(ErrorKind::kInvalidArgument, "expression_ce: label out of range");
    }
    const double p = emo_probs(static_cast<Index>(r), y);
    if (p > kLogFloor) {
      total -= std::log(p);
      if (grad != nullptr) (*grad)(static_cast<Index>(r), y) = -inv / p;
    } else {
      total -= std::log(kLogFloor);
    }
  }
  return total * inv;
}

double masked_au_bce(const Matrix& au_probs, const Matrix& au_labels, const Matrix& weights,
                     Matrix* grad) {
  if (au_probs.rows() != au_labels.rows() || au_probs.rows() != weights.rows() ||
      au_probs.cols() != au_labels.cols() || au_probs.cols() != weights.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "masked_au_bce: shape mismatch");
  }
  if (grad != nullptr) *grad = Matrix::Zero(au_probs.rows(), au_probs.cols());

  std::vector<double> counts(static_cast<std::size_t>(au_probs.rows()), 0.0);
  std::size_t annotated_rows = 0;
  for (Index r = 0; r < au_probs.rows(); ++r) {
    double c = 0.0;
    for (Index i = 0; i < au_probs.cols(); ++i) c += weights(r, i) > 0.0 ? 1.0 : 0.0;
    counts[static_cast<std::size_t>(r)] = c;
    annotated_rows += c > 0.0 ? 1 : 0;
  }
  if (annotated_rows == 0) return 0.0;
  const double inv_rows = 1.0 / static_cast<double>(annotated_rows);

  double total = 0.0;
  for (Index r = 0; r < au_probs.rows(); ++r) {
    const double c = counts[static_cast<std::size_t>(r)];
    if (c == 0.0) continue;
    const double scale = inv_rows / c;
    for (Index i = 0; i < au_probs.cols(); ++i) {
      const double w = weights(r, i);
      if (w <= 0.0) continue;
      const double p = au_probs(r, i);
      const double y = au_labels(r, i);
      const double q = 1.0 - p;
      double row_term = 0.0;
      double g = 0.0;
      if (y != 0.0) {
        row_term += y * std::log(std::max(p, kLogFloor));
        if (p > kLogFloor) g -= y / p;
      }
      if (y != 1.0) {
        row_term += (1.0 - y) * std::log(std::max(q, kLogFloor));
        if (q > kLogFloor) g += (1.0 - y) / q;
      }
      total -= scale * w * row_term;
      if (grad != nullptr) (*grad)(r, i) = scale * w * g;
    }
  }
  return total;
}

double va_ccc_loss(const Matrix& va_pred, const Matrix& va_labels, Matrix* grad) {
  if (va_pred.rows() != va_labels.rows() || va_pred.cols() != static_cast<Index>(kNumVa) ||
      va_labels.cols() != static_cast<Index>(kNumVa)) {
    throw Error(ErrorKind::kInvalidArgument, "va_ccc_loss: shape mismatch");
  }
  if (va_pred.rows() < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "va_ccc_loss: CCC needs a batch of at least 2 VA rows; increase the VA batch "
                "size");
  }
  const auto v = ccc_with_gradient(va_labels.col(0), va_pred.col(0));
  const auto a = ccc_with_gradient(va_labels.col(1), va_pred.col(1));
  if (grad != nullptr) {
    grad->resize(va_pred.rows(), 2);
    grad->col(0) = -0.5 * v.grad;
    grad->col(1) = -0.5 * a.grad;
  }
  return 1.0 - 0.5 * (v.value + a.value);
}

void couple_batch(LabeledBatch& batch, const CouplingConfig& coupling) {
  const auto& table = coupling.table;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const auto ri = static_cast<Index>(r);
    const bool has_emo = batch.emo_labels[r] != kNoLabel;
    const bool has_au = batch.au_mask.row(ri).sum() > 0.0;
    // Unannotated AUs count as inactive for both AU-driven strategies.
    AuVector active{};
    if (has_au) {
      for (std::size_t k = 0; k < kNumAus; ++k) {
        const auto ki = static_cast<Index>(k);
        active[k] = batch.au_mask(ri, ki) > 0.0 && batch.au_labels(ri, ki) > 0.5 ? 1 : 0;
      }
    }

    if (coupling.co_annotation) {
      if (has_emo && !has_au && batch.emo_labels[r] < static_cast<int>(kNumEmotions)) {
        batch.coanno_au[r] = co_annotate_emotion_to_aus(
            emotion_at(static_cast<std::size_t>(batch.emo_labels[r])), table,
            coupling.weighted_co_annotation);
      }
      if (has_au && !has_emo) {
        if (const auto e = co_annotate_aus_to_emotion(active, table)) {
          batch.emo_labels[r] = static_cast<int>(index_of(*e));
          batch.emo_coannotated[r] = 1;
        }
      }
    }
    if (coupling.soft_co_annotation && has_au) {
      batch.soft_emo_targets.row(ri) =
          soft_emotion_label(active, table, coupling.weighted_soft).transpose();
      batch.has_soft[r] = 1;
    }
  }
}

LossBreakdown aggregate(const LabeledBatch& batch, const Predictions& preds,
                        const LossWeights& weights, const CouplingConfig& coupling,
                        ProbabilityGradients* grad) {
  weights.validate();
  const Index n = static_cast<Index>(batch.rows());
  if (preds.emo_probs.rows() != n || preds.au_probs.rows() != n || preds.va.rows() != n) {
    throw Error(ErrorKind::kInvalidArgument, "aggregate: predictions do not match batch rows");
  }
  if (grad != nullptr) {
    *grad = ProbabilityGradients::zeros(batch.rows(), static_cast<std::size_t>(preds.emo_probs.cols()));
  }
  LossBreakdown out;
  out.weights = weights;

  // Expression cross entropy over rows carrying a (possibly co-annotated) label.
  const bool any_emo = std::any_of(batch.emo_labels.begin(), batch.emo_labels.end(),
                                   [](int y) { return y != kNoLabel; });
  if (any_emo) {
    Matrix g;
    out.l_emo = expression_ce(preds.emo_probs, batch.emo_labels, grad ? &g : nullptr);
    out.has_emo = true;
    if (grad != nullptr) grad->emo_probs += g;
  }

  // AU cross entropy: annotated entries with weight 1, co-annotated targets
  // with their relatedness weight.
  Matrix au_targets = batch.au_labels;
  Matrix au_weights = batch.au_mask;
  bool any_au = batch.au_mask.sum() > 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (const auto& t : batch.coanno_au[r]) {
      const auto k = static_cast<Index>(*au_index(t.au));
      const auto ri = static_cast<Index>(r);
      if (batch.au_mask(ri, k) > 0.0) continue;
      au_targets(ri, k) = t.target;
      au_weights(ri, k) = t.weight;
      any_au = true;
    }
  }
  if (any_au) {
    Matrix g;
    out.l_au = masked_au_bce(preds.au_probs, au_targets, au_weights, grad ? &g : nullptr);
    out.has_au = true;
    if (grad != nullptr && weights.lambda1 != 0.0) grad->au_probs += weights.lambda1 * g;
  }

  std::vector<Index> va_rows;
  for (Index r = 0; r < n; ++r) {
    if (batch.has_va[static_cast<std::size_t>(r)] != 0) va_rows.push_back(r);
  }
  if (!va_rows.empty()) {
    Matrix g;
    out.l_va = va_ccc_loss(gather_rows(preds.va, va_rows), gather_rows(batch.va_labels, va_rows),
                           grad ? &g : nullptr);
    out.has_va = true;
    if (grad != nullptr && weights.lambda2 != 0.0) {
      scatter_add_rows(grad->va, g, va_rows, weights.lambda2);
    }
  }

  std::vector<Index> soft_rows;
  for (Index r = 0; r < n; ++r) {
    if (batch.has_soft[static_cast<std::size_t>(r)] != 0) soft_rows.push_back(r);
  }
  if (coupling.soft_co_annotation && !soft_rows.empty()) {
    Matrix g;
    out.l_sca = soft_coannotation_loss(gather_rows(preds.emo_probs, soft_rows),
                                       gather_rows(batch.soft_emo_targets, soft_rows),
                                       grad ? &g : nullptr);
    out.has_sca = true;
    if (grad != nullptr && weights.mu_sca != 0.0) {
      scatter_add_rows(grad->emo_probs, g, soft_rows, weights.mu_sca);
    }
  }

  if (coupling.distribution_matching && n > 0) {
    const Matrix b = mixture_matrix(coupling.table, coupling.weighted_q);
    const Matrix q = preds.emo_probs * b;
    Matrix gp;
    Matrix gq;
    out.l_dm = distribution_matching_loss(preds.au_probs, q, coupling.full_bernoulli_dm,
                                          grad ? &gp : nullptr, grad ? &gq : nullptr);
    out.has_dm = true;
    if (grad != nullptr && weights.mu_dm != 0.0) {
      grad->au_probs += weights.mu_dm * gp;
      if (!coupling.stop_gradient_q) grad->emo_probs += weights.mu_dm * (gq * b.transpose());
    }
  }

  if (!(out.has_emo || out.has_au || out.has_va || out.has_dm || out.has_sca)) {
    throw Error(ErrorKind::kInvalidArgument, "aggregate: batch carries no labels for any task");
  }
  out.total = out.l_emo + weights.lambda1 * out.l_au + weights.lambda2 * out.l_va +
              weights.mu_dm * out.l_dm + weights.mu_sca * out.l_sca;
  return out;
}

std::string loss_csv_header() { return "epoch,l_emo,l_au,l_va,l_dm,l_sca,total"; }

std::string loss_csv_row(std::size_t index, const LossBreakdown& b) {
  std::ostringstream out;
  out << index << ',' << format_double(b.l_emo) << ',' << format_double(b.l_au) << ','
      << format_double(b.l_va) << ',' << format_double(b.l_dm) << ',' << format_double(b.l_sca)
      << ',' << format_double(b.total);
  return out.str();
}

}  // namespace affect
