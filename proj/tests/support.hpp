#pragma once

// Shared fixtures: random labeled batches and loss closures for gradient checks.

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "affect/coupling.hpp"
#include "affect/losses.hpp"
#include "affect/network.hpp"

namespace affect::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(AFFECT_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_features(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  return x;
}

inline Matrix random_simplex(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::exponential_distribution<double> e(1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = e(rng);
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

/// Every row carries every label block, so each loss term is exercised.
inline LabeledBatch random_batch(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
  auto b = LabeledBatch::with_rows(rows, dim);
  b.features = random_features(rng, rows, dim);
  std::uniform_int_distribution<int> emo(0, static_cast<int>(kNumEmotions) - 1);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> va(-1.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    b.emo_labels[r] = emo(rng);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(kNumAus); ++k) {
      b.au_labels(ri, k) = coin(rng) ? 1.0 : 0.0;
      b.au_mask(ri, k) = coin(rng) ? 1.0 : 0.0;
    }
    b.va_labels(ri, 0) = va(rng);
    b.va_labels(ri, 1) = va(rng);
    b.has_va[r] = 1;
  }
  b.soft_emo_targets = random_simplex(rng, rows, kNumEmotions);
  std::fill(b.has_soft.begin(), b.has_soft.end(), 1);
  return b;
}

/// Loss of the network outputs for `x`, given as (loss, d loss / d probabilities).
using OutputLoss = std::function<double(const Predictions&, ProbabilityGradients*)>;

inline LossClosure closure(const Matrix& x, OutputLoss loss) {
  return [x, loss](const Network& net, Vector* grad) {
    if (grad == nullptr) return loss(net.forward(x, Mode::kEval).preds, nullptr);
    Network copy = net;
    copy.zero_gradients();
    auto fwd = copy.forward(x, Mode::kEval);
    ProbabilityGradients pg = ProbabilityGradients::zeros(
        static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(fwd.preds.emo_probs.cols()));
    const double value = loss(fwd.preds, &pg);
    copy.backward(fwd.cache, to_logit_gradients(fwd.preds, pg));
    *grad = copy.gradients();
    return value;
  };
}

/// One closure per loss term on a fixed batch, plus the full weighted objective.
inline std::vector<std::pair<std::string, LossClosure>> loss_closures(const LabeledBatch& b) {
  std::vector<std::pair<std::string, LossClosure>> out;
  const Matrix& x = b.features;
  out.emplace_back("expression_ce", closure(x, [b](const Predictions& p, ProbabilityGradients* g) {
    return expression_ce(p.emo_probs, b.emo_labels, g ? &g->emo_probs : nullptr);
  }));
  out.emplace_back("masked_au_bce", closure(x, [b](const Predictions& p, ProbabilityGradients* g) {
    return masked_au_bce(p.au_probs, b.au_labels, b.au_mask, g ? &g->au_probs : nullptr);
  }));
  out.emplace_back("va_ccc", closure(x, [b](const Predictions& p, ProbabilityGradients* g) {
    return va_ccc_loss(p.va, b.va_labels, g ? &g->va : nullptr);
  }));
  for (const bool weighted : {false, true}) {
    for (const bool full : {false, true}) {
      const Matrix mix = mixture_matrix(cognitive_table(), weighted);
      out.emplace_back(std::string("distribution_matching") + (weighted ? "_weighted" : "") +
                           (full ? "_full" : ""),
                       closure(x, [mix, full](const Predictions& p, ProbabilityGradients* g) {
                         Matrix gp, gq;
                         const double v = distribution_matching_loss(
                             p.au_probs, p.emo_probs * mix, full, g ? &gp : nullptr,
                             g ? &gq : nullptr);
                         if (g != nullptr) {
                           g->au_probs = gp;
                           g->emo_probs = gq * mix.transpose();
                         }
                         return v;
                       }));
    }
  }
  out.emplace_back("soft_coannotation", closure(x, [b](const Predictions& p, ProbabilityGradients* g) {
    return soft_coannotation_loss(p.emo_probs, b.soft_emo_targets, g ? &g->emo_probs : nullptr);
  }));
  // Co-annotated AU targets carry fractional weights.
  Matrix targets = Matrix::Zero(static_cast<Eigen::Index>(b.rows()), kNumAus);
  Matrix weights = targets;
  for (std::size_t r = 0; r < b.rows(); ++r) {
    for (const auto& t : co_annotate_emotion_to_aus(
             emotion_at(static_cast<std::size_t>(b.emo_labels[r])), cognitive_table(), true)) {
      const auto k = static_cast<Eigen::Index>(*au_index(t.au));
      targets(static_cast<Eigen::Index>(r), k) = t.target;
      weights(static_cast<Eigen::Index>(r), k) = t.weight;
    }
  }
  out.emplace_back("coannotation_bce",
                   closure(x, [targets, weights](const Predictions& p, ProbabilityGradients* g) {
                     return masked_au_bce(p.au_probs, targets, weights, g ? &g->au_probs : nullptr);
                   }));
  CouplingConfig all;
  all.co_annotation = all.soft_co_annotation = all.distribution_matching = true;
  LabeledBatch coupled = b;
  std::fill(coupled.has_soft.begin(), coupled.has_soft.end(), 0);
  for (std::size_t r = 0; r < coupled.rows(); r += 2) {
    coupled.au_mask.row(static_cast<Eigen::Index>(r)).setZero();
    if (r + 1 < coupled.rows()) coupled.emo_labels[r + 1] = kNoLabel;
  }
  couple_batch(coupled, all);
  const LossWeights w{0.7, 1.3, 0.4, 0.6};
  out.emplace_back("aggregate", closure(x, [coupled, w, all](const Predictions& p,
                                                             ProbabilityGradients* g) {
    return aggregate(coupled, p, w, all, g).total;
  }));
  return out;
}

}  // namespace affect::testing
