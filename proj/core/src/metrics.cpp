#include "affect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "affect/csv.hpp"

namespace affect {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": length mismatch (" +
                                                 std::to_string(a) + " vs " +
                                                 std::to_string(b) + ")");
  }
}

}  // namespace

double ccc(std::span<const double> truth, std::span<const double> pred) {
  require_same_length(truth.size(), pred.size(), "ccc");
  if (truth.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "ccc needs at least two samples");
  }
  const double n = static_cast<double>(truth.size());
  double mt = 0.0;
  double mp = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!std::isfinite(truth[i]) || !std::isfinite(pred[i])) {
      throw Error(ErrorKind::kNumeric, "ccc: non-finite value");
    }
    mt += truth[i];
    mp += pred[i];
  }
  mt /= n;
  mp /= n;
  double vt = 0.0;
  double vp = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double dt = truth[i] - mt;
    const double dp = pred[i] - mp;
    vt += dt * dt;
    vp += dp * dp;
    cov += dt * dp;
  }
  vt /= n;
  vp /= n;
  cov /= n;
  // A constant series has exactly zero covariance; the mean may carry rounding.
  const auto constant = [](std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  };
  if (constant(truth)) vt = 0.0, cov = 0.0;
  if (constant(pred)) vp = 0.0, cov = 0.0;
  const double denom = vt + vp + (mt - mp) * (mt - mp);
  if (denom == 0.0) return mt == mp ? 1.0 : 0.0;
  return 2.0 * cov / denom;
}

double f1_binary(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred) {
  require_same_length(truth.size(), pred.size(), "f1_binary");
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] != 0;
    const bool p = pred[i] != 0;
    tp += (t && p) ? 1 : 0;
    fp += (!t && p) ? 1 : 0;
    fn += (t && !p) ? 1 : 0;
  }
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double binary_accuracy(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred) {
  require_same_length(truth.size(), pred.size(), "binary_accuracy");
  if (truth.empty()) throw Error(ErrorKind::kInvalidArgument, "binary_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += ((truth[i] != 0) == (pred[i] != 0)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw Error(ErrorKind::kInvalidArgument, "confusion matrix needs >= 1 class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t count) {
  if (truth >= classes_ || pred >= classes_) {
    throw Error(ErrorKind::kInvalidArgument, "confusion matrix index out of range");
  }
  counts_[truth * classes_ + pred] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

ConfusionStats confusion_stats(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw Error(ErrorKind::kInvalidArgument, "confusion_stats: all-zero matrix");
  const std::size_t k = cm.classes();
  ConfusionStats out;
  out.recalls.assign(k, std::numeric_limits<double>::quiet_NaN());
  out.f1.assign(k, std::numeric_limits<double>::quiet_NaN());

  std::uint64_t trace = 0;
  double recall_sum = 0.0;
  double f1_sum = 0.0;
  std::size_t rows_present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto diag = cm.at(c, c);
    trace += diag;
    const auto row = cm.row_sum(c);
    std::uint64_t col = 0;
    for (std::size_t t = 0; t < k; ++t) col += cm.at(t, c);
    if (row == 0) continue;
    ++rows_present;
    out.recalls[c] = static_cast<double>(diag) / static_cast<double>(row);
    recall_sum += out.recalls[c];
    const auto fp = col - diag;
    const auto fn = row - diag;
    out.f1[c] = static_cast<double>(2 * diag) / static_cast<double>(2 * diag + fp + fn);
    f1_sum += out.f1[c];
  }
  out.total_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  out.uar = recall_sum / static_cast<double>(rows_present);
  out.mean_diagonal = out.uar;
  out.mean_f1 = f1_sum / static_cast<double>(rows_present);
  return out;
}

ChallengeScores challenge_scores(std::span<const double> per_au_f1,
                                 std::span<const double> per_au_acc,
                                 double emo_f1_mean, double uar) {
  if (per_au_f1.empty() || per_au_acc.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "challenge_scores: empty AU vectors");
  }
  auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  ChallengeScores s;
  s.au_score = 0.5 * (mean(per_au_f1) + mean(per_au_acc));
  s.expr_score = 0.5 * (emo_f1_mean + uar);
  return s;
}

std::string metrics_csv(std::span<const MetricRecord> records) {
  std::ostringstream out;
  out << "task,metric,split,value\n";
  for (const auto& r : records) {
    out << r.task << ',' << r.metric << ',' << r.split << ',' << format_double(r.value) << '\n';
  }
  return out.str();
}

}  // namespace affect
