#include "affect/zeroshot.hpp"

#include <cmath>
#include <sstream>

#include "affect/csv.hpp"

namespace affect {

namespace {

std::vector<std::string> prediction_columns() {
  std::vector<std::string> cols;
  for (const auto e : kAllEmotions) cols.push_back("emo_" + std::string(emotion_name(e)));
  for (const int id : kCanonicalAuIds) cols.push_back("au_" + std::to_string(id));
  cols.emplace_back("valence");
  cols.emplace_back("arousal");
  return cols;
}

}  // namespace

CompoundPredictionConfig CompoundPredictionConfig::defaults(const RelatednessTable& table) {
  CompoundPredictionConfig cfg;
  cfg.classes = default_compound_classes(table);
  return cfg;
}

void CompoundPredictionConfig::validate() const {
  if (classes.empty()) throw Error(ErrorKind::kValidation, "zero-shot: no compound classes");
  for (const auto& c : classes) {
    if (c.emo1 == c.emo2) {
      throw Error(ErrorKind::kValidation, "zero-shot: class '" + c.name + "' repeats an emotion");
    }
  }
}

double candidate_score(const PredictionTriple& pred, const CompoundClass& cls, bool weighted,
                       bool valence_term) {
  if (pred.emo_probs.size() != static_cast<Eigen::Index>(kNumEmotions) ||
      pred.au_probs.size() != static_cast<Eigen::Index>(kNumAus)) {
    throw Error(ErrorKind::kInvalidArgument, "candidate_score: prediction has wrong shape");
  }
  double norm = 0.0;
  double au_term = 0.0;
  for (std::size_t k = 0; k < kNumAus; ++k) {
    const double w = cls.au_weights[k];
    if (w <= 0.0) continue;
    const double p_cls = weighted ? w : 1.0;
    norm += p_cls;
    au_term += pred.au_probs(static_cast<Eigen::Index>(k)) * p_cls;
  }
  double score = norm > 0.0 ? au_term / norm : 0.0;
  score += pred.emo_probs(static_cast<Eigen::Index>(index_of(cls.emo1)));
  score += pred.emo_probs(static_cast<Eigen::Index>(index_of(cls.emo2)));
  if (valence_term && cls.valence_term_applies && pred.valence != 0.0) {
    score += 0.5 * (std::copysign(1.0, pred.valence) + 1.0);
  }
  return score;
}

Classification classify(const PredictionTriple& pred, const CompoundPredictionConfig& cfg) {
  Classification out;
  out.scores.reserve(cfg.classes.size());
  for (const auto& c : cfg.classes) {
    out.scores.push_back(candidate_score(pred, c, cfg.weighted, cfg.valence_term));
  }
  for (std::size_t i = 1; i < out.scores.size(); ++i) {
    if (out.scores[i] > out.scores[out.best]) out.best = i;
  }
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (i != out.best && out.scores[i] == out.scores[out.best]) out.tie = true;
  }
  return out;
}

std::vector<Classification> classify_all(std::span<const PredictionTriple> preds,
                                         const CompoundPredictionConfig& cfg) {
  cfg.validate();
  std::vector<Classification> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(classify(p, cfg));
  return out;
}

std::string predictions_csv(const Predictions& preds) {
  if (preds.emo_probs.cols() != static_cast<Eigen::Index>(kNumEmotions)) {
    throw Error(ErrorKind::kInvalidArgument, "predictions_csv: expects a 7-way expression head");
  }
  std::ostringstream out;
  const auto cols = prediction_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (std::size_t r = 0; r < preds.rows(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (Eigen::Index j = 0; j < preds.emo_probs.cols(); ++j) {
      out << (j ? "," : "") << format_double(preds.emo_probs(ri, j));
    }
    for (Eigen::Index j = 0; j < preds.au_probs.cols(); ++j) {
      out << ',' << format_double(preds.au_probs(ri, j));
    }
    out << ',' << format_double(preds.va(ri, 0)) << ',' << format_double(preds.va(ri, 1)) << '\n';
  }
  return out.str();
}

std::vector<PredictionTriple> parse_predictions_csv(std::string_view text,
                                                    std::string_view context) {
  const auto table = parse_csv(text, context);
  const auto cols = prediction_columns();
  std::vector<std::size_t> at;
  for (const auto& c : cols) {
    const auto idx = table.column(c);
    if (!idx) {
      throw Error(ErrorKind::kParse, std::string(context) + ": missing column '" + c + "'");
    }
    at.push_back(*idx);
  }
  std::vector<PredictionTriple> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = std::string(context) + " row " + std::to_string(r + 1);
    auto value = [&](std::size_t c) { return parse_double(row[at[c]], where); };
    PredictionTriple p;
    p.emo_probs.resize(kNumEmotions);
    p.au_probs.resize(kNumAus);
    std::size_t c = 0;
    for (std::size_t i = 0; i < kNumEmotions; ++i) p.emo_probs(static_cast<Eigen::Index>(i)) = value(c++);
    for (std::size_t i = 0; i < kNumAus; ++i) p.au_probs(static_cast<Eigen::Index>(i)) = value(c++);
    p.valence = value(c++);
    p.arousal = value(c++);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PredictionTriple> load_predictions(const std::filesystem::path& path) {
  return parse_predictions_csv(read_text_file(path), path.string());
}

std::string scores_csv(std::span<const Classification> results,
                       const CompoundPredictionConfig& cfg) {
  std::ostringstream out;
  out << "row";
  for (const auto& c : cfg.classes) out << ",score_" << c.name;
  out << ",argmax,tie\n";
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& res = results[r];
    out << r;
    for (const double s : res.scores) out << ',' << format_double(s);
    out << ',' << cfg.classes[res.best].name << ',' << (res.tie ? 1 : 0) << '\n';
  }
  return out.str();
}

ZeroShotEvaluation evaluate_zero_shot(std::span<const PredictionTriple> preds,
                                      std::span<const int> labels,
                                      const CompoundPredictionConfig& cfg) {
  if (preds.size() != labels.size()) {
    throw Error(ErrorKind::kInvalidArgument, "zero-shot: prediction and label counts differ");
  }
  if (preds.empty()) throw Error(ErrorKind::kInvalidArgument, "zero-shot: no samples");
  ZeroShotEvaluation out;
  out.results = classify_all(preds, cfg);
  ConfusionMatrix cm(cfg.classes.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= cfg.classes.size()) {
      throw Error(ErrorKind::kInvalidArgument, "zero-shot: label outside the class list");
    }
    cm.add(static_cast<std::size_t>(labels[i]), out.results[i].best);
  }
  out.stats = confusion_stats(cm);
  return out;
}

ZeroShotEvaluation evaluate_zero_shot(const Network& net, std::span<const Sample> samples,
                                      const CompoundPredictionConfig& cfg) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidArgument, "zero-shot: no samples");
  Matrix x(static_cast<Eigen::Index>(samples.size()),
           static_cast<Eigen::Index>(samples.front().features.size()));
  std::vector<int> labels;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r].features.size() != static_cast<std::size_t>(x.cols())) {
      throw Error(ErrorKind::kInvalidArgument, "zero-shot: ragged feature dimensions");
    }
    x.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(samples[r].features.data(), x.cols());
    labels.push_back(samples[r].emotion);
  }
  const auto preds = net.forward(x, Mode::kEval).preds;
  std::vector<PredictionTriple> rows;
  for (std::size_t r = 0; r < preds.rows(); ++r) rows.push_back(prediction_row(preds, r));
  return evaluate_zero_shot(rows, labels, cfg);
}

}  // namespace affect
