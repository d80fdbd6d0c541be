#include "affect/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affect/csv.hpp"
#include "json.hpp"

namespace affect {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix sigmoid(const Matrix& logits) {
  return logits.unaryExpr([](double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim < 1) throw Error(ErrorKind::kValidation, "network: input_dim must be >= 1");
  if (hidden_dims.empty()) throw Error(ErrorKind::kValidation, "network: hidden_dims is empty");
  for (const auto h : hidden_dims) {
    if (h < 1) throw Error(ErrorKind::kValidation, "network: hidden layer of width 0");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorKind::kValidation, "network: dropout_rate must lie in [0, 1)");
  }
  if (emotion_classes < 2) {
    throw Error(ErrorKind::kValidation, "network: emotion head needs >= 2 classes");
  }
}

PredictionTriple prediction_row(const Predictions& p, std::size_t row) {
  const auto r = static_cast<Eigen::Index>(row);
  PredictionTriple t;
  t.emo_probs = p.emo_probs.row(r).transpose();
  t.au_probs = p.au_probs.row(r).transpose();
  t.valence = p.va(r, 0);
  t.arousal = p.va(r, 1);
  return t;
}

ProbabilityGradients ProbabilityGradients::zeros(std::size_t rows, std::size_t emotion_classes) {
  const auto n = static_cast<Eigen::Index>(rows);
  return {Matrix::Zero(n, static_cast<Eigen::Index>(emotion_classes)),
          Matrix::Zero(n, static_cast<Eigen::Index>(kNumAus)),
          Matrix::Zero(n, static_cast<Eigen::Index>(kNumVa))};
}

HeadGradients to_logit_gradients(const Predictions& preds, const ProbabilityGradients& g) {
  HeadGradients out;
  // Softmax Jacobian-vector product: dz = p * (g - <g, p>).
  const Vector inner = (g.emo_probs.array() * preds.emo_probs.array()).rowwise().sum();
  out.emo_logits =
      (preds.emo_probs.array() * (g.emo_probs.colwise() - inner).array()).matrix();
  out.au_logits =
      (g.au_probs.array() * preds.au_probs.array() * (1.0 - preds.au_probs.array())).matrix();
  out.va = g.va;
  return out;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  auto add_block = [&](std::size_t fan_in, std::size_t fan_out) {
    Block b{offset, offset + fan_in * fan_out, fan_in, fan_out};
    offset += fan_in * fan_out + fan_out;
    return b;
  };
  std::size_t width = config_.input_dim;
  for (const auto h : config_.hidden_dims) {
    trunk_.push_back(add_block(width, h));
    width = h;
  }
  trunk_params_ = offset;
  head_emo_ = add_block(width, config_.emotion_classes);
  head_au_ = add_block(width, kNumAus);
  head_va_ = add_block(width, kNumVa);
  params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
  grads_ = Vector::Zero(params_.size());
  velocity_ = Vector::Zero(params_.size());
  initialize();
}

void Network::initialize() {
  std::mt19937_64 rng(config_.seed);
  auto fill = [&](const Block& b) {
    const double limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < b.rows * b.cols; ++i) {
      params_[static_cast<Eigen::Index>(b.weight_offset + i)] = dist(rng);
    }
  };
  for (const auto& b : trunk_) fill(b);
  fill(head_emo_);
  fill(head_au_);
  fill(head_va_);
}

Vector& Network::mutable_parameters() {
  ++generation_;
  return params_;
}

void Network::set_parameters(const Vector& params) {
  if (params.size() != params_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "set_parameters: size mismatch");
  }
  ++generation_;
  params_ = params;
}

std::size_t Network::trunk_width() const { return config_.hidden_dims.back(); }

Eigen::Map<const Matrix> Network::weight(const Block& b) const {
  return {params_.data() + b.weight_offset, static_cast<Eigen::Index>(b.rows),
          static_cast<Eigen::Index>(b.cols)};
}

Eigen::Map<const Vector> Network::bias(const Block& b) const {
  return {params_.data() + b.bias_offset, static_cast<Eigen::Index>(b.cols)};
}

Eigen::Map<Matrix> Network::weight_grad(const Block& b) {
  return {grads_.data() + b.weight_offset, static_cast<Eigen::Index>(b.rows),
          static_cast<Eigen::Index>(b.cols)};
}

Eigen::Map<Vector> Network::bias_grad(const Block& b) {
  return {grads_.data() + b.bias_offset, static_cast<Eigen::Index>(b.cols)};
}

ForwardResult Network::forward(const Matrix& batch, Mode mode, std::mt19937_64* rng) const {
  if (static_cast<std::size_t>(batch.cols()) != config_.input_dim) {
    throw Error(ErrorKind::kInvalidArgument,
                "forward: batch has " + std::to_string(batch.cols()) + " columns, expected " +
                    std::to_string(config_.input_dim));
  }
  if (!batch.allFinite()) throw Error(ErrorKind::kNumeric, "forward: non-finite input");
  const bool dropout = mode == Mode::kTrain && config_.dropout_rate > 0.0;
  if (dropout && rng == nullptr) {
    throw Error(ErrorKind::kInvalidArgument, "forward: train-mode dropout needs an RNG");
  }

  ForwardResult out;
  out.cache.owner = this;
  out.cache.generation = generation_;
  out.cache.input = batch;

  const double keep = 1.0 - config_.dropout_rate;
  std::bernoulli_distribution keep_draw(keep);
  out.cache.activations.reserve(trunk_.size());
  const Matrix* x = &out.cache.input;
  for (const auto& b : trunk_) {
    Matrix a = ((*x) * weight(b)).rowwise() + bias(b).transpose();
    a = a.array().tanh().matrix();
    out.cache.tanh_outputs.push_back(a);
    if (dropout) {
      Matrix mask(a.rows(), a.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        for (Eigen::Index i = 0; i < mask.rows(); ++i) {
          mask(i, j) = keep_draw(*rng) ? 1.0 / keep : 0.0;
        }
      }
      a = a.cwiseProduct(mask);
      out.cache.masks.push_back(std::move(mask));
    }
    out.cache.activations.push_back(std::move(a));
    x = &out.cache.activations.back();
  }

  const Matrix& h = out.cache.activations.back();
  out.heads.emo_logits = (h * weight(head_emo_)).rowwise() + bias(head_emo_).transpose();
  out.heads.au_logits = (h * weight(head_au_)).rowwise() + bias(head_au_).transpose();
  out.heads.va = (h * weight(head_va_)).rowwise() + bias(head_va_).transpose();

  out.preds.emo_probs = softmax_rows(out.heads.emo_logits);
  out.preds.au_probs = sigmoid(out.heads.au_logits);
  out.preds.va = out.heads.va;
  return out;
}

void Network::backward(const ForwardCache& cache, const HeadGradients& upstream) {
  if (cache.owner != this || cache.generation != generation_) {
    throw Error(ErrorKind::kState, "backward: stale forward cache");
  }
  const Eigen::Index n = cache.input.rows();
  if (cache.activations.size() != trunk_.size() ||
      cache.tanh_outputs.size() != trunk_.size() || upstream.emo_logits.rows() != n ||
      upstream.au_logits.rows() != n || upstream.va.rows() != n ||
      static_cast<std::size_t>(upstream.emo_logits.cols()) != config_.emotion_classes ||
      upstream.au_logits.cols() != static_cast<Eigen::Index>(kNumAus) ||
      upstream.va.cols() != static_cast<Eigen::Index>(kNumVa)) {
    throw Error(ErrorKind::kState, "backward: cache or gradient shape mismatch");
  }

  const Matrix& h = cache.activations.back();
  Matrix dh = Matrix::Zero(n, h.cols());
  auto head = [&](const Block& b, const Matrix& dz) {
    weight_grad(b).noalias() += h.transpose() * dz;
    bias_grad(b) += dz.colwise().sum().transpose();
    dh.noalias() += dz * weight(b).transpose();
  };
  head(head_emo_, upstream.emo_logits);
  head(head_au_, upstream.au_logits);
  head(head_va_, upstream.va);

  for (std::size_t l = trunk_.size(); l-- > 0;) {
    const Block& b = trunk_[l];
    const Matrix& a = cache.activations[l];
    // a = tanh(z) * mask, so dz = dh * mask * (1 - tanh(z)^2).
    const Matrix& t = cache.tanh_outputs[l];
    Matrix dz = (dh.array() * (1.0 - t.array().square())).matrix();
    if (!cache.masks.empty()) dz = dz.cwiseProduct(cache.masks[l]);
    const Matrix& x = l == 0 ? cache.input : cache.activations[l - 1];
    weight_grad(b).noalias() += x.transpose() * dz;
    bias_grad(b) += dz.colwise().sum().transpose();
    if (l > 0) dh.noalias() = dz * weight(b).transpose();
  }
}

void Network::sgd_step(double learning_rate, double momentum, std::size_t first) {
  if (first > parameter_count()) throw Error(ErrorKind::kInvalidArgument, "sgd_step: bad offset");
  ++generation_;
  const auto n = static_cast<Eigen::Index>(parameter_count() - first);
  const auto f = static_cast<Eigen::Index>(first);
  if (momentum > 0.0) {
    velocity_.segment(f, n) = momentum * velocity_.segment(f, n) - learning_rate * grads_.segment(f, n);
    params_.segment(f, n) += velocity_.segment(f, n);
  } else {
    params_.segment(f, n) -= learning_rate * grads_.segment(f, n);
  }
}

void Network::copy_trunk_from(const Network& other) {
  if (other.config_.input_dim != config_.input_dim ||
      other.config_.hidden_dims != config_.hidden_dims) {
    throw Error(ErrorKind::kInvalidArgument, "copy_trunk_from: trunk shapes differ");
  }
  ++generation_;
  params_.head(static_cast<Eigen::Index>(trunk_params_)) =
      other.params_.head(static_cast<Eigen::Index>(trunk_params_));
}

std::string checkpoint_json(const Network& net) {
  const auto& c = net.config();
  json doc;
  doc["version"] = kCheckpointVersion;
  doc["config"] = {{"input_dim", c.input_dim},
                   {"hidden_dims", c.hidden_dims},
                   {"dropout_rate", c.dropout_rate},
                   {"seed", c.seed},
                   {"emotion_classes", c.emotion_classes}};
  // Hex-float text keeps every bit of every parameter.
  json params = json::array();
  char buf[64];
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", net.parameters()[i]);
    params.push_back(buf);
  }
  doc["parameters"] = std::move(params);
  return doc.dump() + "\n";
}

Network parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("checkpoint: ") + e.what());
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw Error(ErrorKind::kParse, "checkpoint: unsupported version");
  }
  NetworkConfig c;
  const auto& jc = doc.at("config");
  c.input_dim = jc.at("input_dim").get<std::size_t>();
  c.hidden_dims = jc.at("hidden_dims").get<std::vector<std::size_t>>();
  c.dropout_rate = jc.at("dropout_rate").get<double>();
  c.seed = jc.at("seed").get<std::uint64_t>();
  c.emotion_classes = jc.at("emotion_classes").get<std::size_t>();
  Network net(c);
  const auto& jp = doc.at("parameters");
  if (jp.size() != net.parameter_count()) {
    throw Error(ErrorKind::kParse, "checkpoint: parameter count does not match config");
  }
  Vector params(static_cast<Eigen::Index>(jp.size()));
  for (std::size_t i = 0; i < jp.size(); ++i) {
    const auto s = jp[i].get<std::string>();
    char* end = nullptr;
    params[static_cast<Eigen::Index>(i)] = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
      throw Error(ErrorKind::kParse, "checkpoint: bad parameter '" + s + "'");
    }
  }
  net.set_parameters(params);
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_json(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

GradientCheckResult gradient_check(const Network& net, const LossClosure& loss,
                                   const GradientCheckOptions& options) {
  Network probe = net;
  Vector analytic;
  const double base = loss(probe, &analytic);
  if (loss(probe, nullptr) != base) {
    throw Error(ErrorKind::kState, "gradient_check: loss closure is not deterministic");
  }
  if (static_cast<std::size_t>(analytic.size()) != probe.parameter_count()) {
    throw Error(ErrorKind::kInvalidArgument, "gradient_check: closure gradient has wrong size");
  }

  std::vector<std::size_t> coords(probe.parameter_count());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradientCheckResult result;
  for (const auto idx : coords) {
    const auto i = static_cast<Eigen::Index>(idx);
    const double original = probe.parameters()[i];
    probe.mutable_parameters()[i] = original + options.step;
    const double plus = loss(probe, nullptr);
    probe.mutable_parameters()[i] = original - options.step;
    const double minus = loss(probe, nullptr);
    probe.mutable_parameters()[i] = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[i];
    const double denom =
        std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = idx;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace affect
