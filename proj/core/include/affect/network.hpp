#pragma once

// Shared-trunk multi-task network.
//
// A stack of fully connected tanh layers feeds three linear heads:
// expression logits (softmax), AU logits (sigmoid) and a two-unit
// valence/arousal regressor. All parameters live in one flat vector so that
// optimizers, checkpoints and finite-difference checks address them
// uniformly; per-layer weights are Eigen::Map views into that vector.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "affect/types.hpp"

namespace affect {

struct NetworkConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims{64, 64};
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;
  /// Width of the categorical head; 7 for basic expressions, K after
  /// compound fine-tuning.
  std::size_t emotion_classes = kNumEmotions;

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Row-wise network outputs for a batch (one row per sample).
struct Predictions {
  Matrix emo_probs;  // N x K, rows on the simplex
  Matrix au_probs;   // N x 17, entries in (0, 1)
  Matrix va;         // N x 2, unbounded

  std::size_t rows() const { return static_cast<std::size_t>(emo_probs.rows()); }
};

/// Outputs of a single sample.
struct PredictionTriple {
  Vector emo_probs;
  Vector au_probs;
  double valence = 0.0;
  double arousal = 0.0;
};

PredictionTriple prediction_row(const Predictions& p, std::size_t row);

struct HeadOutputs {
  Matrix emo_logits;
  Matrix au_logits;
  Matrix va;
};

/// Loss gradients with respect to head outputs (logits and VA values).
struct HeadGradients {
  Matrix emo_logits;
  Matrix au_logits;
  Matrix va;
};

/// Gradients with respect to the probability outputs.
struct ProbabilityGradients {
  Matrix emo_probs;
  Matrix au_probs;
  Matrix va;

  static ProbabilityGradients zeros(std::size_t rows, std::size_t emotion_classes);
};

/// Chains probability-space gradients through softmax and sigmoid.
HeadGradients to_logit_gradients(const Predictions& preds, const ProbabilityGradients& g);

enum class Mode { kEval, kTrain };

class Network;

struct ForwardCache {
  const Network* owner = nullptr;
  std::uint64_t generation = 0;
  Matrix input;
  std::vector<Matrix> tanh_outputs;  // trunk layer outputs before dropout
  std::vector<Matrix> activations;   // after dropout (equal in eval mode)
  std::vector<Matrix> masks;        // scaled dropout masks (empty in eval mode)
};

struct ForwardResult {
  HeadOutputs heads;
  Predictions preds;
  ForwardCache cache;
};

class Network {
 public:
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }

  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Vector& parameters() const { return params_; }
  /// Mutable access invalidates outstanding forward caches.
  Vector& mutable_parameters();
  void set_parameters(const Vector& params);

  const Vector& gradients() const { return grads_; }
  void zero_gradients() { grads_.setZero(); }

  /// Dropout draws from `rng` in train mode; `rng` may be null when the
  /// dropout rate is 0 or in eval mode.
  ForwardResult forward(const Matrix& batch, Mode mode, std::mt19937_64* rng = nullptr) const;

  /// Accumulates exact parameter gradients for the given head gradients.
  void backward(const ForwardCache& cache, const HeadGradients& upstream);

  /// Plain SGD step with optional heavy-ball momentum. Parameters before
  /// `first` (e.g. the trunk) are left untouched.
  void sgd_step(double learning_rate, double momentum, std::size_t first = 0);

  /// Copies trunk parameters from a network with identical trunk shape.
  void copy_trunk_from(const Network& other);

  std::size_t trunk_width() const;

  /// Offset of the first head parameter in the flat vector.
  std::size_t trunk_parameter_count() const { return trunk_params_; }

 private:
  struct Block {
    std::size_t weight_offset;
    std::size_t bias_offset;
    std::size_t rows;  // fan-in
    std::size_t cols;  // fan-out
  };

  Eigen::Map<const Matrix> weight(const Block& b) const;
  Eigen::Map<const Vector> bias(const Block& b) const;
  Eigen::Map<Matrix> weight_grad(const Block& b);
  Eigen::Map<Vector> bias_grad(const Block& b);

  void initialize();

  NetworkConfig config_;
  std::vector<Block> trunk_;
  Block head_emo_{};
  Block head_au_{};
  Block head_va_{};
  std::size_t trunk_params_ = 0;
  Vector params_;
  Vector grads_;
  Vector velocity_;
  std::uint64_t generation_ = 0;
};

/// JSON checkpoint: config plus the flat parameter vector at round-trip
/// precision. load_checkpoint(save_checkpoint(n)) reproduces n bit-exactly.
std::string checkpoint_json(const Network& net);
Network parse_checkpoint(std::string_view text);
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

/// Loss closure for gradient checking. When `grad` is non-null it must be
/// filled with the analytic gradient of the returned loss with respect to
/// the network parameters.
using LossClosure = std::function<double(const Network& net, Vector* grad)>;

struct GradientCheckOptions {
  double step = 1e-5;
  std::size_t coordinates = 200;  // sampled parameter subset; all if larger
  std::uint64_t seed = 0;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double denominator_floor = 1e-6;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares the closure's analytic gradient against central differences.
/// Throws Error(kState) if two evaluations at the same point differ.
GradientCheckResult gradient_check(const Network& net, const LossClosure& loss,
                                   const GradientCheckOptions& options = {});

}  // namespace affect
