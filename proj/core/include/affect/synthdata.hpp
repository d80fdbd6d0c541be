#pragma once

// Seeded synthetic affect data and the three-stream batch scheduler.
//
// Each sample has a latent expression, a valence/arousal point drawn from
// that expression's region and AU activations drawn from the relatedness
// table (Bernoulli(w) for associated AUs, Bernoulli(background) otherwise).
// Features are a fixed random linear map of the latent labels plus Gaussian
// noise. The three training pools keep only their own task's labels.
//
// Every sample is generated from its own RNG stream derived from
// (seed, pool, split, index), so results do not depend on generation order.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "affect/losses.hpp"
#include "affect/relatedness.hpp"
#include "affect/types.hpp"

namespace affect {

struct VaRegion {
  double valence = 0.0;
  double arousal = 0.0;
  double spread = 0.15;  // standard deviation of both coordinates

  friend bool operator==(const VaRegion&, const VaRegion&) = default;
};

std::array<VaRegion, kNumEmotions> default_va_regions();

struct GeneratorConfig {
  RelatednessTable table = cognitive_table();
  std::size_t n_va = 4010;
  std::size_t n_au = 2470;
  std::size_t n_expr = 1030;
  std::size_t n_test = 500;  // held-out samples per pool
  std::size_t n_full = 0;    // fully labeled samples for relatedness inference
  std::size_t feature_dim = 32;
  double noise_sigma = 0.5;
  double au_background_rate = 0.05;
  std::size_t annotated_aus = 12;  // AUs annotated per training AU sample
  /// Fraction of expression samples that also keep their VA labels.
  double expr_va_overlap = 0.0;
  std::array<VaRegion, kNumEmotions> va_regions = default_va_regions();
  double emotion_scale = 1.0;
  double va_scale = 1.0;
  double au_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  std::vector<double> features;
  int emotion = kNoLabel;
  AuVector au{};
  AuVector au_mask{};
  bool has_va = false;
  double valence = 0.0;
  double arousal = 0.0;

  bool has_au() const;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

struct AffectDatasets {
  DatasetSplit va;
  DatasetSplit au;
  DatasetSplit expr;
  std::vector<Sample> full;  // all labels present; empty unless requested

  const DatasetSplit& pool(TaskSet s) const;
  DatasetSplit& pool(TaskSet s);
  std::size_t feature_dim() const;
};

AffectDatasets generate(const GeneratorConfig& cfg);

/// Samples of compound classes: the expression latent is an even mix of the
/// two constituents, VA is the mean of draws from both regions and AUs follow
/// the class AU weights. `emotion` holds the class index.
std::vector<Sample> generate_compound(const GeneratorConfig& cfg,
                                      std::span<const CompoundClass> classes,
                                      std::size_t per_class, std::uint64_t stream);

/// The fixed feature map (feature_dim x 26) used by generate().
Matrix feature_map(const GeneratorConfig& cfg);

/// Rows with both expression and a complete AU vector, for infer_table.
std::vector<AuObservation> au_observations(std::span<const Sample> samples);

/// Dataset CSV: feature_0..feature_{D-1}, emo, au_<id>..., delta_<id>...,
/// valence, arousal. Empty fields mean "not annotated".
std::string dataset_csv(std::span<const Sample> samples);
std::vector<Sample> parse_dataset_csv(std::string_view text, std::string_view context,
                                      bool require_delta);
void save_dataset(std::span<const Sample> samples, const std::filesystem::path& path);
std::vector<Sample> load_dataset(const std::filesystem::path& path, bool require_delta = false);

/// Writes <pool>_<split>.csv files (and full.csv when present) into `dir`.
void save_datasets(const AffectDatasets& data, const std::filesystem::path& dir);
AffectDatasets load_datasets(const std::filesystem::path& dir);

/// Per-pool batch sizes such that one epoch of `iterations` batches visits
/// batch_size * iterations distinct samples of every pool.
struct BatchSchedule {
  std::array<std::size_t, 3> batch_sizes{};  // indexed by TaskSet
  std::size_t iterations = 0;

  std::size_t batch_rows() const;
  std::size_t used(TaskSet s) const { return batch_sizes[static_cast<std::size_t>(s)] * iterations; }
};

/// Throws when `iterations` is 0 or exceeds the smallest pool.
BatchSchedule make_schedule(std::array<std::size_t, 3> pool_sizes, std::size_t iterations);

/// Builds a LabeledBatch from samples (labels copied as present).
LabeledBatch to_batch(std::span<const Sample* const> samples, std::span<const TaskSet> origin);
LabeledBatch to_batch(std::span<const Sample> samples, TaskSet origin);

/// Walks one epoch: each pool is shuffled with the epoch seed and every
/// next_batch() concatenates the next slice of each active pool.
class EpochSampler {
 public:
  EpochSampler(const BatchSchedule& schedule, const AffectDatasets& data,
               std::uint64_t epoch_seed, std::array<bool, 3> active = {true, true, true});

  bool exhausted() const { return iteration_ >= schedule_.iterations; }
  std::size_t iteration() const { return iteration_; }

  /// Throws Error(kState) once the epoch is exhausted.
  LabeledBatch next_batch();

  /// (pool, index) of every row of the last batch, in row order.
  const std::vector<std::pair<TaskSet, std::size_t>>& last_rows() const { return last_rows_; }

 private:
  BatchSchedule schedule_;
  const AffectDatasets* data_;
  std::array<bool, 3> active_;
  std::array<std::vector<std::size_t>, 3> order_;
  std::size_t iteration_ = 0;
  std::vector<std::pair<TaskSet, std::size_t>> last_rows_;
};

/// splitmix64-based stream derivation used for all seeded sub-streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace affect
