#pragma once

// Experiment configuration file shared by the command-line tool and tests.
//
//   { "generator": {...}, "network": {...}, "train": {...}, "coupling": {...},
//     "ablation": {...}, "fine_tune": {...}, "zero_shot": {...} }
//
// Every block and key is optional; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "affect/trainer.hpp"
#include "affect/zeroshot.hpp"

namespace affect {

struct ZeroShotSettings {
  bool weighted = false;
  bool valence_term = true;
  std::size_t per_class = 200;
  std::string classes = "default";  // "default" or a class list file
};

struct FineTuneSettings {
  FineTuneConfig train;
  std::size_t train_per_class = 20;
  std::size_t test_per_class = 100;
};

struct ExperimentConfig {
  GeneratorConfig generator;
  NetworkConfig network;
  TrainConfig train;
  double mu_dm = 0.005;  // weight used by the ablation grid's DM variants
  double mu_sca = 0.1;   // weight used by the ablation grid's soft variants
  std::size_t ablation_seeds = 5;
  bool ablation_single_task = true;
  std::size_t ablation_jobs = 1;
  FineTuneSettings fine_tune;
  ZeroShotSettings zero_shot;
  /// Table sources as written in the file ("cognitive", "empirical" or a path).
  std::string generator_table = "cognitive";
  std::string coupling_table = "cognitive";
  /// Directory that relative paths in the file refer to.
  std::filesystem::path base_dir;

  /// Default synthetic benchmark used by ablate and the acceptance tests.
  static ExperimentConfig benchmark();

  /// Copies derived fields (network input width) and validates every block.
  void finalize();

  /// Seeds every component from one master seed.
  void apply_seed(std::uint64_t seed);

  AblationConfig ablation(std::uint64_t first_seed) const;
  CompoundPredictionConfig zero_shot_config() const;
};

/// Starts from benchmark() and overrides the keys present in the file.
/// Relative table and class-list paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Resolved configuration as JSON (same schema as the input file).
std::string experiment_config_json(const ExperimentConfig& cfg);

/// One line per accepted key: block.key, type, default and description.
std::string config_reference();

/// "cognitive", "empirical" or a table file.
RelatednessTable resolve_table(std::string_view source, const std::filesystem::path& base_dir = {});

}  // namespace affect
