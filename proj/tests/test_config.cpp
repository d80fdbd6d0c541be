#include <catch_amalgamated.hpp>

#include "affect/config.hpp"

using namespace affect;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("empty config is the benchmark", "[config]") {
  auto b = ExperimentConfig::benchmark();
  b.finalize();
  CHECK(experiment_config_json(parse_experiment_config("{}")) == experiment_config_json(b));
}

TEST_CASE("config keys override and round-trip", "[config]") {
  const auto cfg = parse_experiment_config(
      R"({"train":{"epochs":3,"learning_rate":0.01},"generator":{"feature_dim":16},)"
      R"("coupling":{"distribution_matching":true},"ablation":{"seeds":2}})");
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.learning_rate == 0.01);
  CHECK(cfg.network.input_dim == 16);
  CHECK(cfg.train.coupling.distribution_matching);
  CHECK(cfg.ablation_seeds == 2);
  const auto again = parse_experiment_config(experiment_config_json(cfg));
  CHECK(experiment_config_json(again) == experiment_config_json(cfg));
}

TEST_CASE("config errors", "[config]") {
  CHECK_THROWS_WITH(parse_experiment_config(R"({"train":{"epochz":3}})"),
                    ContainsSubstring("train.epochz"));
  CHECK_THROWS_WITH(parse_experiment_config(R"({"trainer":{}})"), ContainsSubstring("trainer"));
  CHECK_THROWS_AS(parse_experiment_config(R"({"train":{"epochs":"three"}})"), Error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"train":{"epochs":0}})"), Error);
  CHECK_THROWS_AS(parse_experiment_config("[1,2"), Error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"coupling":{"table":"nowhere.json"}})"), Error);
}

TEST_CASE("seeding derives every stream from one value", "[config]") {
  auto a = ExperimentConfig::benchmark(), b = ExperimentConfig::benchmark();
  a.apply_seed(7);
  b.apply_seed(7);
  CHECK(a.network.seed == b.network.seed);
  CHECK(a.generator.seed == 7);
  CHECK(a.network.seed != a.train.seed);
  const auto ab = a.ablation(10);
  CHECK(ab.seeds == std::vector<std::uint64_t>{10, 11, 12, 13, 14});
}

TEST_CASE("reference lists every key", "[config]") {
  const auto ref = config_reference();
  for (const char* key : {"train.epochs", "coupling.weighted_q", "ablation.mu_dm",
                          "fine_tune.epochs", "zero_shot.valence_term"}) {
    CHECK_THAT(ref, ContainsSubstring(key));
  }
  CHECK(resolve_table("empirical") == empirical_table());
  CHECK_THROWS_AS(resolve_table("missing-table.json"), Error);
}
