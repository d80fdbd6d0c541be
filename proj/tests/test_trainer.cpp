#include <set>

#include <catch_amalgamated.hpp>

#include "affect/trainer.hpp"
#include "support.hpp"

using namespace affect;
using namespace affect::testing;
using Catch::Approx;

namespace {

GeneratorConfig tiny_data(std::uint64_t seed) {
  GeneratorConfig g;
  g.n_va = 400;
  g.n_au = 250;
  g.n_expr = 100;
  g.n_test = 60;
  g.seed = seed;
  return g;
}

NetworkConfig tiny_net(std::uint64_t seed) {
  NetworkConfig n;
  n.hidden_dims = {24};
  n.dropout_rate = 0.1;
  n.seed = seed;
  return n;
}

TrainConfig tiny_train(std::uint64_t seed) {
  TrainConfig t;
  t.learning_rate = 0.05;
  t.epochs = 5;
  t.iterations_per_epoch = 10;
  t.seed = seed;
  return t;
}

}  // namespace

TEST_CASE("learning rate 0 leaves parameters unchanged", "[trainer]") {
  const auto data = generate(tiny_data(1));
  Network net(tiny_net(2));
  const Vector before = net.parameters();
  auto cfg = tiny_train(3);
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  train(net, data, cfg);
  CHECK(net.parameters() == before);
}

TEST_CASE("training is deterministic and lowers the loss", "[trainer]") {
  const auto data = generate(tiny_data(1));
  Network a(tiny_net(2)), b(tiny_net(2));
  const auto ra = train(a, data, tiny_train(3));
  const auto rb = train(b, data, tiny_train(3));
  CHECK(a.parameters() == b.parameters());
  CHECK(ra.loss_csv() == rb.loss_csv());
  REQUIRE(ra.epoch_losses.size() == 5);
  CHECK(ra.epoch_losses.back().total < ra.epoch_losses.front().total);
}

TEST_CASE("perfect predictions score perfectly", "[trainer]") {
  const auto data = generate(tiny_data(4));
  for (const auto* pool : {&data.va.test, &data.au.test, &data.expr.test}) {
    const auto n = static_cast<Eigen::Index>(pool->size());
    Predictions p{Matrix::Zero(n, 7), Matrix::Zero(n, 17), Matrix::Zero(n, 2)};
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& s = (*pool)[static_cast<std::size_t>(r)];
      if (s.emotion != kNoLabel) p.emo_probs(r, s.emotion) = 1.0;
      for (std::size_t k = 0; k < kNumAus; ++k) p.au_probs(r, static_cast<Eigen::Index>(k)) = s.au[k];
      p.va(r, 0) = s.valence;
      p.va(r, 1) = s.arousal;
    }
    const auto m = evaluate_predictions(p, *pool);
    if (m.va) {
      CHECK(m.va->ccc_valence == Approx(1.0).margin(1e-12));
      CHECK(m.va->ccc_arousal == Approx(1.0).margin(1e-12));
    }
    if (m.expr) {
      CHECK(m.expr->stats.total_accuracy == 1.0);
      CHECK(m.expr->stats.uar == 1.0);
    }
    if (m.au) {
      CHECK(m.au->mean_acc == 1.0);
    }
  }
  CHECK_THROWS_AS(evaluate_predictions(Predictions{}, std::span<const Sample>{}), Error);
}

TEST_CASE("single-task baselines only see their own pool", "[trainer]") {
  const auto data = generate(tiny_data(5));
  auto cfg = tiny_train(6);
  cfg.epochs = 1;
  std::set<TaskSet> seen;
  bool mixed = false;
  cfg.observer = [&](std::size_t, std::size_t, const LabeledBatch& b) {
    std::set<TaskSet> in_batch(b.origin.begin(), b.origin.end());
    mixed = mixed || in_batch.size() != 1;
    seen.insert(in_batch.begin(), in_batch.end());
  };
  const auto reports = single_task_baselines(data, tiny_net(7), cfg);
  CHECK_FALSE(mixed);
  CHECK(seen.size() == 3);
  CHECK(reports[0].headline.va.has_value());
  CHECK_FALSE(reports[0].headline.expr.has_value());
  CHECK(reports[2].headline.expr.has_value());
}

TEST_CASE("coupling weights of zero reproduce the uncoupled run", "[trainer]") {
  const auto data = generate(tiny_data(8));
  const auto base = tiny_train(9);
  Network plain(tiny_net(1)), zero(tiny_net(1));
  train(plain, data, variant_config(base, Variant::kNone, 0.0, 0.0));
  train(zero, data, variant_config(base, Variant::kSoftAndDistr, 0.0, 0.0));
  CHECK((plain.parameters() - zero.parameters()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(variant_name(Variant::kSoftAndDistr) == "soft co-annotation + distr-matching");
}

TEST_CASE("ablation runs every variant per seed", "[trainer]") {
  AblationConfig a;
  a.generator = tiny_data(0);
  a.network = tiny_net(0);
  a.train = tiny_train(0);
  a.train.epochs = 1;
  a.seeds = {3, 4};
  a.mu_dm = 0.01;
  a.mu_sca = 0.1;
  const auto r = run_ablation(a);
  CHECK(r.runs.size() == 2 * (5 + 3));
  const auto means = r.mean_headlines();
  REQUIRE(means.size() >= 5);
  CHECK(means[0].first == "none");
  a.jobs = 2;
  CHECK(run_ablation(a).runs_csv() == r.runs_csv());
  CHECK(r.summary_csv().rfind("variant,", 0) == 0);
}

TEST_CASE("compound fine-tuning", "[trainer]") {
  const auto data = generate(tiny_data(10));
  Network base(tiny_net(11));
  train(base, data, tiny_train(12));
  const auto classes = default_compound_classes(cognitive_table());
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.name);
  const auto g = tiny_data(10);
  const auto tr = generate_compound(g, classes, 10, 1);
  const auto te = generate_compound(g, classes, 20, 2);
  FineTuneConfig f;
  f.epochs = 5;
  const auto result = fine_tune_compound(base, tr, te, names, f);
  CHECK(result.network.config().emotion_classes == 11);
  CHECK(result.test_stats.recalls.size() == 11);
  double mean = 0;
  for (const double r : result.test_stats.recalls) mean += r;
  CHECK(result.test_stats.mean_diagonal == Approx(mean / 11));

  f.freeze_trunk = true;
  const auto frozen = fine_tune_compound(base, tr, te, names, f);
  const auto t = static_cast<Eigen::Index>(base.trunk_parameter_count());
  CHECK(frozen.network.parameters().head(t) == base.parameters().head(t));

  const std::vector<std::string> one{"only"};
  CHECK_THROWS_AS(fine_tune_compound(base, tr, te, one, f), Error);
}

TEST_CASE("train config validation", "[trainer]") {
  auto c = tiny_train(0);
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny_train(0);
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}
