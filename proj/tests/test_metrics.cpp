#include <cmath>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "affect/metrics.hpp"

using namespace affect;
using Catch::Approx;

namespace {

// Straight from the definition, two passes, population moments.
double ccc_oracle(const std::vector<double>& t, const std::vector<double>& p) {
  const double n = static_cast<double>(t.size());
  double mt = 0, mp = 0;
  for (std::size_t i = 0; i < t.size(); ++i) mt += t[i], mp += p[i];
  mt /= n;
  mp /= n;
  double vt = 0, vp = 0, cv = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    vt += (t[i] - mt) * (t[i] - mt);
    vp += (p[i] - mp) * (p[i] - mp);
    cv += (t[i] - mt) * (p[i] - mp);
  }
  vt /= n, vp /= n, cv /= n;
  return 2 * cv / (vt + vp + (mt - mp) * (mt - mp));
}

}  // namespace

TEST_CASE("ccc hand cases", "[metrics]") {
  const std::vector<double> t{1, -1}, p{0.5, -0.5};
  CHECK(ccc(t, p) == Approx(0.8).margin(1e-12));
  CHECK(ccc(t, t) == Approx(1.0).margin(1e-12));
  CHECK(ccc(t, std::vector<double>{0.3, 0.3}) == 0.0);
  CHECK(ccc(std::vector<double>{2, 2}, std::vector<double>{2, 2}) == 1.0);
  CHECK(ccc(std::vector<double>{2, 2}, std::vector<double>{1, 1}) == 0.0);
  CHECK_THROWS_AS(ccc(std::vector<double>{1}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(ccc(t, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(ccc(t, std::vector<double>{NAN, 1}), Error);
}

TEST_CASE("ccc properties on random series", "[metrics]") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    std::vector<double> a(n), b(n);
    const double shift = 3 * z(rng);
    for (int i = 0; i < n; ++i) a[i] = z(rng), b[i] = 0.5 * a[i] + z(rng) + shift;
    const double c = ccc(a, b);
    CHECK(std::abs(c) <= 1.0);
    CHECK(c == Approx(ccc(b, a)).margin(1e-12));
    CHECK(c == Approx(ccc_oracle(a, b)).margin(1e-12));
    auto a2 = a, b2 = b;
    for (int i = 0; i < n; ++i) a2[i] += 7.5, b2[i] += 7.5;
    CHECK(ccc(a2, b2) == Approx(c).margin(1e-9));
  }
}

TEST_CASE("f1 and accuracy by counting", "[metrics]") {
  using V = std::vector<std::uint8_t>;
  CHECK(f1_binary(V{1, 1, 0, 0}, V{1, 0, 1, 0}) == 0.5);
  CHECK(f1_binary(V{1, 0, 1}, V{1, 0, 1}) == 1.0);
  CHECK(f1_binary(V{0, 0, 0}, V{1, 1, 1}) == 0.0);
  CHECK(f1_binary(V{0, 0}, V{0, 0}) == 1.0);
  CHECK(binary_accuracy(V{1, 1, 0, 0}, V{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(f1_binary(V{1}, V{1, 0}), Error);
}

TEST_CASE("confusion statistics", "[metrics]") {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 8);
  cm.add(0, 1, 2);
  cm.add(1, 0, 5);
  cm.add(1, 1, 5);
  const auto s = confusion_stats(cm);
  CHECK(s.total_accuracy == Approx(0.65).margin(1e-12));
  CHECK(s.uar == Approx(0.65).margin(1e-12));
  CHECK(s.mean_diagonal == s.uar);
  CHECK(s.recalls[0] == Approx(0.8));
  CHECK(s.recalls[1] == Approx(0.5));

  ConfusionMatrix swap(2);
  swap.add(0, 1, 10);
  swap.add(1, 0, 10);
  const auto w = confusion_stats(swap);
  CHECK(w.total_accuracy == 0.0);
  CHECK(w.uar == 0.0);

  ConfusionMatrix diag(3);
  diag.add(0, 0, 4);
  diag.add(2, 2, 1);
  const auto d = confusion_stats(diag);
  CHECK(d.total_accuracy == 1.0);
  CHECK(d.mean_diagonal == 1.0);
  CHECK(std::isnan(d.recalls[1]));

  CHECK_THROWS_AS(confusion_stats(ConfusionMatrix(3)), Error);
  CHECK_THROWS_AS(cm.add(2, 0), Error);
}

TEST_CASE("challenge composite scores", "[metrics]") {
  const std::vector<double> f1{0.4, 0.4}, acc{0.9, 0.9};
  const auto s = challenge_scores(f1, acc, 0.5, 0.3);
  CHECK(s.au_score == Approx(0.65));
  CHECK(s.expr_score == Approx(0.4));
  const std::vector<double> ones{1.0, 1.0};
  const auto t = challenge_scores(ones, ones, 1.0, 1.0);
  CHECK(t.au_score == 1.0);
  CHECK(t.expr_score == 1.0);
  CHECK_THROWS_AS(challenge_scores(std::vector<double>{}, std::vector<double>{}, 1, 1), Error);
}

TEST_CASE("metrics csv layout", "[metrics]") {
  const std::vector<MetricRecord> r{{"va", "ccc_valence", "test", 0.1}};
  CHECK(metrics_csv(r) == "task,metric,split,value\nva,ccc_valence,test,0.1\n");
}
