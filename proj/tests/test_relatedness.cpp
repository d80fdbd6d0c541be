#include <algorithm>
#include <random>

#include <catch_amalgamated.hpp>

#include "affect/relatedness.hpp"
#include "affect/synthdata.hpp"

using namespace affect;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<std::pair<int, double>> row_of(const RelatednessTable& t, Emotion e) {
  std::vector<std::pair<int, double>> out;
  for (const auto& entry : t.entries(e)) out.emplace_back(entry.au.value, entry.weight);
  std::sort(out.begin(), out.end());
  return out;
}

std::string table_json(const std::string& happiness_body) {
  return R"({"au_ids":[1,2,4,5,6,7,9,10,11,12,15,17,20,23,24,25,26],"emotions":{"happiness":)" +
         happiness_body + "}}";
}

}  // namespace

TEST_CASE("bundled cognitive table matches the annotator study rows", "[relatedness]") {
  const auto t = load_table(bundled_data_dir() / "cognitive_table.json");
  REQUIRE(t == cognitive_table());
  using P = std::vector<std::pair<int, double>>;
  CHECK(row_of(t, Emotion::kNeutral).empty());
  CHECK(row_of(t, Emotion::kHappiness) == P{{6, 0.51}, {12, 1.0}, {25, 1.0}});
  CHECK(row_of(t, Emotion::kSadness) ==
        P{{1, 0.6}, {4, 1.0}, {6, 0.5}, {11, 0.26}, {15, 1.0}, {17, 0.67}});
  CHECK(row_of(t, Emotion::kFear) ==
        P{{1, 1.0}, {2, 0.57}, {4, 1.0}, {5, 0.63}, {20, 1.0}, {25, 1.0}, {26, 0.33}});
  CHECK(row_of(t, Emotion::kAnger) ==
        P{{4, 1.0}, {7, 1.0}, {10, 0.26}, {17, 0.52}, {23, 0.29}, {24, 1.0}});
  CHECK(row_of(t, Emotion::kSurprise) == P{{1, 1.0}, {2, 1.0}, {5, 0.66}, {25, 1.0}, {26, 1.0}});
  CHECK(row_of(t, Emotion::kDisgust) == P{{4, 0.31}, {9, 1.0}, {10, 1.0}, {17, 1.0}, {24, 0.26}});

  const auto twelve = *au_index(AuId{12});
  CHECK(t.is_prototypical(Emotion::kHappiness, twelve));
  CHECK_FALSE(t.is_prototypical(Emotion::kHappiness, *au_index(AuId{6})));
}

TEST_CASE("bundled empirical table carries frequencies only", "[relatedness]") {
  const auto t = load_table(bundled_data_dir() / "empirical_table.json");
  REQUIRE(t == empirical_table());
  CHECK(t.weight(Emotion::kHappiness, *au_index(AuId{12})) == 0.82);
  CHECK(t.weight(Emotion::kDisgust, *au_index(AuId{25})) == 0.8);
  for (const auto e : kAllEmotions) {
    for (const auto& entry : t.entries(e)) CHECK_FALSE(entry.prototypical);
  }
}

TEST_CASE("table validation names the violated invariant", "[relatedness]") {
  CHECK_THROWS_WITH(parse_table(table_json(R"({"prototypical":[12],"observational":[[6,1.3]]})")),
                    ContainsSubstring("weight out of range"));
  CHECK_THROWS_WITH(parse_table(table_json(R"({"prototypical":[3],"observational":[]})")),
                    ContainsSubstring("unknown AU"));
  CHECK_THROWS_AS(parse_table(table_json(R"({"prototypical":[12, 12]})")), Error);
  const std::string dup =
      R"({"au_ids":[1,2,4,5,6,7,9,10,11,12,15,17,20,23,24,25,26],"emotions":{)"
      R"("happiness":{"prototypical":[12]},"happiness":{"prototypical":[25]}}})";
  CHECK_THROWS_WITH(parse_table(dup), ContainsSubstring("duplicate emotion"));
  const std::string neutral =
      R"({"au_ids":[1,2,4,5,6,7,9,10,11,12,15,17,20,23,24,25,26],"emotions":{)"
      R"("neutral":{"prototypical":[12]}}})";
  CHECK_THROWS_AS(parse_table(neutral), Error);
  CHECK_THROWS_AS(parse_table("{not json"), Error);
  const std::string short_ids = R"({"au_ids":[1,2,4],"emotions":{}})";
  CHECK_THROWS_AS(parse_table(short_ids), Error);
}

TEST_CASE("tables round-trip through JSON", "[relatedness]") {
  CHECK(parse_table(serialize_table(cognitive_table())) == cognitive_table());
  CHECK(parse_table(serialize_table(empirical_table())) == empirical_table());

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> w(1e-6, 1.0);
  EmotionRows rows{};
  for (std::size_t e = 1; e < kNumEmotions; ++e) {
    for (std::size_t k = 0; k < kNumAus; k += e) {
      rows[e].push_back({au_at(k), w(rng), false});
    }
  }
  const RelatednessTable t(rows);
  CHECK(parse_table(serialize_table(t)) == t);
}

TEST_CASE("au_given_emotion lookups", "[relatedness]") {
  const auto& t = cognitive_table();
  CHECK(au_given_emotion(t, AuId{2}, Emotion::kSurprise, false) == 1.0);
  CHECK(au_given_emotion(t, AuId{2}, Emotion::kFear, false) == 1.0);
  CHECK(au_given_emotion(t, AuId{2}, Emotion::kFear, true) == 0.57);
  CHECK(au_given_emotion(t, AuId{6}, Emotion::kHappiness, true) == 0.51);
  CHECK(au_given_emotion(t, AuId{12}, Emotion::kSadness, true) == 0.0);
  CHECK(au_given_emotion(t, AuId{12}, Emotion::kSadness, false) == 0.0);
  CHECK(au_given_emotion(t, AuId{12}, Emotion::kHappiness, true) == 1.0);
  CHECK_THROWS_AS(au_given_emotion(t, AuId{3}, Emotion::kHappiness, true), Error);
  CHECK(au_given_emotion(empirical_table(), AuId{12}, Emotion::kHappiness, false) == 1.0);
}

TEST_CASE("infer_table frequency and threshold rules", "[relatedness]") {
  std::vector<AuObservation> obs;
  const auto au12 = *au_index(AuId{12});
  const auto au4 = *au_index(AuId{4});
  for (int i = 0; i < 100; ++i) {
    AuObservation o{Emotion::kHappiness, {}};
    o.active[au12] = i < 82 ? 1 : 0;
    o.active[au4] = i < 5 ? 1 : 0;
    obs.push_back(o);
  }
  const auto inferred = infer_table(obs, 0.1);
  CHECK(inferred.table.weight(Emotion::kHappiness, au12) == 0.82);
  CHECK_FALSE(inferred.table.contains(Emotion::kHappiness, au4));
  CHECK_FALSE(inferred.table.is_prototypical(Emotion::kHappiness, au12));
  // Five basic emotions have no samples.
  CHECK(inferred.warnings.size() == 5);

  auto shuffled = obs;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  CHECK(infer_table(shuffled, 0.1).table == inferred.table);

  CHECK_THROWS_AS(infer_table(std::vector<AuObservation>{}, 0.1), Error);

  std::vector<AuObservation> with_neutral = obs;
  with_neutral.push_back({Emotion::kNeutral, {}});
  with_neutral.back().active[au12] = 1;
  CHECK(infer_table(with_neutral, 0.1).table.entries(Emotion::kNeutral).empty());
}

TEST_CASE("infer_table recovers generating weights", "[relatedness]") {
  GeneratorConfig g;
  g.n_va = g.n_au = g.n_expr = 1;
  g.n_test = 0;
  g.n_full = 7 * 3000;
  g.au_background_rate = 0.0;
  g.seed = 11;
  const auto inferred = infer_table(au_observations(generate(g).full), 0.1);
  for (const auto e : kAllEmotions) {
    for (std::size_t k = 0; k < kNumAus; ++k) {
      const double truth = cognitive_table().weight(e, k);
      CHECK(inferred.table.contains(e, k) == (truth >= 0.1));
      CHECK(std::abs(inferred.table.weight(e, k) - truth) < 0.05);
    }
  }
}

TEST_CASE("compound_union keeps the larger weight and flags happy pairs", "[relatedness]") {
  const auto& t = cognitive_table();
  const auto hs = compound_union(t, Emotion::kHappiness, Emotion::kSurprise);
  CHECK(hs.name == "happily_surprised");
  CHECK(hs.valence_term_applies);
  for (const int id : {12, 25, 6, 1, 2, 26, 5}) CHECK(hs.au_weights[*au_index(AuId{id})] > 0.0);
  CHECK(hs.au_weights[*au_index(AuId{25})] == 1.0);
  CHECK(hs.au_weights[*au_index(AuId{4})] == 0.0);

  CHECK_FALSE(compound_union(t, Emotion::kSadness, Emotion::kFear).valence_term_applies);
  CHECK(compound_union(t, Emotion::kHappiness, Emotion::kDisgust).valence_term_applies);
  CHECK_THROWS_AS(compound_union(t, Emotion::kHappiness, Emotion::kHappiness), Error);

  const auto sf = compound_union(t, Emotion::kSadness, Emotion::kFear);
  CHECK(sf.au_weights[*au_index(AuId{1})] == 1.0);  // fear prototypical beats sadness 0.6

  for (const auto a : kAllEmotions) {
    for (const auto b : kAllEmotions) {
      if (a == b) continue;
      CHECK(compound_union(t, a, b).au_weights == compound_union(t, b, a).au_weights);
    }
  }
}

TEST_CASE("default compound class list", "[relatedness]") {
  const auto classes = default_compound_classes(cognitive_table());
  REQUIRE(classes.size() == 11);
  const auto from_file =
      load_compound_classes(bundled_data_dir() / "compound_classes.json", cognitive_table());
  CHECK(from_file == classes);
  int flagged = 0;
  for (const auto& c : classes) flagged += c.valence_term_applies ? 1 : 0;
  CHECK(flagged == 2);
  CHECK(classes[10].name == "disgustedly_surprised");
}

TEST_CASE("compound class files may override AU sets", "[relatedness]") {
  const auto classes = parse_compound_classes(
      R"({"classes":[{"name":"awed","emo1":"fear","emo2":"surprise","aus":[[1,1.0],[2,0.5]]}]})",
      cognitive_table());
  REQUIRE(classes.size() == 1);
  CHECK(classes[0].name == "awed");
  CHECK(classes[0].au_weights[*au_index(AuId{2})] == 0.5);
  CHECK(classes[0].au_weights[*au_index(AuId{4})] == 0.0);
  CHECK_THROWS_AS(parse_compound_classes(R"({"classes":[]})", cognitive_table()), Error);
  CHECK_THROWS_AS(
      parse_compound_classes(R"({"classes":[{"emo1":"fear","emo2":"fear"}]})", cognitive_table()),
      Error);
}
