#include "affect/relatedness.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace affect {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) {
  throw Error(ErrorKind::kValidation, msg);
}

std::string au_label(AuId au) { return "AU" + std::to_string(au.value); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

AuId parse_au(const json& j, const std::string& context) {
  if (!j.is_number_integer()) {
    throw Error(ErrorKind::kParse, context + ": AU id must be an integer");
  }
  return AuId{j.get<int>()};
}

// Rejects duplicate emotion keys, which nlohmann would silently collapse.
json parse_with_duplicate_check(std::string_view text) {
  std::string top_key;
  std::set<std::string> emotion_keys;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
    if (event != json::parse_event_t::key) return true;
    const auto key = parsed.get<std::string>();
    if (depth == 1) {
      top_key = key;
    } else if (depth == 2 && top_key == "emotions") {
      if (!emotion_keys.insert(key).second) invalid("duplicate emotion '" + key + "'");
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("relatedness table: ") + e.what());
  }
}

}  // namespace

RelatednessTable::RelatednessTable(EmotionRows rows) : rows_(std::move(rows)) {
  if (!rows_[index_of(Emotion::kNeutral)].empty()) {
    invalid("emotion 'neutral' must have an empty entry set");
  }
  for (const Emotion e : kAllEmotions) {
    for (const auto& entry : rows_[index_of(e)]) {
      const auto idx = au_index(entry.au);
      if (!idx) {
        invalid("unknown AU id " + std::to_string(entry.au.value) + " in row '" +
                std::string(emotion_name(e)) + "'");
      }
      if (!(entry.weight > 0.0 && entry.weight <= 1.0)) {
        invalid("weight out of range for " + au_label(entry.au) + " in row '" +
                std::string(emotion_name(e)) + "': " + std::to_string(entry.weight));
      }
      if (entry.prototypical && entry.weight != 1.0) {
        invalid("prototypical " + au_label(entry.au) + " in row '" +
                std::string(emotion_name(e)) + "' must have weight 1.0");
      }
      auto& slot = weights_[index_of(e)][*idx];
      if (slot > 0.0) {
        invalid("duplicate " + au_label(entry.au) + " in row '" +
                std::string(emotion_name(e)) + "'");
      }
      slot = entry.weight;
    }
  }
}

bool RelatednessTable::is_prototypical(Emotion e, std::size_t au) const {
  const AuId id = au_at(au);
  const auto& row = rows_[index_of(e)];
  return std::any_of(row.begin(), row.end(), [&](const RelatednessEntry& entry) {
    return entry.au == id && entry.prototypical;
  });
}

const std::array<AuId, kNumAus>& RelatednessTable::au_ids() {
  static const std::array<AuId, kNumAus> ids = [] {
    std::array<AuId, kNumAus> out{};
    for (std::size_t i = 0; i < kNumAus; ++i) out[i] = AuId{kCanonicalAuIds[i]};
    return out;
  }();
  return ids;
}

RelatednessTable parse_table(std::string_view json_text) {
  const json doc = parse_with_duplicate_check(json_text);
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "relatedness table: expected an object");

  if (!doc.contains("au_ids") || !doc["au_ids"].is_array()) {
    throw Error(ErrorKind::kParse, "relatedness table: missing 'au_ids' array");
  }
  std::set<int> ids;
  for (const auto& j : doc["au_ids"]) {
    const AuId au = parse_au(j, "au_ids");
    if (!au_index(au)) invalid("unknown AU id " + std::to_string(au.value) + " in au_ids");
    if (!ids.insert(au.value).second) invalid("duplicate AU id " + std::to_string(au.value));
  }
  if (ids.size() != kNumAus) {
    invalid("au_ids must list exactly 17 distinct AUs, got " + std::to_string(ids.size()));
  }

  if (!doc.contains("emotions") || !doc["emotions"].is_object()) {
    throw Error(ErrorKind::kParse, "relatedness table: missing 'emotions' object");
  }
  EmotionRows rows{};
  std::array<bool, kNumEmotions> seen{};
  for (const auto& [name, row] : doc["emotions"].items()) {
    const auto emotion = parse_emotion(name);
    if (!emotion) invalid("unknown emotion '" + name + "'");
    if (seen[index_of(*emotion)]) invalid("duplicate emotion '" + name + "'");
    seen[index_of(*emotion)] = true;
    if (!row.is_object()) throw Error(ErrorKind::kParse, "row '" + name + "' must be an object");

    auto& entries = rows[index_of(*emotion)];
    if (row.contains("prototypical")) {
      for (const auto& j : row["prototypical"]) {
        entries.push_back({parse_au(j, name), 1.0, true});
      }
    }
    if (row.contains("observational")) {
      for (const auto& pair : row["observational"]) {
        if (!pair.is_array() || pair.size() != 2 || !pair[1].is_number()) {
          throw Error(ErrorKind::kParse, "row '" + name + "': observational entries are [au, w]");
        }
        const AuId au = parse_au(pair[0], name);
        if (!ids.contains(au.value)) {
          invalid("unknown AU id " + std::to_string(au.value) + " in row '" + name + "'");
        }
        entries.push_back({au, pair[1].get<double>(), false});
      }
    }
  }
  return RelatednessTable(std::move(rows));
}

RelatednessTable load_table(const std::filesystem::path& path) {
  return parse_table(read_file(path));
}

std::string serialize_table(const RelatednessTable& table) {
  json doc;
  doc["au_ids"] = kCanonicalAuIds;
  json emotions = json::object();
  for (const Emotion e : kAllEmotions) {
    json proto = json::array();
    json obs = json::array();
    for (const auto& entry : table.entries(e)) {
      if (entry.prototypical) {
        proto.push_back(entry.au.value);
      } else {
        obs.push_back(json::array({entry.au.value, entry.weight}));
      }
    }
    emotions[std::string(emotion_name(e))] = {{"prototypical", proto}, {"observational", obs}};
  }
  doc["emotions"] = emotions;
  return doc.dump(2) + "\n";
}

void save_table(const RelatednessTable& table, const std::filesystem::path& path) {
  write_file(path, serialize_table(table));
}

const RelatednessTable& cognitive_table() {
  static const RelatednessTable table = [] {
    auto proto = [](int au) { return RelatednessEntry{AuId{au}, 1.0, true}; };
    auto obs = [](int au, double w) { return RelatednessEntry{AuId{au}, w, false}; };
    EmotionRows rows{};
    rows[index_of(Emotion::kHappiness)] = {proto(12), proto(25), obs(6, 0.51)};
    rows[index_of(Emotion::kSadness)] = {proto(4),      proto(15),     obs(1, 0.6),
                                         obs(6, 0.5),   obs(11, 0.26), obs(17, 0.67)};
    rows[index_of(Emotion::kFear)] = {proto(1),    proto(4),    proto(20),    proto(25),
                                      obs(2, 0.57), obs(5, 0.63), obs(26, 0.33)};
    rows[index_of(Emotion::kAnger)] = {proto(4),      proto(7),      proto(24),
                                       obs(10, 0.26), obs(17, 0.52), obs(23, 0.29)};
    rows[index_of(Emotion::kSurprise)] = {proto(1), proto(2), proto(25), proto(26),
                                          obs(5, 0.66)};
    rows[index_of(Emotion::kDisgust)] = {proto(9), proto(10), proto(17), obs(4, 0.31),
                                         obs(24, 0.26)};
    return RelatednessTable(std::move(rows));
  }();
  return table;
}

const RelatednessTable& empirical_table() {
  static const RelatednessTable table = [] {
    auto w = [](int au, double weight) { return RelatednessEntry{AuId{au}, weight, false}; };
    EmotionRows rows{};
    rows[index_of(Emotion::kHappiness)] = {w(12, 0.82), w(25, 0.7), w(6, 0.57), w(7, 0.83),
                                           w(10, 0.63)};
    rows[index_of(Emotion::kSadness)] = {w(4, 0.53), w(15, 0.42), w(1, 0.31), w(7, 0.13),
                                         w(17, 0.1)};
    rows[index_of(Emotion::kFear)] = {w(1, 0.52), w(4, 0.4),  w(25, 0.85),
                                      w(5, 0.38), w(7, 0.57), w(10, 0.57)};
    rows[index_of(Emotion::kAnger)] = {w(4, 0.65), w(7, 0.45), w(25, 0.4), w(10, 0.33),
                                       w(9, 0.15)};
    rows[index_of(Emotion::kSurprise)] = {w(1, 0.38), w(2, 0.37), w(25, 0.85),
                                          w(26, 0.3), w(5, 0.5),  w(7, 0.2)};
    rows[index_of(Emotion::kDisgust)] = {w(9, 0.21), w(10, 0.85), w(17, 0.23),
                                         w(4, 0.6),  w(7, 0.75),  w(25, 0.8)};
    return RelatednessTable(std::move(rows));
  }();
  return table;
}

std::filesystem::path bundled_data_dir() {
  if (const char* env = std::getenv("AFFECT_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return AFFECT_DATA_DIR;
}

double au_given_emotion(const RelatednessTable& table, AuId au, Emotion e, bool weighted) {
  const auto idx = au_index(au);
  if (!idx) {
    throw Error(ErrorKind::kInvalidArgument, "unknown AU id " + std::to_string(au.value));
  }
  const double w = table.weight(e, *idx);
  if (w <= 0.0) return 0.0;
  return weighted ? w : 1.0;
}

InferredTable infer_table(std::span<const AuObservation> samples, double threshold) {
  if (samples.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "infer_table: empty sample set");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "infer_table: threshold must lie in [0, 1]");
  }
  std::array<std::size_t, kNumEmotions> totals{};
  std::array<std::array<std::size_t, kNumAus>, kNumEmotions> active{};
  for (const auto& s : samples) {
    const auto e = index_of(s.emotion);
    ++totals[e];
    for (std::size_t k = 0; k < kNumAus; ++k) active[e][k] += s.active[k] != 0 ? 1 : 0;
  }

  InferredTable out;
  EmotionRows rows{};
  for (const Emotion e : kAllEmotions) {
    const auto ei = index_of(e);
    if (e == Emotion::kNeutral) {
      if (totals[ei] > 0) {
        out.warnings.push_back("neutral: " + std::to_string(totals[ei]) +
                               " samples ignored; neutral carries no AU entries");
      }
      continue;
    }
    if (totals[ei] == 0) {
      out.warnings.push_back(std::string(emotion_name(e)) + ": no samples, row left empty");
      continue;
    }
    for (std::size_t k = 0; k < kNumAus; ++k) {
      const double f = static_cast<double>(active[ei][k]) / static_cast<double>(totals[ei]);
      if (f > 0.0 && f >= threshold) rows[ei].push_back({au_at(k), f, false});
    }
  }
  out.table = RelatednessTable(std::move(rows));
  return out;
}

std::string compound_name(Emotion emo1, Emotion emo2) {
  auto adverb = [](Emotion e) -> std::string {
    switch (e) {
      case Emotion::kHappiness: return "happily";
      case Emotion::kSadness: return "sadly";
      case Emotion::kFear: return "fearfully";
      case Emotion::kAnger: return "angrily";
      case Emotion::kSurprise: return "surprisedly";
      case Emotion::kDisgust: return "disgustedly";
      case Emotion::kNeutral: return "neutrally";
    }
    return "";
  };
  auto adjective = [](Emotion e) -> std::string {
    switch (e) {
      case Emotion::kHappiness: return "happy";
      case Emotion::kSadness: return "sad";
      case Emotion::kFear: return "fearful";
      case Emotion::kAnger: return "angry";
      case Emotion::kSurprise: return "surprised";
      case Emotion::kDisgust: return "disgusted";
      case Emotion::kNeutral: return "neutral";
    }
    return "";
  };
  return adverb(emo1) + "_" + adjective(emo2);
}

bool default_valence_pair(Emotion a, Emotion b) {
  auto is = [&](Emotion x, Emotion y) { return (a == x && b == y) || (a == y && b == x); };
  return is(Emotion::kHappiness, Emotion::kSurprise) ||
         is(Emotion::kHappiness, Emotion::kDisgust);
}

CompoundClass compound_union(const RelatednessTable& table, Emotion emo1, Emotion emo2) {
  if (emo1 == emo2) {
    throw Error(ErrorKind::kInvalidArgument,
                "compound class needs two distinct emotions, got '" +
                    std::string(emotion_name(emo1)) + "' twice");
  }
  CompoundClass cls;
  cls.name = compound_name(emo1, emo2);
  cls.emo1 = emo1;
  cls.emo2 = emo2;
  for (std::size_t k = 0; k < kNumAus; ++k) {
    cls.au_weights[k] = std::max(table.weight(emo1, k), table.weight(emo2, k));
  }
  cls.valence_term_applies = default_valence_pair(emo1, emo2);
  return cls;
}

std::vector<CompoundClass> default_compound_classes(const RelatednessTable& table) {
  using E = Emotion;
  constexpr std::array<std::pair<E, E>, 11> pairs{{
      {E::kHappiness, E::kSurprise},
      {E::kHappiness, E::kDisgust},
      {E::kSadness, E::kFear},
      {E::kSadness, E::kAnger},
      {E::kSadness, E::kSurprise},
      {E::kSadness, E::kDisgust},
      {E::kFear, E::kAnger},
      {E::kFear, E::kSurprise},
      {E::kAnger, E::kSurprise},
      {E::kAnger, E::kDisgust},
      {E::kDisgust, E::kSurprise},
  }};
  std::vector<CompoundClass> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.push_back(compound_union(table, a, b));
  return out;
}

std::vector<CompoundClass> parse_compound_classes(std::string_view json_text,
                                                  const RelatednessTable& table) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("compound classes: ") + e.what());
  }
  if (!doc.contains("classes") || !doc["classes"].is_array()) {
    throw Error(ErrorKind::kParse, "compound classes: missing 'classes' array");
  }
  std::vector<CompoundClass> out;
  std::set<std::string> names;
  for (const auto& j : doc["classes"]) {
    const auto e1 = parse_emotion(j.value("emo1", ""));
    const auto e2 = parse_emotion(j.value("emo2", ""));
    if (!e1 || !e2) invalid("compound class with unknown constituent emotion");
    CompoundClass cls = compound_union(table, *e1, *e2);
    if (j.contains("name")) cls.name = j["name"].get<std::string>();
    if (j.contains("valence_term")) cls.valence_term_applies = j["valence_term"].get<bool>();
    if (j.contains("aus")) {
      cls.au_weights.fill(0.0);
      for (const auto& pair : j["aus"]) {
        const AuId au = parse_au(pair.at(0), cls.name);
        const auto idx = au_index(au);
        if (!idx) invalid("unknown AU id " + std::to_string(au.value) + " in " + cls.name);
        const double w = pair.at(1).get<double>();
        if (!(w > 0.0 && w <= 1.0)) invalid("weight out of range in " + cls.name);
        cls.au_weights[*idx] = w;
      }
    }
    if (!names.insert(cls.name).second) invalid("duplicate compound class '" + cls.name + "'");
    out.push_back(std::move(cls));
  }
  if (out.empty()) invalid("compound class list is empty");
  return out;
}

std::vector<CompoundClass> load_compound_classes(const std::filesystem::path& path,
                                                 const RelatednessTable& table) {
  return parse_compound_classes(read_file(path), table);
}

}  // namespace affect
