#pragma once

// Emotion <-> action unit relatedness tables.
//
// A table lists, for each basic emotion, the AUs associated with it. Cognitive
// tables (from annotator studies) split entries into prototypical AUs
// (weight 1.0) and observational AUs (weight = fraction of annotators that
// observed the activation). Empirical tables, inferred from co-annotated
// data, carry activation frequencies only and mark every entry observational.
//
// Tables are immutable once constructed and safe to share across threads.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect/types.hpp"

namespace affect {

struct RelatednessEntry {
  AuId au;
  double weight = 1.0;
  bool prototypical = false;

  friend bool operator==(const RelatednessEntry&, const RelatednessEntry&) = default;
};

using EmotionRows = std::array<std::vector<RelatednessEntry>, kNumEmotions>;

class RelatednessTable {
 public:
  /// An empty table: every emotion row has no entries.
  RelatednessTable() = default;

  /// Validates and builds a table. Throws Error(kValidation) naming the
  /// violated invariant.
  explicit RelatednessTable(EmotionRows rows);

  /// Entries of one emotion in insertion order (prototypical first for the
  /// bundled cognitive table).
  const std::vector<RelatednessEntry>& entries(Emotion e) const {
    return rows_[index_of(e)];
  }

  /// Weight of the AU at canonical index `au` for `e`; 0 when absent.
  double weight(Emotion e, std::size_t au) const { return weights_[index_of(e)][au]; }
  bool contains(Emotion e, std::size_t au) const { return weight(e, au) > 0.0; }
  bool is_prototypical(Emotion e, std::size_t au) const;

  /// Dense weight row in canonical AU order (0 = not associated).
  const std::array<double, kNumAus>& weight_row(Emotion e) const {
    return weights_[index_of(e)];
  }

  static const std::array<AuId, kNumAus>& au_ids();

  friend bool operator==(const RelatednessTable& a, const RelatednessTable& b) {
    return a.rows_ == b.rows_;
  }

 private:
  EmotionRows rows_{};
  std::array<std::array<double, kNumAus>, kNumEmotions> weights_{};
};

/// Parses the JSON table format:
///   { "au_ids": [...17 ids...],
///     "emotions": { "<name>": { "prototypical": [au, ...],
///                               "observational": [[au, w], ...] } } }
RelatednessTable parse_table(std::string_view json_text);
RelatednessTable load_table(const std::filesystem::path& path);

/// Serializes with round-trip precision; parse_table(serialize_table(t)) == t.
std::string serialize_table(const RelatednessTable& table);
void save_table(const RelatednessTable& table, const std::filesystem::path& path);

/// Table 1 of the cognitive study of basic emotions and their AUs.
const RelatednessTable& cognitive_table();
/// AU frequencies per expression measured on in-the-wild video annotations.
const RelatednessTable& empirical_table();

/// Directory holding the bundled JSON tables and class lists.
std::filesystem::path bundled_data_dir();

/// p(AU | emotion). Unweighted: 1 when associated, else 0. Weighted: the
/// entry weight. Throws Error(kInvalidArgument) for AUs outside the
/// canonical set.
double au_given_emotion(const RelatednessTable& table, AuId au, Emotion e, bool weighted);

/// One fully co-annotated sample used for empirical relatedness inference.
struct AuObservation {
  Emotion emotion;
  AuVector active{};
};

struct InferredTable {
  RelatednessTable table;
  std::vector<std::string> warnings;
};

inline constexpr double kDefaultInferenceThreshold = 0.1;

/// Estimates per-emotion activation frequencies and keeps every AU whose
/// frequency reaches `threshold`. Emotions without samples are left empty
/// and reported in `warnings`. Neutral is always left empty.
InferredTable infer_table(std::span<const AuObservation> samples,
                          double threshold = kDefaultInferenceThreshold);

struct CompoundClass {
  std::string name;
  Emotion emo1 = Emotion::kHappiness;
  Emotion emo2 = Emotion::kSurprise;
  /// Weight per canonical AU; 0 = not associated with the class.
  std::array<double, kNumAus> au_weights{};
  bool valence_term_applies = false;

  friend bool operator==(const CompoundClass&, const CompoundClass&) = default;
};

/// "happily_surprised" style name for an ordered constituent pair.
std::string compound_name(Emotion emo1, Emotion emo2);

/// True for the positive-valence pairs (happiness with surprise or disgust).
bool default_valence_pair(Emotion a, Emotion b);

/// Union of both constituents' entries, keeping the larger weight on overlap.
CompoundClass compound_union(const RelatednessTable& table, Emotion emo1, Emotion emo2);

/// The 11 compound categories, AU sets from compound_union.
std::vector<CompoundClass> default_compound_classes(const RelatednessTable& table);

/// Class list file:
///   { "classes": [ { "name": "...", "emo1": "...", "emo2": "...",
///                    "valence_term": bool (optional),
///                    "aus": [[au, w], ...] (optional override) } ] }
std::vector<CompoundClass> parse_compound_classes(std::string_view json_text,
                                                  const RelatednessTable& table);
std::vector<CompoundClass> load_compound_classes(const std::filesystem::path& path,
                                                 const RelatednessTable& table);

}  // namespace affect
