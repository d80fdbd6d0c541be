#include "affect/types.hpp"

#include <algorithm>
#include <utility>

namespace affect {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames{
    "neutral", "happiness", "sadness", "fear", "anger", "surprise", "disgust"};

constexpr std::array<std::pair<std::string_view, Emotion>, 7> kAliases{{
    {"happy", Emotion::kHappiness},
    {"sad", Emotion::kSadness},
    {"fearful", Emotion::kFear},
    {"angry", Emotion::kAnger},
    {"surprised", Emotion::kSurprise},
    {"disgusted", Emotion::kDisgust},
    {"disguste", Emotion::kDisgust},
}};

}  // namespace

Emotion emotion_at(std::size_t index) {
  if (index >= kNumEmotions) {
    throw Error(ErrorKind::kInvalidArgument,
                "emotion index out of range: " + std::to_string(index));
  }
  return kAllEmotions[index];
}

std::string_view emotion_name(Emotion e) { return kEmotionNames[index_of(e)]; }

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == name) return kAllEmotions[i];
  }
  for (const auto& [alias, e] : kAliases) {
    if (alias == name) return e;
  }
  return std::nullopt;
}

std::optional<std::size_t> au_index(AuId au) {
  const auto it = std::find(kCanonicalAuIds.begin(), kCanonicalAuIds.end(), au.value);
  if (it == kCanonicalAuIds.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kCanonicalAuIds.begin());
}

AuId au_at(std::size_t index) {
  if (index >= kNumAus) {
    throw Error(ErrorKind::kInvalidArgument,
                "AU index out of range: " + std::to_string(index));
  }
  return AuId{kCanonicalAuIds[index]};
}

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kNumeric: return "numeric error";
  }
  return "error";
}

}  // namespace affect
