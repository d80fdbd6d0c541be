#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace affect {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kNumEmotions = 7;
inline constexpr std::size_t kNumAus = 17;
inline constexpr std::size_t kNumVa = 2;

/// Sentinel for "no categorical label" in per-row label vectors.
inline constexpr int kNoLabel = -1;

// The seven basic expressions, in head-output order.
enum class Emotion : std::uint8_t {
  kNeutral = 0,
  kHappiness,
  kSadness,
  kFear,
  kAnger,
  kSurprise,
  kDisgust,
};

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions{
    Emotion::kNeutral, Emotion::kHappiness, Emotion::kSadness, Emotion::kFear,
    Emotion::kAnger,   Emotion::kSurprise,  Emotion::kDisgust};

constexpr std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }

Emotion emotion_at(std::size_t index);
std::string_view emotion_name(Emotion e);

/// Accepts canonical names plus the adjective forms ("happy", "fearful", ...).
std::optional<Emotion> parse_emotion(std::string_view name);

/// FACS action unit number, e.g. AuId{12} is the lip-corner puller.
struct AuId {
  int value = 0;
  friend constexpr auto operator<=>(AuId, AuId) = default;
};

/// The 17 AUs predicted by the network, in head-output order.
inline constexpr std::array<int, kNumAus> kCanonicalAuIds{
    1, 2, 4, 5, 6, 7, 9, 10, 11, 12, 15, 17, 20, 23, 24, 25, 26};

std::optional<std::size_t> au_index(AuId au);
AuId au_at(std::size_t index);

/// Binary AU activations (or a presence mask) in canonical order.
using AuVector = std::array<std::uint8_t, kNumAus>;

enum class ErrorKind {
  kParse,
  kValidation,
  kInvalidArgument,
  kState,
  kIo,
  kNumeric,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace affect
