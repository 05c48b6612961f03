#pragma once
// MBTI type system: four trait dimensions, sixteen types, and the
// conversions between the two views.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mbti {

// Canonical dimension order everywhere: EI, NS, TF, JP.
enum class Dimension : uint8_t { EI = 0, NS = 1, TF = 2, JP = 3 };

inline constexpr std::size_t kDimensions = 4;
inline constexpr std::size_t kTypeCount = 16;

// First pole per dimension is E, N, T, J; second is I, S, F, P.
inline constexpr std::array<std::array<char, 2>, kDimensions> kPoleLetters{{
    {'E', 'I'},
    {'N', 'S'},
    {'T', 'F'},
    {'J', 'P'},
}};

struct InvalidLabel : std::runtime_error {
  explicit InvalidLabel(const std::string& what) : std::runtime_error(what) {}
};

// One pole choice per dimension; pole[i] is 0 for the first pole of
// dimension i, 1 for the second.
struct TraitVector {
  std::array<uint8_t, kDimensions> pole{};

  char letter(std::size_t dim) const { return kPoleLetters[dim][pole[dim]]; }

  bool operator==(const TraitVector&) const = default;
};

// One of the 16 types, stored as a dense index. Bit i of the index is the
// pole of dimension i, so index 0 is ENTJ and index 15 is ISFP.
class MbtiType {
 public:
  MbtiType() = default;
  explicit MbtiType(uint8_t index) : index_(index) {
    if (index >= kTypeCount) throw InvalidLabel("type index out of range");
  }

  static MbtiType from_traits(const TraitVector& traits) {
    uint8_t idx = 0;
    for (std::size_t d = 0; d < kDimensions; ++d) {
      idx = static_cast<uint8_t>(idx | (traits.pole[d] << d));
    }
    return MbtiType(idx);
  }

  TraitVector traits() const {
    TraitVector t;
    for (std::size_t d = 0; d < kDimensions; ++d) {
      t.pole[d] = static_cast<uint8_t>((index_ >> d) & 1u);
    }
    return t;
  }

  std::string code() const {
    const TraitVector t = traits();
    std::string s(kDimensions, ' ');
    for (std::size_t d = 0; d < kDimensions; ++d) s[d] = t.letter(d);
    return s;
  }

  uint8_t index() const { return index_; }

  bool operator==(const MbtiType&) const = default;
  auto operator<=>(const MbtiType&) const = default;

 private:
  uint8_t index_ = 0;
};

inline MbtiType type_from_traits(const TraitVector& traits) {
  return MbtiType::from_traits(traits);
}

inline TraitVector traits_from_type(MbtiType t) { return t.traits(); }

// Case-insensitive parse of a 4-letter code with surrounding whitespace
// trimmed. Throws InvalidLabel for anything outside the 16-code set.
MbtiType parse_type_label(std::string_view s);

// Non-throwing variant for callers that probe.
std::optional<MbtiType> try_parse_type_label(std::string_view s);

// All 16 types in index order.
std::array<MbtiType, kTypeCount> all_types();

}  // namespace mbti
