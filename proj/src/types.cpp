#include "mbti/types.hpp"

#include <cctype>

namespace mbti {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<MbtiType> try_parse_type_label(std::string_view s) {
  s = trim(s);
  if (s.size() != kDimensions) return std::nullopt;
  TraitVector t;
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[d])));
    if (c == kPoleLetters[d][0]) {
      t.pole[d] = 0;
    } else if (c == kPoleLetters[d][1]) {
      t.pole[d] = 1;
    } else {
      return std::nullopt;
    }
  }
  return MbtiType::from_traits(t);
}

MbtiType parse_type_label(std::string_view s) {
  auto t = try_parse_type_label(s);
  if (!t) throw InvalidLabel("not a valid MBTI code: '" + std::string(trim(s)) + "'");
  return *t;
}

std::array<MbtiType, kTypeCount> all_types() {
  std::array<MbtiType, kTypeCount> out;
  for (uint8_t i = 0; i < kTypeCount; ++i) out[i] = MbtiType(i);
  return out;
}

}  // namespace mbti
