#pragma once

#include <array>
#include <string>
#include <string_view>

namespace reflect {

enum class Split { Train, Validation, Holdout };
inline constexpr std::array<Split, 3> kAllSplits{Split::Train, Split::Validation, Split::Holdout};

enum class ReflectionKind { Simple, Complex };
inline constexpr std::array<ReflectionKind, 2> kAllKinds{ReflectionKind::Simple, ReflectionKind::Complex};

std::string_view to_string(Split s);
std::string_view to_string(ReflectionKind k);

// Accepts "train", "validation", "holdout" (case-insensitive). Throws ValidationError.
Split parse_split(std::string_view s);
// Accepts "simple", "complex" (case-insensitive). Throws ValidationError.
ReflectionKind parse_kind(std::string_view s);

}  // namespace reflect
