#include "reflect/types.hpp"

#include "reflect/errors.hpp"
#include "reflect/text.hpp"

namespace reflect {

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Holdout: return "holdout";
    }
    return "?";
}

std::string_view to_string(ReflectionKind k) { return k == ReflectionKind::Simple ? "simple" : "complex"; }

Split parse_split(std::string_view s) {
    const auto v = text::to_lower(text::trim(s));
    if (v == "train") return Split::Train;
    if (v == "validation") return Split::Validation;
    if (v == "holdout") return Split::Holdout;
    throw ValidationError("unknown split '" + std::string(s) + "'");
}

ReflectionKind parse_kind(std::string_view s) {
    const auto v = text::to_lower(text::trim(s));
    if (v == "simple") return ReflectionKind::Simple;
    if (v == "complex") return ReflectionKind::Complex;
    throw ValidationError("unknown reflection kind '" + std::string(s) + "'");
}

}  // namespace reflect
