#pragma once

#include <string>

#include <json.hpp>

#include "reflect/types.hpp"

namespace reflect {

// A QA pair plus one generated reflection. The question and answer travel with the
// record so that exported datasets and judge prompts are self-contained.
struct ReflectionRecord {
    std::string pair_id;
    ReflectionKind kind = ReflectionKind::Simple;
    std::string question;
    std::string answer;
    std::string reflection;
    std::string source;  // endpoint name that produced the reflection
    Split split = Split::Holdout;

    bool operator==(const ReflectionRecord&) const = default;
};

nlohmann::json to_json(const ReflectionRecord& r);
ReflectionRecord reflection_record_from_json(const nlohmann::json& j);

}  // namespace reflect
