#include "reflect/reflection_record.hpp"

#include "reflect/errors.hpp"

namespace reflect {

nlohmann::json to_json(const ReflectionRecord& r) {
    return {
        {"pair_id", r.pair_id},
        {"kind", std::string(to_string(r.kind))},
        {"question", r.question},
        {"answer", r.answer},
        {"reflection", r.reflection},
        {"source", r.source},
        {"split", std::string(to_string(r.split))},
    };
}

ReflectionRecord reflection_record_from_json(const nlohmann::json& j) {
    try {
        ReflectionRecord r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.kind = parse_kind(j.at("kind").get<std::string>());
        r.question = j.at("question").get<std::string>();
        r.answer = j.at("answer").get<std::string>();
        r.reflection = j.at("reflection").get<std::string>();
        r.source = j.value("source", std::string{});
        r.split = parse_split(j.value("split", std::string("holdout")));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad reflection record: ") + e.what());
    }
}

}  // namespace reflect
