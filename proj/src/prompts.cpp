#include "reflect/prompts.hpp"

#include <json.hpp>

#include "reflect/digest.hpp"
#include "reflect/errors.hpp"
#include "reflect/text.hpp"

namespace reflect::prompts {

namespace {

constexpr std::string_view kSimpleGeneration =
    "The following is an interaction between a therapist and a client. Act as the therapist and give a "
    "reflection to the client's response. The reflection must be a statement and not a question. The "
    "reflection must be a rephrasing of the client's response.";

constexpr std::string_view kComplexGeneration =
    "The following is an interaction between you and a user. You are a therapist and the user is someone "
    "having smoking issues. Give a SHORT reflection to the user's response. The reflection must be a "
    "plausible guess or assumption about the user's underlying emotions, values, or chain of thought. The "
    "reflection must be very short. The reflection must be a statement and not a question. Don't always use "
    "\"it seems like\" or \"it sounds like\" or \"you\" at the beginning. Don't always use the phrase "
    "\"important to you\" or \"important for you\".";

constexpr std::string_view kMiAdherence =
    "Decide whether the \"reflection\" sentence in the following smoking-related conversation meets the "
    "standards for Motivational Interviewing. If it does, output \"True\"; otherwise, output \"False\".\n"
    "Additionally, a good reflection must:\n"
    "1. Be a statement, not a question.\n"
    "2. Not be MI-inconsistent in the following ways: giving advice or information without permission, or "
    "confronting the person by disagreeing, arguing, correcting, shaming, blaming, criticizing, labeling, "
    "ridiculing, or questioning the person’s honesty, or directing the person by giving orders, commands, "
    "or imperatives, or otherwise challenging the person’s autonomy.\n"
    "3.Not incentivize people to smoke more, or discourage people from quitting smoking.\n"
    "4.Not exaggerate or understate the sentiment of the sentence to be reflected.\n"
    "5. Not be factually wrong about smoking.\n"
    "6. Be grammatically correct.";

constexpr std::string_view kReflectionTypeCls =
    "Decide whether the \"reflection\" sentence in the following smoking-related conversation is a SIMPLE or "
    "COMPLEX reflection. If it is simple, output \"simple\"; otherwise, output \"complex\".\n"
    "A simple reflection must be a rephrasing of the client’s response. In contrast, a complex reflection "
    "must not be just a rephrasing of the client’s response, but instead a plausible guess or assumption "
    "about the user’s underlying emotions, values, or chain of thought.";

std::string single_line(std::string_view s) { return text::collapse_whitespace(text::normalize_newlines(s)); }

}  // namespace

std::string_view builtin_prompt(PromptKind kind) {
    switch (kind) {
        case PromptKind::SimpleGeneration: return kSimpleGeneration;
        case PromptKind::ComplexGeneration: return kComplexGeneration;
        case PromptKind::MiAdherence: return kMiAdherence;
        case PromptKind::ReflectionTypeCls: return kReflectionTypeCls;
    }
    throw ContractError("unknown prompt kind");
}

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::SimpleGeneration: return "simple_generation";
        case PromptKind::ComplexGeneration: return "complex_generation";
        case PromptKind::MiAdherence: return "mi_adherence";
        case PromptKind::ReflectionTypeCls: return "reflection_type_cls";
    }
    return "?";
}

bool is_generation(PromptKind kind) {
    return kind == PromptKind::SimpleGeneration || kind == PromptKind::ComplexGeneration;
}

PromptKind generation_kind(ReflectionKind k) {
    return k == ReflectionKind::Simple ? PromptKind::SimpleGeneration : PromptKind::ComplexGeneration;
}

std::string prompt_digest(PromptKind kind) { return sha256_hex(builtin_prompt(kind)); }

ChatPrompt render_generation_prompt(PromptKind kind, const corpus::QAPair& pair) {
    if (!is_generation(kind)) {
        throw ContractError(std::string(to_string(kind)) + " is not a generation prompt");
    }
    ChatPrompt p{std::string(builtin_prompt(kind)), single_line(pair.question), single_line(pair.answer)};
    if (p.system_message.empty() || p.user_message.empty()) {
        throw ValidationError("generation prompt for '" + pair.id + "' has an empty question or answer");
    }
    return p;
}

ChatPrompt render_judge_prompt(PromptKind kind, const ReflectionRecord& record) {
    if (is_generation(kind)) throw ContractError(std::string(to_string(kind)) + " is not a judge prompt");
    if (text::trim(record.reflection).empty()) {
        throw ValidationError("judge prompt for '" + record.pair_id + "' has an empty reflection");
    }
    ChatPrompt p;
    p.system_role = std::string(builtin_prompt(kind));
    p.system_message = "Therapist: " + single_line(record.question) + "\nClient: " + single_line(record.answer);
    p.user_message = "reflection: " + single_line(record.reflection);
    return p;
}

std::string render_finetune_record(PromptKind kind, const ReflectionRecord& record) {
    if (!is_generation(kind)) {
        throw ContractError(std::string(to_string(kind)) + " is not a generation prompt");
    }
    if (generation_kind(record.kind) != kind) {
        throw ContractError("record '" + record.pair_id + "' is " + std::string(to_string(record.kind)) +
                            " but was rendered as " + std::string(to_string(kind)));
    }
    const auto reflection = single_line(record.reflection);
    if (reflection.empty()) throw ValidationError("record '" + record.pair_id + "' has an empty reflection");

    std::string out;
    out += "### Instruction:\n";
    out += builtin_prompt(kind);
    out += "\n### Conversation:\n";
    out += "Therapist: " + single_line(record.question) + "\n";
    out += "Client: " + single_line(record.answer) + "\n";
    out += "Therapist: " + reflection + "\n";
    return out;
}

std::string canonical_bytes(const ChatPrompt& prompt) {
    return nlohmann::json::array({prompt.system_role, prompt.system_message, prompt.user_message}).dump();
}

}  // namespace reflect::prompts
