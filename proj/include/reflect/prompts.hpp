#pragma once

#include <array>
#include <string>
#include <string_view>

#include "reflect/corpus.hpp"
#include "reflect/reflection_record.hpp"

namespace reflect::prompts {

enum class PromptKind { SimpleGeneration, ComplexGeneration, MiAdherence, ReflectionTypeCls };
inline constexpr std::array<PromptKind, 4> kAllPromptKinds{
    PromptKind::SimpleGeneration, PromptKind::ComplexGeneration, PromptKind::MiAdherence,
    PromptKind::ReflectionTypeCls};

// The three chat-complete segments: task instruction, question, answer.
struct ChatPrompt {
    std::string system_role;
    std::string system_message;
    std::string user_message;

    bool operator==(const ChatPrompt&) const = default;
};

// Identifies how judge prompts lay out the conversation; recorded with every run.
inline constexpr std::string_view kJudgeLayout =
    "judge-layout/v1: system_role=judge instruction; system_message=\"Therapist: <question>\\nClient: <answer>\"; "
    "user_message=\"reflection: <reflection>\"";

std::string_view builtin_prompt(PromptKind kind);
std::string_view to_string(PromptKind kind);
bool is_generation(PromptKind kind);

PromptKind generation_kind(ReflectionKind k);

// SHA-256 of the built-in text.
std::string prompt_digest(PromptKind kind);

// Throws ContractError for a judge kind, ValidationError if any segment would be empty.
ChatPrompt render_generation_prompt(PromptKind kind, const corpus::QAPair& pair);

// Throws ContractError for a generation kind.
ChatPrompt render_judge_prompt(PromptKind kind, const ReflectionRecord& record);

// Instruction/conversation training text, `\n` line endings, single trailing newline.
// Throws ValidationError on an empty reflection and ContractError for a judge kind or a
// kind that disagrees with `record.kind`.
std::string render_finetune_record(PromptKind kind, const ReflectionRecord& record);

// The canonical byte string of a prompt, used for cache keys and mock hashing.
std::string canonical_bytes(const ChatPrompt& prompt);

}  // namespace reflect::prompts
