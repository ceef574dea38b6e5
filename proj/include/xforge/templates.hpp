#pragma once

#include <string>
#include <string_view>

#include "xforge/language.hpp"

// Versioned prompt assets. Any wording change must bump the version string so
// cached responses and candidate metadata stay attributable.
namespace xforge::templates {

inline constexpr std::string_view kInstructionGeneratorVersion = "instr-gen/v1";

inline constexpr std::string_view kInstructionGeneratorSystem =
    "You will be given a text written in {language}. Write the English instruction "
    "for which this text would be a good response. Output only the instruction.";

inline constexpr std::string_view kInstructionGeneratorUser = "{response}";

inline constexpr std::string_view kEvaluatorVersion = "rating/v1";

inline constexpr std::string_view kEvaluatorSystem =
    "Rate how well the response answers the instruction. The response is written in "
    "{language}. Use a three-level scale: 2 means the response fully answers the "
    "instruction, 1 means it is related but flawed (incomplete, repetitive or off in "
    "places), 0 means it does not answer the instruction. Reply with a single digit.";

inline constexpr std::string_view kEvaluatorUser =
    "Instruction:\n{instruction}\n\nResponse:\n{response}";

// Follower system prompts: one slot for seed samples, one for mined samples.
inline constexpr std::string_view kFollowerSeedSystem =
    "Answer in the style of an AI assistant. Write the answer in {language}.";

inline constexpr std::string_view kFollowerMinedSystem =
    "Answer with knowledge from the web. Write the answer in {language}.";

inline constexpr std::string_view kJudgePairVersion = "judge-pair/v1";

inline constexpr std::string_view kJudgePairSystem =
    "You are a helpful and precise assistant for checking the quality of the answer.";

inline constexpr std::string_view kJudgePairUser =
    "[Question]\n{question}\n\n"
    "[The Start of Assistant 1's Answer]\n{answer_1}\n[The End of Assistant 1's Answer]\n\n"
    "[The Start of Assistant 2's Answer]\n{answer_2}\n[The End of Assistant 2's Answer]\n\n"
    "[System]\n"
    "We would like to request your feedback on the performance of two AI assistants in "
    "response to the user question displayed above.\n"
    "Please rate the helpfulness, relevance and accuracy of their responses. Each "
    "assistant receives an overall score on a scale of 0 to 10, where a higher score "
    "indicates better overall performance.\n"
    "Please first output a single line containing only two values indicating the scores "
    "for Assistant 1 and 2, respectively. The two scores are separated by a space. In the "
    "subsequent line, please provide a comprehensive explanation of your evaluation, "
    "avoiding any potential bias and ensuring that the order in which the responses were "
    "presented does not affect your judgment.";

inline constexpr std::string_view kJudgeQualityVersion = "judge-quality/v1";

inline constexpr std::string_view kJudgeQualityUser =
    "[Question]\n{question}\n\n"
    "[The Start of the Answer]\n{answer}\n[The End of the Answer]\n\n"
    "[System]\n"
    "Rate the answer on helpfulness, relevance and accuracy, each on a scale of 0 to 10. "
    "Output a single line of the form helpfulness/relevance/accuracy, e.g. 7/8/6, then "
    "explain your rating on the following lines.";

std::string with_language(std::string_view tmpl, const LanguageCode& lang);

}  // namespace xforge::templates
