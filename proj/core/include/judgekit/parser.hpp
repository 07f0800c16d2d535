#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "judgekit/result.hpp"
#include "judgekit/types.hpp"

namespace judgekit::parser {

/// Extracts the final judgement (and the critique when the protocol asked
/// for CoT output) from a raw judge reply. Markers match case-insensitively
/// with optional bold asterisks; when a marker appears several times the
/// last occurrence wins. A Tie reply under a protocol that forbids ties is
/// AmbiguousResult, never a silent remap.
Result<JudgeOutput> parse_judge_output(std::string_view text,
                                       TaskKind task,
                                       bool allows_tie,
                                       bool expects_cot);

/// Extracts the deduced response bodies from a response-deduction reply:
/// one "**Response:**" block for single-rating/classification, the
/// "**Response A:**" / "**Response B:**" blocks for pairwise.
Result<std::vector<std::string>> parse_deduction(std::string_view text, TaskKind task);

/// Body following the last "**Improved Response:**" marker, trimmed.
Result<std::string> parse_refinement(std::string_view text);

/// Canonical reply text: "**Reasoning:** <critique>\n\n**Result:** <value>"
/// or just the result line when no critique is given. Inverse of
/// parse_judge_output for well-formed inputs.
std::string render_reply(const std::optional<std::string>& critique, const Judgement& judgement);

/// Canonical deduction reply for the original response(s); inverse of
/// parse_deduction.
std::string render_deduction_reply(const std::vector<std::string>& responses, TaskKind task);

/// Whitespace trim helper shared by the extractors.
std::string trim(std::string_view text);

}  // namespace judgekit::parser
