#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "judgekit/types.hpp"

namespace judgekit::jsonl {

/// EvaluationRecord wire format, one JSON object per line:
///   {"id", "task", "template_id", "instruction", "responses",
///    "ground_truth", "category", "extra_fields"}
/// ground_truth is a tagged object: {"type":"score","value":4},
/// {"type":"preference","choice":"A"} or {"type":"class","label":"Yes"}.
/// allows_tie is not on the wire; it derives from the template registry,
/// which is why parsing takes an optional TemplateDirectory.
std::string record_to_json_line(const EvaluationRecord& record);
Result<EvaluationRecord> record_from_json_line(const std::string& line,
                                               const TemplateDirectory* directory = nullptr);

/// Preference pair wire format:
///   {"kind", "prompt", "chosen", "rejected", "source_record_id"}
std::string pair_to_json_line(const PreferencePair& pair);
Result<PreferencePair> pair_from_json_line(const std::string& line);

Result<std::vector<EvaluationRecord>> load_records(const std::filesystem::path& path,
                                                   const TemplateDirectory* directory = nullptr);
Status save_records(const std::filesystem::path& path,
                    const std::vector<EvaluationRecord>& records);

Result<std::vector<PreferencePair>> load_pairs(const std::filesystem::path& path);
Status save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);

/// Shared line-level helpers.
Result<std::vector<std::string>> read_lines(const std::filesystem::path& path);
Status write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace judgekit::jsonl
