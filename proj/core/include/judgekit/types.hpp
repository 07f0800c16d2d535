#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "judgekit/result.hpp"

namespace judgekit {

/// The three evaluation task families a judge can be asked to perform.
enum class TaskKind {
    SingleRating,
    PairwiseComparison,
    Classification,
};

const char* to_string(TaskKind task);
std::optional<TaskKind> task_kind_from_string(std::string_view text);

enum class PreferenceChoice { A, B, Tie };
enum class ClassLabel { Yes, No };

const char* to_string(PreferenceChoice choice);
const char* to_string(ClassLabel label);

/// Final judgement, one variant per task kind.
struct Score {
    int value{};  // 1..5
    bool operator==(const Score&) const = default;
};

struct Preference {
    PreferenceChoice choice{};
    bool operator==(const Preference&) const = default;
};

struct ClassDecision {
    ClassLabel label{};
    bool operator==(const ClassDecision&) const = default;
};

using Judgement = std::variant<Score, Preference, ClassDecision>;

/// Task kind the judgement variant belongs to.
TaskKind task_of(const Judgement& judgement);

/// Canonical value text as it appears after a result marker: "4", "A", "Yes".
std::string judgement_value_text(const Judgement& judgement);

/// Lowercases and strips surrounding whitespace, punctuation and markdown
/// emphasis. Judge replies vary in casing and decoration; ground-truth
/// matching and label parsing both look at the normalized form.
std::string normalize_label(std::string_view text);

std::optional<PreferenceChoice> preference_from_label(std::string_view text);
std::optional<ClassLabel> class_label_from_text(std::string_view text);

/// True iff both judgements carry the same value after normalization.
/// Throws std::invalid_argument when the variants differ.
bool judgement_matches(const Judgement& predicted, const Judgement& truth);

/// Which template drives the evaluation and how replies are interpreted.
struct EvaluationProtocol {
    std::string template_id;
    TaskKind task{TaskKind::PairwiseComparison};
    bool allows_tie{false};
    std::map<std::string, std::string> extra_fields;  // rubric, reference answer, question, document

    bool operator==(const EvaluationProtocol&) const = default;
};

/// One benchmark item.
struct EvaluationRecord {
    std::string id;
    EvaluationProtocol protocol;
    std::string instruction;
    std::vector<std::string> responses;  // length 2 iff pairwise, else 1
    Judgement ground_truth;
    std::optional<std::string> category;

    bool operator==(const EvaluationRecord&) const = default;
};

/// Parsed judge reply.
struct JudgeOutput {
    std::optional<std::string> critique;  // present iff the protocol requested CoT
    Judgement judgement;
    std::string raw;

    bool operator==(const JudgeOutput&) const = default;
};

enum class PairKind {
    CoT,
    Std,
    Ded,
    DownstreamScore,
    DownstreamRefine,
};

const char* to_string(PairKind kind);
std::optional<PairKind> pair_kind_from_string(std::string_view text);

/// Trainer-ready preference pair.
struct PreferencePair {
    PairKind kind{PairKind::CoT};
    std::string prompt;
    std::string chosen;
    std::string rejected;
    std::string source_record_id;

    bool operator==(const PreferencePair&) const = default;
};

/// Minimal view of the template registry that record validation needs.
/// Implemented by templates::Registry; kept abstract here so the core
/// types do not depend on the registry module.
class TemplateDirectory {
public:
    struct Info {
        TaskKind task{TaskKind::PairwiseComparison};
        bool emits_cot{false};
        bool allows_tie{false};
        std::vector<std::string> placeholders;
    };

    virtual ~TemplateDirectory() = default;
    virtual std::optional<Info> lookup(const std::string& template_id) const = 0;
};

struct RecordViolation {
    ErrorCode code;
    std::string detail;
};

/// Checks every record invariant. Returns an empty list when the record is
/// valid. When a directory is supplied, template existence and placeholder
/// coverage are checked as well.
std::vector<RecordViolation> validate_record(const EvaluationRecord& record,
                                             const TemplateDirectory* directory = nullptr);

/// validate_record folded into a Result: the record itself or the first violation.
Result<EvaluationRecord> validated(EvaluationRecord record,
                                   const TemplateDirectory* directory = nullptr);

/// Maps record content onto template placeholders: {input}/{instruction} take
/// the record instruction, {response}/{claim}/{output_1}/{output_2} take the
/// responses, everything else resolves through extra_fields. With
/// swap_responses set, output_1/output_2 present the responses in exchanged
/// order (pairwise records only).
Result<std::map<std::string, std::string>> bind_record_fields(
    const EvaluationRecord& record,
    const std::vector<std::string>& placeholders,
    bool swap_responses = false);

}  // namespace judgekit
