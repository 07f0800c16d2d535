#include "judgekit/types.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace judgekit {
namespace {

bool is_strippable(unsigned char c) {
    // whitespace, markdown emphasis and surrounding punctuation
    if (std::isspace(c)) return true;
    switch (c) {
        case '*': case '_': case '`': case '.': case ',': case ':': case ';':
        case '!': case '?': case '"': case '\'': case '(': case ')':
        case '[': case ']': case '<': case '>':
            return true;
        default:
            return false;
    }
}

}  // namespace

const char* to_string(TaskKind task) {
    switch (task) {
        case TaskKind::SingleRating: return "single_rating";
        case TaskKind::PairwiseComparison: return "pairwise_comparison";
        case TaskKind::Classification: return "classification";
    }
    return "unknown";
}

std::optional<TaskKind> task_kind_from_string(std::string_view text) {
    if (text == "single_rating") return TaskKind::SingleRating;
    if (text == "pairwise_comparison") return TaskKind::PairwiseComparison;
    if (text == "classification") return TaskKind::Classification;
    return std::nullopt;
}

const char* to_string(PreferenceChoice choice) {
    switch (choice) {
        case PreferenceChoice::A: return "A";
        case PreferenceChoice::B: return "B";
        case PreferenceChoice::Tie: return "Tie";
    }
    return "?";
}

const char* to_string(ClassLabel label) {
    return label == ClassLabel::Yes ? "Yes" : "No";
}

TaskKind task_of(const Judgement& judgement) {
    if (std::holds_alternative<Score>(judgement)) return TaskKind::SingleRating;
    if (std::holds_alternative<Preference>(judgement)) return TaskKind::PairwiseComparison;
    return TaskKind::Classification;
}

std::string judgement_value_text(const Judgement& judgement) {
    return std::visit(
        [](const auto& j) -> std::string {
            using J = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<J, Score>) return std::to_string(j.value);
            if constexpr (std::is_same_v<J, Preference>) return to_string(j.choice);
            if constexpr (std::is_same_v<J, ClassDecision>) return to_string(j.label);
        },
        judgement);
}

std::string normalize_label(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && is_strippable(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_strippable(static_cast<unsigned char>(text[end - 1]))) --end;
    std::string out(text.substr(begin, end - begin));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<PreferenceChoice> preference_from_label(std::string_view text) {
    const std::string norm = normalize_label(text);
    if (norm == "a") return PreferenceChoice::A;
    if (norm == "b") return PreferenceChoice::B;
    if (norm == "tie") return PreferenceChoice::Tie;
    return std::nullopt;
}

std::optional<ClassLabel> class_label_from_text(std::string_view text) {
    const std::string norm = normalize_label(text);
    if (norm == "yes") return ClassLabel::Yes;
    if (norm == "no") return ClassLabel::No;
    return std::nullopt;
}

bool judgement_matches(const Judgement& predicted, const Judgement& truth) {
    if (predicted.index() != truth.index()) {
        throw std::invalid_argument("judgement_matches: variant mismatch between predicted and truth");
    }
    return predicted == truth;
}

const char* to_string(PairKind kind) {
    switch (kind) {
        case PairKind::CoT: return "cot";
        case PairKind::Std: return "std";
        case PairKind::Ded: return "ded";
        case PairKind::DownstreamScore: return "downstream_score";
        case PairKind::DownstreamRefine: return "downstream_refine";
    }
    return "unknown";
}

std::optional<PairKind> pair_kind_from_string(std::string_view text) {
    if (text == "cot") return PairKind::CoT;
    if (text == "std") return PairKind::Std;
    if (text == "ded") return PairKind::Ded;
    if (text == "downstream_score") return PairKind::DownstreamScore;
    if (text == "downstream_refine") return PairKind::DownstreamRefine;
    return std::nullopt;
}

std::vector<RecordViolation> validate_record(const EvaluationRecord& record,
                                             const TemplateDirectory* directory) {
    std::vector<RecordViolation> violations;
    auto add = [&](ErrorCode code, std::string detail) {
        violations.push_back(RecordViolation{code, std::move(detail)});
    };

    if (record.id.empty()) add(ErrorCode::EmptyField, "id");

    const size_t expected_arity =
        record.protocol.task == TaskKind::PairwiseComparison ? 2u : 1u;
    if (record.responses.size() != expected_arity) {
        add(ErrorCode::ResponseArityMismatch,
            "task " + std::string(to_string(record.protocol.task)) + " expects " +
                std::to_string(expected_arity) + " response(s), got " +
                std::to_string(record.responses.size()));
    }

    if (task_of(record.ground_truth) != record.protocol.task) {
        add(ErrorCode::VariantMismatch,
            "ground_truth variant does not match task " +
                std::string(to_string(record.protocol.task)));
    } else if (const auto* score = std::get_if<Score>(&record.ground_truth)) {
        if (score->value < 1 || score->value > 5) {
            add(ErrorCode::ScoreOutOfRange, "ground_truth score " + std::to_string(score->value));
        }
    } else if (const auto* pref = std::get_if<Preference>(&record.ground_truth)) {
        if (pref->choice == PreferenceChoice::Tie && !record.protocol.allows_tie) {
            add(ErrorCode::TieNotAllowed, "ground_truth Tie but protocol forbids ties");
        }
    }

    if (directory != nullptr) {
        const auto info = directory->lookup(record.protocol.template_id);
        if (!info) {
            add(ErrorCode::UnknownTemplate, record.protocol.template_id);
        } else {
            if (info->task != record.protocol.task) {
                add(ErrorCode::VariantMismatch,
                    "template " + record.protocol.template_id + " is a " +
                        std::string(to_string(info->task)) + " template");
            }
            for (const auto& [key, _] : record.protocol.extra_fields) {
                if (std::find(info->placeholders.begin(), info->placeholders.end(), key) ==
                    info->placeholders.end()) {
                    add(ErrorCode::UnknownField, key);
                }
            }
            if (record.responses.size() == expected_arity &&
                info->task == record.protocol.task) {
                auto bound = bind_record_fields(record, info->placeholders);
                if (!bound.ok()) add(bound.error().code, bound.error().message);
            }
        }
    }

    return violations;
}

Result<EvaluationRecord> validated(EvaluationRecord record, const TemplateDirectory* directory) {
    auto violations = validate_record(record, directory);
    if (!violations.empty()) {
        std::string detail = violations.front().detail;
        if (violations.size() > 1) {
            detail += " (+" + std::to_string(violations.size() - 1) + " more violation(s))";
        }
        return make_error(violations.front().code, detail);
    }
    return record;
}

Result<std::map<std::string, std::string>> bind_record_fields(
    const EvaluationRecord& record,
    const std::vector<std::string>& placeholders,
    bool swap_responses) {
    if (swap_responses && record.protocol.task != TaskKind::PairwiseComparison) {
        throw std::invalid_argument("bind_record_fields: swap_responses requires a pairwise record");
    }

    std::map<std::string, std::string> fields;
    for (const auto& name : placeholders) {
        if (name == "input" || name == "instruction") {
            fields[name] = record.instruction;
        } else if (name == "response" || name == "claim") {
            if (record.responses.empty()) {
                return make_error(ErrorCode::ResponseArityMismatch, "no response for {" + name + "}");
            }
            fields[name] = record.responses[0];
        } else if (name == "output_1" || name == "output_2") {
            if (record.responses.size() < 2) {
                return make_error(ErrorCode::ResponseArityMismatch,
                                  "two responses required for {" + name + "}");
            }
            const bool first = (name == "output_1") != swap_responses;
            fields[name] = first ? record.responses[0] : record.responses[1];
        } else {
            auto it = record.protocol.extra_fields.find(name);
            if (it == record.protocol.extra_fields.end()) {
                return make_error(ErrorCode::MissingField, name);
            }
            fields[name] = it->second;
        }
    }
    return fields;
}

}  // namespace judgekit
