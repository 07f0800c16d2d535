#pragma once

// Scripted backends, record builders and canned judges shared by the suites.

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "judgekit/llm_client.hpp"
#include "judgekit/types.hpp"

namespace judgekit::testing {

/// In-process chat backend driven by a reply function. Thread-safe; records
/// every request it sees.
class ScriptedBackend : public client::CompletionBackend {
public:
    using Script = std::function<std::string(const client::CompletionRequest&)>;

    explicit ScriptedBackend(Script script) : script_(std::move(script)) {}

    Result<client::CompletionResult> complete(const client::CompletionRequest& request) override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
        }
        client::CompletionResult result;
        result.text = script_(request);
        result.finish_reason = "stop";
        return result;
    }

    std::vector<client::CompletionRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

    std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return requests_.size();
    }

private:
    Script script_;
    mutable std::mutex mutex_;
    std::vector<client::CompletionRequest> requests_;
};

inline std::string last_user_content(const client::CompletionRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == "user") return it->content;
    }
    return {};
}

/// Pairwise record whose better response carries the GOODRESP sentinel.
inline EvaluationRecord make_pairwise_record(const std::string& id, bool good_first,
                                             const std::string& template_id = "rewardbench") {
    EvaluationRecord record;
    record.id = id;
    record.protocol.template_id = template_id;
    record.protocol.task = TaskKind::PairwiseComparison;
    record.protocol.allows_tie = template_id == "autoj";
    record.instruction = "Question " + id;
    const std::string good = "GOODRESP answer for " + id;
    const std::string bad = "BADRESP answer for " + id;
    record.responses = good_first ? std::vector<std::string>{good, bad}
                                  : std::vector<std::string>{bad, good};
    record.ground_truth =
        Judgement{Preference{good_first ? PreferenceChoice::A : PreferenceChoice::B}};
    return record;
}

inline EvaluationRecord make_rating_record(const std::string& id, int score) {
    EvaluationRecord record;
    record.id = id;
    record.protocol.template_id = "single_rating";
    record.protocol.task = TaskKind::SingleRating;
    record.instruction = "Instruction " + id;
    record.responses = {"response " + id + " graded_q=" + std::to_string(score)};
    record.protocol.extra_fields["rubric"] = "overall quality from 1 to 5";
    record.protocol.extra_fields["reference_answer"] = "reference for " + id;
    record.ground_truth = Judgement{Score{score}};
    return record;
}

inline EvaluationRecord make_class_record(const std::string& id, bool yes) {
    EvaluationRecord record;
    record.id = id;
    record.protocol.template_id = "llm_aggrefact";
    record.protocol.task = TaskKind::Classification;
    record.instruction = "verify claim " + id;
    record.responses = {std::string(yes ? "SUPPORTED" : "UNSUPPORTED") + " claim for " + id};
    record.protocol.extra_fields["document"] = "document body for " + id;
    record.ground_truth = Judgement{ClassDecision{yes ? ClassLabel::Yes : ClassLabel::No}};
    return record;
}

/// Reply of a judge that always finds the GOODRESP response, wherever it is
/// presented. Order-robust by construction.
inline std::string oracle_pairwise_reply(const std::string& prompt) {
    const auto pos_good = prompt.find("GOODRESP");
    const auto pos_b = prompt.find("Response B:");
    const bool good_is_a = pos_good != std::string::npos && pos_good < pos_b;
    return std::string("**Reasoning:** one response clearly executes the instruction.\n\n") +
           "**Result:** " + (good_is_a ? "A" : "B");
}

inline std::string always_a_reply(const std::string&) {
    return "**Reasoning:** the first response looks best.\n\n**Result:** A";
}

}  // namespace judgekit::testing
