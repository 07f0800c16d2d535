#include "judgekit/refine.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "judgekit/jsonl.hpp"
#include "judgekit/parser.hpp"

namespace judgekit::refine {

using nlohmann::json;

namespace {

constexpr const char* kLikertTemplate = "likert_additive";
constexpr const char* kRefinementTemplate = "refinement";

Result<ScoredResponse> parse_likert_reply(const std::string& raw, const std::string& response) {
    auto parsed = parser::parse_judge_output(raw, TaskKind::SingleRating,
                                             /*allows_tie=*/false, /*expects_cot=*/true);
    if (!parsed.ok()) return parsed.error();
    ScoredResponse scored;
    scored.response = response;
    scored.score = std::get<Score>(parsed.value().judgement).value;
    scored.critique = parsed.value().critique.value_or("");
    scored.raw = raw;
    return scored;
}

client::CompletionRequest make_request(const ModelHandle& model, const std::string& prompt,
                                       const client::SamplingConfig& sampling) {
    client::CompletionRequest request;
    request.model = model.model;
    request.messages.push_back({"user", prompt});
    request.sampling = sampling;
    return request;
}

}  // namespace

Result<ScoredResponse> score_likert(const templates::Registry& registry,
                                    const ModelHandle& judge,
                                    const std::string& instruction,
                                    const std::string& response,
                                    const client::SamplingConfig& sampling) {
    if (judge.backend == nullptr) throw std::invalid_argument("score_likert: judge backend not set");
    auto prompt = registry.render(kLikertTemplate,
                                  {{"instruction", instruction}, {"response", response}});
    if (!prompt.ok()) return prompt.error();
    auto reply = judge.backend->complete(make_request(judge, prompt.value(), sampling));
    if (!reply.ok()) return reply.error();
    return parse_likert_reply(reply.value().text, response);
}

Result<std::optional<std::pair<std::size_t, std::size_t>>> select_extreme_pair(
    const std::vector<ScoredResponse>& scored) {
    if (scored.size() < 2) {
        return make_error(ErrorCode::TooFewResponses,
                          "need at least two scored responses, got " + std::to_string(scored.size()));
    }
    std::size_t best = 0;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < scored.size(); ++i) {
        if (scored[i].score > scored[best].score) best = i;  // earliest index wins ties
        if (scored[i].score < scored[worst].score) worst = i;
    }
    if (scored[best].score == scored[worst].score) {
        return std::optional<std::pair<std::size_t, std::size_t>>{};  // no signal
    }
    return std::optional<std::pair<std::size_t, std::size_t>>{{best, worst}};
}

Result<std::string> refine_response(const templates::Registry& registry,
                                    const ModelHandle& refiner,
                                    const std::string& instruction,
                                    const std::string& response,
                                    const std::string& critique,
                                    const client::SamplingConfig& sampling) {
    if (refiner.backend == nullptr) {
        throw std::invalid_argument("refine_response: refiner backend not set");
    }
    if (critique.empty()) throw std::invalid_argument("refine_response: critique must be non-empty");
    auto prompt = registry.render(kRefinementTemplate, {{"instruction", instruction},
                                                        {"response", response},
                                                        {"feedback", critique}});
    if (!prompt.ok()) return prompt.error();
    auto reply = refiner.backend->complete(make_request(refiner, prompt.value(), sampling));
    if (!reply.ok()) return reply.error();
    return parser::parse_refinement(reply.value().text);
}

Result<std::vector<RefinementInput>> load_inputs(const std::filesystem::path& path) try {
    auto lines = jsonl::read_lines(path);
    if (!lines.ok()) return lines.error();
    std::vector<RefinementInput> inputs;
    for (std::size_t i = 0; i < lines->size(); ++i) {
        json obj = json::parse((*lines)[i], nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("instruction") ||
            !obj.contains("responses") || !obj["responses"].is_array()) {
            return make_error(ErrorCode::JsonError,
                              path.string() + ":" + std::to_string(i + 1) +
                                  ": expected {instruction, responses}");
        }
        RefinementInput input;
        input.id = obj.value("id", "line-" + std::to_string(i + 1));
        input.instruction = obj["instruction"].get<std::string>();
        input.responses = obj["responses"].get<std::vector<std::string>>();
        inputs.push_back(std::move(input));
    }
    return inputs;
} catch (const json::exception& e) {
    return make_error(ErrorCode::JsonError, path.string() + ": " + e.what());
}

std::string report_to_json(const RefineReport& report) {
    json obj;
    obj["instructions_in"] = report.instructions_in;
    obj["score_pairs"] = report.score_pairs;
    obj["refine_pairs"] = report.refine_pairs;
    obj["skips"] = report.skips;
    json scores = json::object();
    for (const auto& [id, values] : report.scores) {
        json list = json::array();
        for (const auto& value : values) {
            if (value) {
                list.push_back(*value);
            } else {
                list.push_back(nullptr);
            }
        }
        scores[id] = std::move(list);
    }
    obj["scores"] = std::move(scores);
    return obj.dump(2);
}

Result<RefineOutput> build_downstream_pairs(const std::vector<RefinementInput>& inputs,
                                            const ModelHandle& judge,
                                            const ModelHandle& refiner,
                                            const RefineConfig& cfg,
                                            const templates::Registry& registry) {
    if (judge.backend == nullptr) {
        throw std::invalid_argument("build_downstream_pairs: judge backend not set");
    }
    const bool wants_refine = cfg.mode == PairMode::RefinePair || cfg.mode == PairMode::Both;
    const bool wants_score = cfg.mode == PairMode::ScorePair || cfg.mode == PairMode::Both;
    if (wants_refine && refiner.backend == nullptr) {
        throw std::invalid_argument("build_downstream_pairs: refiner backend required in refine mode");
    }

    RefineOutput output;
    output.report.instructions_in = inputs.size();

    std::vector<RefinementInput> ordered = inputs;
    std::sort(ordered.begin(), ordered.end(),
              [](const RefinementInput& a, const RefinementInput& b) { return a.id < b.id; });

    // one scoring batch across all instructions and responses
    std::vector<client::CompletionRequest> score_requests;
    std::vector<std::pair<std::size_t, std::size_t>> request_origin;  // (input idx, response idx)
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        for (std::size_t r = 0; r < ordered[i].responses.size(); ++r) {
            auto prompt = registry.render(kLikertTemplate, {{"instruction", ordered[i].instruction},
                                                            {"response", ordered[i].responses[r]}});
            if (!prompt.ok()) return prompt.error();
            score_requests.push_back(make_request(judge, prompt.value(), cfg.judge_sampling));
            request_origin.emplace_back(i, r);
        }
    }
    auto score_replies = client::complete_batch(*judge.backend, score_requests, cfg.parallelism);

    std::vector<std::vector<std::optional<ScoredResponse>>> scored(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        scored[i].resize(ordered[i].responses.size());
    }
    for (std::size_t q = 0; q < score_replies.size(); ++q) {
        const auto [i, r] = request_origin[q];
        if (!score_replies[q].ok()) {
            output.report.skips["ScoreClientError"] += 1;
            continue;
        }
        auto parsed = parse_likert_reply(score_replies[q].value().text, ordered[i].responses[r]);
        if (!parsed.ok()) {
            output.report.skips["ScoreUnparseable"] += 1;
            continue;
        }
        scored[i][r] = std::move(parsed).value();
    }

    struct RefineTask {
        std::size_t input_index;
        ScoredResponse target;
    };
    std::vector<RefineTask> refine_tasks;

    for (std::size_t i = 0; i < ordered.size(); ++i) {
        auto& score_row = output.report.scores[ordered[i].id];
        std::vector<ScoredResponse> valid;
        for (const auto& entry : scored[i]) {
            if (entry) {
                score_row.push_back(entry->score);
                valid.push_back(*entry);
            } else {
                score_row.push_back(std::nullopt);
            }
        }

        auto extremes = select_extreme_pair(valid);
        if (!extremes.ok()) {
            output.report.skips["TooFewResponses"] += 1;
            continue;
        }
        if (!extremes.value()) {
            output.report.skips["NoScoreSignal"] += 1;
            continue;
        }
        const auto [best, worst] = *extremes.value();

        if (wants_score) {
            PreferencePair pair;
            pair.kind = PairKind::DownstreamScore;
            pair.prompt = ordered[i].instruction;
            pair.chosen = valid[best].response;
            pair.rejected = valid[worst].response;
            pair.source_record_id = ordered[i].id;
            if (pair.chosen == pair.rejected) {
                output.report.skips["DegenerateScorePair"] += 1;
            } else {
                output.report.score_pairs += 1;
                output.pairs.push_back(std::move(pair));
            }
        }

        if (wants_refine) {
            std::vector<std::size_t> targets;
            if (cfg.refine_threshold) {
                for (std::size_t v = 0; v < valid.size(); ++v) {
                    if (valid[v].score <= *cfg.refine_threshold) targets.push_back(v);
                }
            } else {
                targets.push_back(worst);
            }
            for (std::size_t v : targets) {
                if (valid[v].critique.empty()) {
                    output.report.skips["EmptyCritique"] += 1;
                    continue;
                }
                refine_tasks.push_back(RefineTask{i, valid[v]});
            }
        }
    }

    if (!refine_tasks.empty()) {
        std::vector<client::CompletionRequest> refine_requests;
        refine_requests.reserve(refine_tasks.size());
        for (const auto& task : refine_tasks) {
            auto prompt = registry.render(kRefinementTemplate,
                                          {{"instruction", ordered[task.input_index].instruction},
                                           {"response", task.target.response},
                                           {"feedback", task.target.critique}});
            if (!prompt.ok()) return prompt.error();
            refine_requests.push_back(make_request(refiner, prompt.value(), cfg.refiner_sampling));
        }
        auto refine_replies =
            client::complete_batch(*refiner.backend, refine_requests, cfg.parallelism);

        for (std::size_t t = 0; t < refine_tasks.size(); ++t) {
            if (!refine_replies[t].ok()) {
                output.report.skips["RefineClientError"] += 1;
                continue;
            }
            auto improved = parser::parse_refinement(refine_replies[t].value().text);
            if (!improved.ok()) {
                output.report.skips["RefineUnparseable"] += 1;
                continue;
            }
            const auto& task = refine_tasks[t];
            if (improved.value() == task.target.response) {
                output.report.skips["RefinementUnchanged"] += 1;
                continue;
            }
            PreferencePair pair;
            pair.kind = PairKind::DownstreamRefine;
            pair.prompt = ordered[task.input_index].instruction;
            pair.chosen = std::move(improved).value();
            pair.rejected = task.target.response;
            pair.source_record_id = ordered[task.input_index].id;
            output.report.refine_pairs += 1;
            output.pairs.push_back(std::move(pair));
        }
    }

    return output;
}

}  // namespace judgekit::refine
