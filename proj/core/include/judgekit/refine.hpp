#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "judgekit/curation.hpp"
#include "judgekit/llm_client.hpp"
#include "judgekit/result.hpp"
#include "judgekit/templates.hpp"
#include "judgekit/types.hpp"

namespace judgekit::refine {

using curation::ModelHandle;

struct ScoredResponse {
    std::string response;
    int score{};          // 1..5
    std::string critique;  // judge feedback, reused for refinement
    std::string raw;
};

/// Scores one response on the additive 5-point scale and keeps the critique
/// as language feedback.
Result<ScoredResponse> score_likert(const templates::Registry& registry,
                                    const ModelHandle& judge,
                                    const std::string& instruction,
                                    const std::string& response,
                                    const client::SamplingConfig& sampling = {});

/// (best index, worst index) by score, earliest index on ties; nullopt when
/// every score is equal (no signal). Errors: TooFewResponses.
Result<std::optional<std::pair<std::size_t, std::size_t>>> select_extreme_pair(
    const std::vector<ScoredResponse>& scored);

/// Renders the refinement prompt with the critique as feedback and parses
/// the improved response out of the reply. critique must be non-empty.
Result<std::string> refine_response(const templates::Registry& registry,
                                    const ModelHandle& refiner,
                                    const std::string& instruction,
                                    const std::string& response,
                                    const std::string& critique,
                                    const client::SamplingConfig& sampling = {});

enum class PairMode { ScorePair, RefinePair, Both };

struct RefineConfig {
    PairMode mode{PairMode::ScorePair};
    /// When set, every response scoring <= threshold is refined; by default
    /// only the lowest-scoring response is.
    std::optional<int> refine_threshold;
    int parallelism{1};
    client::SamplingConfig judge_sampling;
    client::SamplingConfig refiner_sampling;
};

/// Input line: {"instruction": ..., "responses": [...], "id": optional}.
struct RefinementInput {
    std::string id;
    std::string instruction;
    std::vector<std::string> responses;
};

Result<std::vector<RefinementInput>> load_inputs(const std::filesystem::path& path);

struct RefineReport {
    std::size_t instructions_in{};
    std::size_t score_pairs{};
    std::size_t refine_pairs{};
    std::map<std::string, std::size_t> skips;                       // reason -> count
    std::map<std::string, std::vector<std::optional<int>>> scores;  // input id -> per-response score
};

std::string report_to_json(const RefineReport& report);

struct RefineOutput {
    std::vector<PreferencePair> pairs;
    RefineReport report;
};

/// Scores every response, emits best/worst pairs and/or critique-guided
/// refinement pairs in the trainer pair schema.
Result<RefineOutput> build_downstream_pairs(const std::vector<RefinementInput>& inputs,
                                            const ModelHandle& judge,
                                            const ModelHandle& refiner,
                                            const RefineConfig& cfg,
                                            const templates::Registry& registry);

}  // namespace judgekit::refine
