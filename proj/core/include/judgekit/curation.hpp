#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/llm_client.hpp"
#include "judgekit/result.hpp"
#include "judgekit/templates.hpp"
#include "judgekit/types.hpp"

namespace judgekit::curation {

/// A chat backend plus the model name to request from it.
struct ModelHandle {
    client::CompletionBackend* backend{};
    std::string model;
};

enum class PairingPolicy {
    OnePerRecord,  // first positive x first negative
    AllPairs,      // full positive x negative cartesian product
};

struct CurationConfig {
    int n_samples{4};                  // teacher samples per record
    double teacher_temperature{1.0};   // candidate diversity; distinct seed per sample
    int max_tokens{1024};
    PairingPolicy pairing{PairingPolicy::OnePerRecord};
    std::array<double, 3> ratio{0.7, 0.15, 0.15};  // CoT : Std : Ded
    std::uint64_t seed{0};
    int parallelism{1};
};

/// One teacher sample and what the parser made of it.
struct Candidate {
    std::string raw;
    std::optional<JudgeOutput> parsed;
    std::optional<std::string> error;  // parse or client error name
};

/// Samples n CoT evaluations of the record from the teacher.
Result<std::vector<Candidate>> generate_candidates(const templates::Registry& registry,
                                                   const EvaluationRecord& record,
                                                   const ModelHandle& teacher,
                                                   int n,
                                                   const CurationConfig& cfg);

struct Split {
    std::vector<JudgeOutput> positives;  // judgement matches ground truth
    std::vector<JudgeOutput> negatives;
    std::size_t discarded{};             // unparseable candidates
};

Split split_by_ground_truth(const std::vector<Candidate>& candidates, const Judgement& truth);

/// CoT preference pairs under the pairing policy. Either list empty yields
/// zero pairs; the caller logs the record.
std::vector<PreferencePair> build_cot_pairs(const std::vector<JudgeOutput>& positives,
                                            const std::vector<JudgeOutput>& negatives,
                                            const std::string& prompt,
                                            const std::string& record_id,
                                            PairingPolicy policy);

/// Reduces a CoT pair to its bare-result form: completions become
/// "**Result:** <j>" and the prompt is re-rendered with the no-CoT template
/// variant. Returns nullopt when chosen and rejected collapse to the same
/// text (degenerate, dropped).
Result<std::optional<PreferencePair>> build_std_pair(const templates::Registry& registry,
                                                     const EvaluationRecord& record,
                                                     const PreferencePair& cot_pair);

/// Renders the response-deduction prompt a weak model should answer for
/// this record: the judged protocol text, the task input and the
/// ground-truth-matching evaluation.
Result<std::string> render_deduction_prompt(const templates::Registry& registry,
                                            const EvaluationRecord& record,
                                            const JudgeOutput& positive_eval);

/// Assembles the deduction pair: chosen is the template-formatted original
/// response(s), rejected is the weak model's reply (kept raw even when it
/// does not parse). Returns nullopt when the weak model reproduced the
/// originals verbatim.
Result<std::optional<PreferencePair>> build_ded_pair(const templates::Registry& registry,
                                                     const EvaluationRecord& record,
                                                     const JudgeOutput& positive_eval,
                                                     const std::string& prompt,
                                                     const std::string& weak_reply);

/// Final corpus sizes for the given pool sizes and mixing ratio: the largest
/// total whose ratio split fits every pool.
Result<std::array<std::size_t, 3>> mix_counts(const std::array<std::size_t, 3>& pool_sizes,
                                              const std::array<double, 3>& ratio);

struct MixOutput {
    std::vector<PreferencePair> corpus;  // balanced, mixed, deterministic order
    std::array<std::size_t, 3> balanced_pool_sizes{};
    std::array<std::size_t, 3> final_counts{};
    std::map<std::string, std::map<std::string, std::size_t>> label_histograms;  // task -> label -> count
};

/// Balances ground-truth labels within each task kind of each pool
/// (downsampling majority labels), then subsamples the pools to the mixing
/// ratio. Seeded and invariant under input permutation.
Result<MixOutput> mix_and_balance(const std::vector<PreferencePair>& cot,
                                  const std::vector<PreferencePair>& std_pairs,
                                  const std::vector<PreferencePair>& ded,
                                  const std::array<double, 3>& ratio,
                                  std::uint64_t seed,
                                  const std::map<std::string, EvaluationRecord>& records_by_id);

struct CurationReport {
    std::size_t records_in{};
    std::size_t records_invalid{};
    std::array<std::size_t, 3> raw_pool_sizes{};
    std::array<std::size_t, 3> balanced_pool_sizes{};
    std::array<std::size_t, 3> final_counts{};
    std::map<std::string, std::size_t> discards;  // reason -> count
    std::map<std::string, std::map<std::string, std::size_t>> label_histograms;
    std::uint64_t seed{};
    int n_samples{};
};

std::string report_to_json(const CurationReport& report);

struct CurationOutput {
    std::vector<PreferencePair> corpus;
    CurationReport report;
};

/// The whole pipeline: teacher sampling, pair construction for all three
/// kinds, balancing and mixing.
Result<CurationOutput> curate(const std::vector<EvaluationRecord>& records,
                              const ModelHandle& teacher,
                              const ModelHandle& weak,
                              const CurationConfig& cfg,
                              const templates::Registry& registry);

}  // namespace judgekit::curation
