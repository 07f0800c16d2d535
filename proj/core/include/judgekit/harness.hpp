#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "judgekit/llm_client.hpp"
#include "judgekit/result.hpp"
#include "judgekit/templates.hpp"
#include "judgekit/types.hpp"

namespace judgekit::harness {

/// Single runs each record once in the given order; BestOfTwo additionally
/// reruns every pairwise record with the response order exchanged and
/// reports the better pass.
enum class SwapProtocol { Single, BestOfTwo };

struct RunConfig {
    std::string benchmark_id{"benchmark"};
    std::string model;
    std::optional<std::string> template_override;  // use this template for every record
    SwapProtocol swap{SwapProtocol::Single};
    bool expects_cot{true};  // false switches to the no-CoT template variants
    client::SamplingConfig sampling;
    int parallelism{1};
};

/// Prompt-in/reply-out view of a judge model.
class Judge {
public:
    virtual ~Judge() = default;
    /// Must be safe for concurrent calls when used with parallelism > 1.
    virtual Result<std::string> reply(const std::string& prompt) = 0;
    virtual std::vector<Result<std::string>> reply_batch(const std::vector<std::string>& prompts,
                                                         int parallelism);
};

/// Judge backed by a chat-completions backend.
class ApiJudge final : public Judge {
public:
    ApiJudge(client::CompletionBackend& backend, std::string model,
             client::SamplingConfig sampling);
    Result<std::string> reply(const std::string& prompt) override;
    std::vector<Result<std::string>> reply_batch(const std::vector<std::string>& prompts,
                                                 int parallelism) override;

private:
    client::CompletionBackend& backend_;
    std::string model_;
    client::SamplingConfig sampling_;
};

/// Deterministic scripted judge for tests and dry runs.
class FnJudge final : public Judge {
public:
    explicit FnJudge(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
    Result<std::string> reply(const std::string& prompt) override { return fn_(prompt); }

private:
    std::function<std::string(const std::string&)> fn_;
};

struct RecordOutcome {
    std::string record_id;
    int pass{1};
    std::string raw_reply;
    std::optional<Judgement> judgement;  // unset when the reply did not parse
    std::optional<std::string> error;    // parse or client error name
    bool correct{false};
    std::optional<std::string> category;
};

enum class MetricKind { Accuracy, Microaverage, Pearson };

const char* to_string(MetricKind kind);

struct MetricReport {
    std::string benchmark_id;
    TaskKind task{TaskKind::PairwiseComparison};
    MetricKind metric{MetricKind::Accuracy};
    double value{};  // headline; NaN when undefined (constant-vector Pearson)
    std::vector<double> pass_values;
    int headline_pass{1};
    std::map<std::string, double> per_category;
    std::map<std::string, int> per_category_counts;
    std::optional<double> macro_average;
    std::optional<double> consistency_rate;
    double unparsed_rate{};
    std::size_t num_records{};
    std::vector<std::string> notes;
};

struct BenchmarkRun {
    std::vector<RecordOutcome> pass1;
    std::vector<RecordOutcome> pass2;  // empty under SwapProtocol::Single
    MetricReport report;
};

/// Judges every record under cfg and reduces the outcomes into a report.
/// Per-record judge or parse failures are recorded, never fatal.
Result<BenchmarkRun> run_benchmark(const std::vector<EvaluationRecord>& records,
                                   const RunConfig& cfg,
                                   Judge& judge,
                                   const templates::Registry& registry);

/// matches / total; unparsed outcomes count as non-matches.
Result<double> accuracy(const std::vector<RecordOutcome>& outcomes);

/// Pooled accuracy over all items irrespective of category.
Result<double> microaverage(const std::vector<RecordOutcome>& outcomes);

/// Mean of per-category accuracies (reported for contrast with microaverage).
Result<double> macroaverage(const std::vector<RecordOutcome>& outcomes);

std::map<std::string, double> per_category_accuracy(const std::vector<RecordOutcome>& outcomes);

/// Sample Pearson correlation. ConstantVector when either side has zero
/// variance (undefined, never coerced to 0).
Result<double> pearson(const std::vector<double>& predicted, const std::vector<double>& truth);

/// Fraction of pairwise records judged for the same underlying response in
/// both passes: the pass-2 choice is un-swapped before comparing, records
/// unparsed in either pass count as inconsistent and Tie/Tie counts as
/// consistent. Passes must cover the same record ids.
Result<double> consistency_rate(const std::vector<RecordOutcome>& pass1,
                                const std::vector<RecordOutcome>& pass2);

struct BiasReport {
    std::map<std::string, double> per_category_accuracy;  // empty categories omitted
    std::map<std::string, int> per_category_counts;
    std::optional<double> consistency_macro_average;
};

/// Per-category accuracy table plus the macro-average of per-benchmark
/// consistency rates.
BiasReport bias_report(const std::vector<RecordOutcome>& outcomes,
                       const std::vector<std::pair<std::string, double>>& benchmark_consistency);

std::string report_to_json(const MetricReport& report);
std::string outcome_to_json_line(const RecordOutcome& outcome);

}  // namespace judgekit::harness
