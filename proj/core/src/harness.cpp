#include "judgekit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "judgekit/parser.hpp"

namespace judgekit::harness {

using nlohmann::json;

namespace {

Preference unswap(const Preference& pref) {
    switch (pref.choice) {
        case PreferenceChoice::A: return Preference{PreferenceChoice::B};
        case PreferenceChoice::B: return Preference{PreferenceChoice::A};
        case PreferenceChoice::Tie: return Preference{PreferenceChoice::Tie};
    }
    return pref;
}

Judgement swap_truth(const Judgement& truth) {
    if (const auto* pref = std::get_if<Preference>(&truth)) {
        return Judgement{unswap(*pref)};
    }
    return truth;
}

struct PassStats {
    double metric_value{};
    bool metric_defined{true};
    double unparsed_rate{};
};

}  // namespace

const char* to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::Accuracy: return "accuracy";
        case MetricKind::Microaverage: return "microaverage";
        case MetricKind::Pearson: return "pearson";
    }
    return "unknown";
}

std::vector<Result<std::string>> Judge::reply_batch(const std::vector<std::string>& prompts,
                                                    int parallelism) {
    (void)parallelism;
    std::vector<Result<std::string>> replies;
    replies.reserve(prompts.size());
    for (const auto& prompt : prompts) replies.push_back(reply(prompt));
    return replies;
}

ApiJudge::ApiJudge(client::CompletionBackend& backend, std::string model,
                   client::SamplingConfig sampling)
    : backend_(backend), model_(std::move(model)), sampling_(sampling) {}

Result<std::string> ApiJudge::reply(const std::string& prompt) {
    client::CompletionRequest request;
    request.model = model_;
    request.messages.push_back({"user", prompt});
    request.sampling = sampling_;
    auto result = backend_.complete(request);
    if (!result.ok()) return result.error();
    return result.value().text;
}

std::vector<Result<std::string>> ApiJudge::reply_batch(const std::vector<std::string>& prompts,
                                                       int parallelism) {
    std::vector<client::CompletionRequest> requests;
    requests.reserve(prompts.size());
    for (const auto& prompt : prompts) {
        client::CompletionRequest request;
        request.model = model_;
        request.messages.push_back({"user", prompt});
        request.sampling = sampling_;
        requests.push_back(std::move(request));
    }
    auto results = client::complete_batch(backend_, requests, parallelism);
    std::vector<Result<std::string>> replies;
    replies.reserve(results.size());
    for (auto& result : results) {
        if (result.ok()) {
            replies.push_back(std::move(result).value().text);
        } else {
            replies.push_back(result.error());
        }
    }
    return replies;
}

Result<double> accuracy(const std::vector<RecordOutcome>& outcomes) {
    if (outcomes.empty()) return make_error(ErrorCode::EmptyOutcomes, "accuracy over zero outcomes");
    std::size_t correct = 0;
    for (const auto& outcome : outcomes) {
        if (outcome.correct) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

Result<double> microaverage(const std::vector<RecordOutcome>& outcomes) {
    // pooled over all items; categories only change the breakdown, not the value
    return accuracy(outcomes);
}

std::map<std::string, double> per_category_accuracy(const std::vector<RecordOutcome>& outcomes) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // correct, total
    for (const auto& outcome : outcomes) {
        if (!outcome.category) continue;
        auto& entry = counts[*outcome.category];
        entry.second += 1;
        if (outcome.correct) entry.first += 1;
    }
    std::map<std::string, double> accuracies;
    for (const auto& [category, entry] : counts) {
        accuracies[category] = static_cast<double>(entry.first) / static_cast<double>(entry.second);
    }
    return accuracies;
}

Result<double> macroaverage(const std::vector<RecordOutcome>& outcomes) {
    const auto per_category = per_category_accuracy(outcomes);
    if (per_category.empty()) {
        return make_error(ErrorCode::EmptyOutcomes, "no categorized outcomes");
    }
    double sum = 0.0;
    for (const auto& [_, value] : per_category) sum += value;
    return sum / static_cast<double>(per_category.size());
}

Result<double> pearson(const std::vector<double>& predicted, const std::vector<double>& truth) {
    if (predicted.size() != truth.size()) {
        throw std::invalid_argument("pearson: input lengths differ");
    }
    if (predicted.size() < 2) {
        return make_error(ErrorCode::EmptyOutcomes, "pearson needs at least two points");
    }
    const double n = static_cast<double>(predicted.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        mean_x += predicted[i];
        mean_y += truth[i];
    }
    mean_x /= n;
    mean_y /= n;

    double cov = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double dx = predicted[i] - mean_x;
        const double dy = truth[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if (var_x == 0.0 || var_y == 0.0) {
        return make_error(ErrorCode::ConstantVector,
                          "zero variance on one side, correlation undefined");
    }
    return cov / std::sqrt(var_x * var_y);
}

Result<double> consistency_rate(const std::vector<RecordOutcome>& pass1,
                                const std::vector<RecordOutcome>& pass2) {
    if (pass1.size() != pass2.size()) {
        return make_error(ErrorCode::IdMismatch, "pass sizes differ");
    }
    if (pass1.empty()) {
        return make_error(ErrorCode::EmptyOutcomes, "consistency over zero outcomes");
    }
    std::map<std::string, const RecordOutcome*> second;
    for (const auto& outcome : pass2) second[outcome.record_id] = &outcome;

    std::size_t consistent = 0;
    for (const auto& first : pass1) {
        auto it = second.find(first.record_id);
        if (it == second.end()) {
            return make_error(ErrorCode::IdMismatch, "record " + first.record_id + " missing in pass 2");
        }
        const RecordOutcome& other = *it->second;
        if (!first.judgement || !other.judgement) continue;  // unparsed counts as inconsistent
        const auto* p1 = std::get_if<Preference>(&*first.judgement);
        const auto* p2 = std::get_if<Preference>(&*other.judgement);
        if (p1 == nullptr || p2 == nullptr) continue;
        // pass 2 presented the responses in swapped order, so map its choice
        // back to the underlying response before comparing
        if (p1->choice == unswap(*p2).choice) ++consistent;
    }
    return static_cast<double>(consistent) / static_cast<double>(pass1.size());
}

BiasReport bias_report(const std::vector<RecordOutcome>& outcomes,
                       const std::vector<std::pair<std::string, double>>& benchmark_consistency) {
    BiasReport report;
    report.per_category_accuracy = per_category_accuracy(outcomes);
    for (const auto& outcome : outcomes) {
        if (outcome.category) report.per_category_counts[*outcome.category] += 1;
    }
    if (!benchmark_consistency.empty()) {
        double sum = 0.0;
        for (const auto& [_, rate] : benchmark_consistency) sum += rate;
        report.consistency_macro_average = sum / static_cast<double>(benchmark_consistency.size());
    }
    return report;
}

namespace {

std::vector<RecordOutcome> judge_pass(const std::vector<EvaluationRecord>& records,
                                      const RunConfig& cfg,
                                      Judge& judge,
                                      const templates::Registry& registry,
                                      bool swapped,
                                      int pass_number) {
    std::vector<std::string> prompts(records.size());
    std::vector<std::optional<std::string>> render_errors(records.size());
    std::vector<const templates::Template*> effective(records.size(), nullptr);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& record = records[i];
        std::string base_id =
            cfg.template_override ? *cfg.template_override : record.protocol.template_id;
        const templates::Template* tmpl = registry.find(base_id);
        if (tmpl == nullptr) {
            render_errors[i] = "UnknownTemplate";
            continue;
        }
        if (!cfg.expects_cot && tmpl->emits_cot) {
            auto derived = registry.strip_cot_instructions(base_id);
            if (derived.ok()) tmpl = registry.find(derived.value());
        }
        effective[i] = tmpl;
        auto prompt = registry.render_record(record, swapped, tmpl->id);
        if (!prompt.ok()) {
            render_errors[i] = to_string(prompt.error().code);
            continue;
        }
        prompts[i] = std::move(prompt).value();
    }

    // only records that rendered get judged
    std::vector<std::string> judged_prompts;
    std::vector<std::size_t> judged_index;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!render_errors[i]) {
            judged_prompts.push_back(prompts[i]);
            judged_index.push_back(i);
        }
    }
    auto judged_replies = judge.reply_batch(judged_prompts, cfg.parallelism);
    std::vector<const Result<std::string>*> replies(records.size(), nullptr);
    for (std::size_t q = 0; q < judged_index.size(); ++q) {
        replies[judged_index[q]] = &judged_replies[q];
    }

    std::vector<RecordOutcome> outcomes;
    outcomes.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& record = records[i];
        RecordOutcome outcome;
        outcome.record_id = record.id;
        outcome.pass = pass_number;
        outcome.category = record.category;

        if (render_errors[i]) {
            outcome.error = *render_errors[i];
            outcomes.push_back(std::move(outcome));
            continue;
        }
        if (!replies[i]->ok()) {
            outcome.error = to_string(replies[i]->error().code);
            outcomes.push_back(std::move(outcome));
            continue;
        }
        outcome.raw_reply = replies[i]->value();

        const templates::Template* tmpl = effective[i];
        auto parsed = parser::parse_judge_output(outcome.raw_reply, record.protocol.task,
                                                 tmpl->allows_tie, tmpl->emits_cot);
        if (!parsed.ok()) {
            outcome.error = to_string(parsed.error().code);
            outcomes.push_back(std::move(outcome));
            continue;
        }
        outcome.judgement = parsed.value().judgement;
        const Judgement truth =
            swapped ? swap_truth(record.ground_truth) : record.ground_truth;
        outcome.correct = judgement_matches(*outcome.judgement, truth);
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

PassStats pass_stats(const std::vector<RecordOutcome>& outcomes,
                     const std::vector<EvaluationRecord>& records,
                     TaskKind task) {
    PassStats stats;
    std::size_t unparsed = 0;
    for (const auto& outcome : outcomes) {
        if (!outcome.judgement) ++unparsed;
    }
    stats.unparsed_rate = outcomes.empty()
                              ? 0.0
                              : static_cast<double>(unparsed) / static_cast<double>(outcomes.size());

    if (task == TaskKind::SingleRating) {
        std::vector<double> predicted;
        std::vector<double> truth;
        std::map<std::string, const EvaluationRecord*> by_id;
        for (const auto& record : records) by_id[record.id] = &record;
        for (const auto& outcome : outcomes) {
            if (!outcome.judgement) continue;
            const auto* score = std::get_if<Score>(&*outcome.judgement);
            if (score == nullptr) continue;
            const auto* record = by_id.at(outcome.record_id);
            predicted.push_back(static_cast<double>(score->value));
            truth.push_back(static_cast<double>(std::get<Score>(record->ground_truth).value));
        }
        auto r = pearson(predicted, truth);
        if (r.ok()) {
            stats.metric_value = r.value();
        } else {
            stats.metric_value = std::numeric_limits<double>::quiet_NaN();
            stats.metric_defined = false;
        }
        return stats;
    }

    auto value = accuracy(outcomes);
    stats.metric_value = value.ok() ? value.value() : 0.0;
    return stats;
}

}  // namespace

Result<BenchmarkRun> run_benchmark(const std::vector<EvaluationRecord>& records,
                                   const RunConfig& cfg,
                                   Judge& judge,
                                   const templates::Registry& registry) {
    if (records.empty()) {
        return make_error(ErrorCode::EmptyOutcomes, "benchmark has no records");
    }
    const TaskKind task = records.front().protocol.task;
    for (const auto& record : records) {
        if (record.protocol.task != task) {
            return make_error(ErrorCode::VariantMismatch, "records mix task kinds");
        }
    }
    if (cfg.swap == SwapProtocol::BestOfTwo && task != TaskKind::PairwiseComparison) {
        throw std::invalid_argument("BestOfTwo applies to pairwise benchmarks only");
    }

    // deterministic reduction order
    std::vector<EvaluationRecord> ordered = records;
    std::sort(ordered.begin(), ordered.end(),
              [](const EvaluationRecord& a, const EvaluationRecord& b) { return a.id < b.id; });

    BenchmarkRun run;
    run.pass1 = judge_pass(ordered, cfg, judge, registry, /*swapped=*/false, 1);
    const PassStats stats1 = pass_stats(run.pass1, ordered, task);

    MetricReport& report = run.report;
    report.benchmark_id = cfg.benchmark_id;
    report.task = task;
    report.metric = task == TaskKind::SingleRating ? MetricKind::Pearson : MetricKind::Accuracy;
    report.num_records = ordered.size();
    report.pass_values.push_back(stats1.metric_value);

    if (cfg.swap == SwapProtocol::BestOfTwo) {
        run.pass2 = judge_pass(ordered, cfg, judge, registry, /*swapped=*/true, 2);
        const PassStats stats2 = pass_stats(run.pass2, ordered, task);
        report.pass_values.push_back(stats2.metric_value);

        // headline is the better of the two runs, benchmark-level
        if (stats2.metric_value > stats1.metric_value) {
            report.headline_pass = 2;
            report.value = stats2.metric_value;
            report.unparsed_rate = stats2.unparsed_rate;
        } else {
            report.headline_pass = 1;
            report.value = stats1.metric_value;
            report.unparsed_rate = stats1.unparsed_rate;
        }
        auto consistency = consistency_rate(run.pass1, run.pass2);
        if (consistency.ok()) report.consistency_rate = consistency.value();
    } else {
        report.headline_pass = 1;
        report.value = stats1.metric_value;
        report.unparsed_rate = stats1.unparsed_rate;
        if (!stats1.metric_defined) {
            report.notes.push_back("pearson undefined: constant predictions or labels");
        }
    }

    const auto& headline_outcomes = report.headline_pass == 2 ? run.pass2 : run.pass1;
    bool has_category = false;
    for (const auto& outcome : headline_outcomes) {
        if (outcome.category) has_category = true;
    }
    if (has_category) {
        report.metric = task == TaskKind::SingleRating ? report.metric : MetricKind::Microaverage;
        report.per_category = per_category_accuracy(headline_outcomes);
        for (const auto& outcome : headline_outcomes) {
            if (outcome.category) report.per_category_counts[*outcome.category] += 1;
        }
        if (auto macro = macroaverage(headline_outcomes); macro.ok()) {
            report.macro_average = macro.value();
        }
    }

    bool has_tie_truth = false;
    for (const auto& record : ordered) {
        const auto* pref = std::get_if<Preference>(&record.ground_truth);
        if (pref != nullptr && pref->choice == PreferenceChoice::Tie) has_tie_truth = true;
    }
    if (has_tie_truth) {
        report.notes.push_back(
            "tie ground truths: any non-matching prediction counts as incorrect");
    }

    return run;
}

std::string report_to_json(const MetricReport& report) {
    json obj;
    obj["benchmark_id"] = report.benchmark_id;
    obj["task"] = judgekit::to_string(report.task);
    obj["metric"] = to_string(report.metric);
    if (std::isnan(report.value)) {
        obj["value"] = nullptr;
    } else {
        obj["value"] = report.value;
    }
    obj["pass_values"] = report.pass_values;
    obj["headline_pass"] = report.headline_pass;
    if (!report.per_category.empty()) {
        obj["per_category"] = report.per_category;
        obj["per_category_counts"] = report.per_category_counts;
    }
    if (report.macro_average) obj["macro_average"] = *report.macro_average;
    if (report.consistency_rate) obj["consistency_rate"] = *report.consistency_rate;
    obj["unparsed_rate"] = report.unparsed_rate;
    obj["num_records"] = report.num_records;
    if (!report.notes.empty()) obj["notes"] = report.notes;
    return obj.dump(2);
}

std::string outcome_to_json_line(const RecordOutcome& outcome) {
    json obj;
    obj["id"] = outcome.record_id;
    obj["pass"] = outcome.pass;
    obj["raw"] = outcome.raw_reply;
    if (outcome.judgement) {
        obj["judgement"] = judgement_value_text(*outcome.judgement);
    } else {
        obj["judgement"] = nullptr;
    }
    if (outcome.error) obj["error"] = *outcome.error;
    obj["correct"] = outcome.correct;
    if (outcome.category) obj["category"] = *outcome.category;
    return obj.dump();
}

}  // namespace judgekit::harness
