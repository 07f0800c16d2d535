#include "judgekit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "judgekit/parser.hpp"

namespace judgekit::curation {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 3> kPoolNames = {"cot", "std", "ded"};

client::CompletionRequest teacher_request(const ModelHandle& teacher, const std::string& prompt,
                                          const CurationConfig& cfg, int sample_index) {
    client::CompletionRequest request;
    request.model = teacher.model;
    request.messages.push_back({"user", prompt});
    request.sampling.temperature = cfg.teacher_temperature;
    request.sampling.top_p = 1.0;
    request.sampling.max_tokens = cfg.max_tokens;
    request.sampling.seed = static_cast<int>(cfg.seed % 1000000) * 100 + sample_index;
    return request;
}

Status check_ratio(const std::array<double, 3>& ratio) {
    double sum = 0.0;
    for (double r : ratio) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            return make_error(ErrorCode::InvalidRatio, "ratio components must be positive");
        }
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        return make_error(ErrorCode::InvalidRatio, "ratio must sum to 1");
    }
    return ok_status();
}

bool pair_less(const PreferencePair& a, const PreferencePair& b) {
    return std::tie(a.source_record_id, a.prompt, a.chosen, a.rejected) <
           std::tie(b.source_record_id, b.prompt, b.chosen, b.rejected);
}

/// Canonical sort, seeded shuffle, take the head, restore canonical order.
std::vector<PreferencePair> sample_without_replacement(std::vector<PreferencePair> pool,
                                                       std::size_t count, std::mt19937_64& rng) {
    std::sort(pool.begin(), pool.end(), pair_less);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(count, pool.size()));
    std::sort(pool.begin(), pool.end(), pair_less);
    return pool;
}

std::string truth_label(const PreferencePair& pair,
                        const std::map<std::string, EvaluationRecord>& records_by_id) {
    auto it = records_by_id.find(pair.source_record_id);
    if (it == records_by_id.end()) return "?";
    return judgement_value_text(it->second.ground_truth);
}

TaskKind truth_task(const PreferencePair& pair,
                    const std::map<std::string, EvaluationRecord>& records_by_id) {
    auto it = records_by_id.find(pair.source_record_id);
    if (it == records_by_id.end()) return TaskKind::PairwiseComparison;
    return it->second.protocol.task;
}

/// Downsamples majority labels within each task kind so every label present
/// occurs equally often.
std::vector<PreferencePair> balance_labels(
    const std::vector<PreferencePair>& pool,
    const std::map<std::string, EvaluationRecord>& records_by_id,
    std::mt19937_64& rng) {
    std::map<std::pair<TaskKind, std::string>, std::vector<PreferencePair>> groups;
    for (const auto& pair : pool) {
        groups[{truth_task(pair, records_by_id), truth_label(pair, records_by_id)}].push_back(pair);
    }
    std::map<TaskKind, std::size_t> floor_per_task;
    for (const auto& [key, group] : groups) {
        auto it = floor_per_task.find(key.first);
        if (it == floor_per_task.end()) {
            floor_per_task[key.first] = group.size();
        } else {
            it->second = std::min(it->second, group.size());
        }
    }
    std::vector<PreferencePair> balanced;
    for (auto& [key, group] : groups) {
        auto sampled = sample_without_replacement(std::move(group), floor_per_task[key.first], rng);
        balanced.insert(balanced.end(), sampled.begin(), sampled.end());
    }
    std::sort(balanced.begin(), balanced.end(), pair_less);
    return balanced;
}

}  // namespace

Result<std::vector<Candidate>> generate_candidates(const templates::Registry& registry,
                                                   const EvaluationRecord& record,
                                                   const ModelHandle& teacher,
                                                   int n,
                                                   const CurationConfig& cfg) {
    if (n < 2) throw std::invalid_argument("generate_candidates: n must be >= 2");
    if (teacher.backend == nullptr) {
        throw std::invalid_argument("generate_candidates: teacher backend not set");
    }
    auto prompt = registry.render_record(record);
    if (!prompt.ok()) return prompt.error();

    std::vector<client::CompletionRequest> requests;
    requests.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        requests.push_back(teacher_request(teacher, prompt.value(), cfg, k));
    }
    auto replies = client::complete_batch(*teacher.backend, requests, cfg.parallelism);

    const auto* tmpl = registry.find(record.protocol.template_id);
    const bool expects_cot = tmpl != nullptr && tmpl->emits_cot;
    const bool allows_tie = tmpl != nullptr && tmpl->allows_tie;

    std::vector<Candidate> candidates;
    candidates.reserve(replies.size());
    for (auto& reply : replies) {
        Candidate candidate;
        if (!reply.ok()) {
            candidate.error = to_string(reply.error().code);
            candidates.push_back(std::move(candidate));
            continue;
        }
        candidate.raw = reply.value().text;
        auto parsed = parser::parse_judge_output(candidate.raw, record.protocol.task, allows_tie,
                                                 expects_cot);
        if (parsed.ok()) {
            candidate.parsed = std::move(parsed).value();
        } else {
            candidate.error = to_string(parsed.error().code);
        }
        candidates.push_back(std::move(candidate));
    }
    return candidates;
}

Split split_by_ground_truth(const std::vector<Candidate>& candidates, const Judgement& truth) {
    Split split;
    for (const auto& candidate : candidates) {
        if (!candidate.parsed) {
            ++split.discarded;
            continue;
        }
        if (judgement_matches(candidate.parsed->judgement, truth)) {
            split.positives.push_back(*candidate.parsed);
        } else {
            split.negatives.push_back(*candidate.parsed);
        }
    }
    return split;
}

std::vector<PreferencePair> build_cot_pairs(const std::vector<JudgeOutput>& positives,
                                            const std::vector<JudgeOutput>& negatives,
                                            const std::string& prompt,
                                            const std::string& record_id,
                                            PairingPolicy policy) {
    std::vector<PreferencePair> pairs;
    if (positives.empty() || negatives.empty()) return pairs;

    auto emit = [&](const JudgeOutput& pos, const JudgeOutput& neg) {
        if (pos.raw == neg.raw) return;  // cannot happen for matching/non-matching, kept as a guard
        PreferencePair pair;
        pair.kind = PairKind::CoT;
        pair.prompt = prompt;
        pair.chosen = pos.raw;
        pair.rejected = neg.raw;
        pair.source_record_id = record_id;
        pairs.push_back(std::move(pair));
    };

    if (policy == PairingPolicy::OnePerRecord) {
        emit(positives.front(), negatives.front());
    } else {
        for (const auto& pos : positives) {
            for (const auto& neg : negatives) emit(pos, neg);
        }
    }
    return pairs;
}

Result<std::optional<PreferencePair>> build_std_pair(const templates::Registry& registry,
                                                     const EvaluationRecord& record,
                                                     const PreferencePair& cot_pair) {
    const auto* tmpl = registry.find(record.protocol.template_id);
    if (tmpl == nullptr) {
        return make_error(ErrorCode::UnknownTemplate, record.protocol.template_id);
    }
    auto parse = [&](const std::string& text) {
        return parser::parse_judge_output(text, record.protocol.task, tmpl->allows_tie,
                                          tmpl->emits_cot);
    };
    auto chosen = parse(cot_pair.chosen);
    auto rejected = parse(cot_pair.rejected);
    if (!chosen.ok() || !rejected.ok()) {
        return make_error(ErrorCode::SourceUnparseable,
                          "CoT completion did not parse for record " + record.id);
    }

    auto no_cot_id = registry.strip_cot_instructions(record.protocol.template_id);
    if (!no_cot_id.ok()) return no_cot_id.error();
    auto prompt = registry.render_record(record, /*swap_responses=*/false, no_cot_id.value());
    if (!prompt.ok()) return prompt.error();

    PreferencePair pair;
    pair.kind = PairKind::Std;
    pair.prompt = std::move(prompt).value();
    pair.chosen = parser::render_reply(std::nullopt, chosen.value().judgement);
    pair.rejected = parser::render_reply(std::nullopt, rejected.value().judgement);
    pair.source_record_id = cot_pair.source_record_id;
    if (pair.chosen == pair.rejected) {
        return std::optional<PreferencePair>{};  // degenerate
    }
    return std::optional<PreferencePair>{std::move(pair)};
}

Result<std::string> render_deduction_prompt(const templates::Registry& registry,
                                            const EvaluationRecord& record,
                                            const JudgeOutput& positive_eval) {
    const auto* judge_tmpl = registry.find(record.protocol.template_id);
    if (judge_tmpl == nullptr) {
        return make_error(ErrorCode::UnknownTemplate, record.protocol.template_id);
    }
    const char* deduction_id = record.protocol.task == TaskKind::PairwiseComparison
                                   ? "deduction_pairwise"
                                   : "deduction_single";
    std::map<std::string, std::string> fields;
    fields["instruction"] = templates::Registry::protocol_section(*judge_tmpl);
    fields["input"] = record.instruction;
    fields["evaluation"] = positive_eval.raw;
    return registry.render(deduction_id, fields);
}

Result<std::optional<PreferencePair>> build_ded_pair(const templates::Registry& registry,
                                                     const EvaluationRecord& record,
                                                     const JudgeOutput& positive_eval,
                                                     const std::string& prompt,
                                                     const std::string& weak_reply) {
    if (!judgement_matches(positive_eval.judgement, record.ground_truth)) {
        throw std::invalid_argument("build_ded_pair: evaluation does not match ground truth");
    }
    (void)registry;
    PreferencePair pair;
    pair.kind = PairKind::Ded;
    pair.prompt = prompt;
    pair.chosen = parser::render_deduction_reply(record.responses, record.protocol.task);
    pair.rejected = weak_reply;  // raw even when unparseable
    pair.source_record_id = record.id;
    if (pair.chosen == pair.rejected) {
        return std::optional<PreferencePair>{};  // weak model reproduced the originals
    }
    return std::optional<PreferencePair>{std::move(pair)};
}

Result<std::array<std::size_t, 3>> mix_counts(const std::array<std::size_t, 3>& pool_sizes,
                                              const std::array<double, 3>& ratio) {
    if (auto status = check_ratio(ratio); !status.ok()) return status.error();
    for (std::size_t k = 0; k < 3; ++k) {
        if (pool_sizes[k] == 0) {
            return make_error(ErrorCode::EmptyPool, kPoolNames[k]);
        }
    }

    // largest total whose ratio shares fit inside every pool
    std::size_t total = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < 3; ++k) {
        total = std::min(total,
                         static_cast<std::size_t>(std::floor(
                             static_cast<double>(pool_sizes[k]) / ratio[k] + 1e-9)));
    }

    std::array<std::size_t, 3> counts{};
    std::array<double, 3> fractional{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = ratio[k] * static_cast<double>(total);
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        fractional[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    while (assigned < total) {
        std::size_t best = 3;
        for (std::size_t k = 0; k < 3; ++k) {
            if (counts[k] >= pool_sizes[k]) continue;
            if (best == 3 || fractional[k] > fractional[best]) best = k;
        }
        if (best == 3) break;
        counts[best] += 1;
        fractional[best] = -1.0;
        ++assigned;
    }
    return counts;
}

Result<MixOutput> mix_and_balance(const std::vector<PreferencePair>& cot,
                                  const std::vector<PreferencePair>& std_pairs,
                                  const std::vector<PreferencePair>& ded,
                                  const std::array<double, 3>& ratio,
                                  std::uint64_t seed,
                                  const std::map<std::string, EvaluationRecord>& records_by_id) {
    if (auto status = check_ratio(ratio); !status.ok()) return status.error();
    const std::array<const std::vector<PreferencePair>*, 3> pools = {&cot, &std_pairs, &ded};
    for (std::size_t k = 0; k < 3; ++k) {
        if (pools[k]->empty()) return make_error(ErrorCode::EmptyPool, kPoolNames[k]);
    }

    MixOutput output;
    std::array<std::vector<PreferencePair>, 3> balanced;
    for (std::size_t k = 0; k < 3; ++k) {
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (k + 1)));
        balanced[k] = balance_labels(*pools[k], records_by_id, rng);
        output.balanced_pool_sizes[k] = balanced[k].size();
    }

    auto counts = mix_counts(output.balanced_pool_sizes, ratio);
    if (!counts.ok()) return counts.error();
    output.final_counts = counts.value();

    for (std::size_t k = 0; k < 3; ++k) {
        std::mt19937_64 rng(seed ^ (0xbf58476d1ce4e5b9ULL * (k + 1)));
        auto sampled = sample_without_replacement(std::move(balanced[k]), output.final_counts[k], rng);
        for (const auto& pair : sampled) {
            auto& histogram = output.label_histograms[to_string(truth_task(pair, records_by_id))];
            histogram[truth_label(pair, records_by_id)] += 1;
        }
        output.corpus.insert(output.corpus.end(), sampled.begin(), sampled.end());
    }
    return output;
}

std::string report_to_json(const CurationReport& report) {
    json obj;
    obj["records_in"] = report.records_in;
    obj["records_invalid"] = report.records_invalid;
    obj["pools"] = {{"cot", report.raw_pool_sizes[0]},
                    {"std", report.raw_pool_sizes[1]},
                    {"ded", report.raw_pool_sizes[2]}};
    obj["balanced_pools"] = {{"cot", report.balanced_pool_sizes[0]},
                             {"std", report.balanced_pool_sizes[1]},
                             {"ded", report.balanced_pool_sizes[2]}};
    obj["final_counts"] = {{"cot", report.final_counts[0]},
                           {"std", report.final_counts[1]},
                           {"ded", report.final_counts[2]}};
    obj["discards"] = report.discards;
    obj["label_histograms"] = report.label_histograms;
    obj["seed"] = report.seed;
    obj["n_samples"] = report.n_samples;
    return obj.dump(2);
}

Result<CurationOutput> curate(const std::vector<EvaluationRecord>& records,
                              const ModelHandle& teacher,
                              const ModelHandle& weak,
                              const CurationConfig& cfg,
                              const templates::Registry& registry) {
    if (teacher.backend == nullptr || weak.backend == nullptr) {
        throw std::invalid_argument("curate: teacher and weak backends must be set");
    }
    if (cfg.n_samples < 2) throw std::invalid_argument("curate: n_samples must be >= 2");
    if (auto status = check_ratio(cfg.ratio); !status.ok()) return status.error();

    CurationOutput output;
    auto& report = output.report;
    report.records_in = records.size();
    report.seed = cfg.seed;
    report.n_samples = cfg.n_samples;

    // deterministic processing order
    std::vector<EvaluationRecord> ordered = records;
    std::sort(ordered.begin(), ordered.end(),
              [](const EvaluationRecord& a, const EvaluationRecord& b) { return a.id < b.id; });

    std::map<std::string, EvaluationRecord> records_by_id;
    std::vector<const EvaluationRecord*> usable;
    std::vector<std::string> prompts;
    std::set<std::string> seen_prompts;
    for (const auto& record : ordered) {
        if (!validate_record(record, &registry).empty()) {
            ++report.records_invalid;
            report.discards["InvalidRecord"] += 1;
            continue;
        }
        auto prompt = registry.render_record(record);
        if (!prompt.ok()) {
            ++report.records_invalid;
            report.discards["InvalidRecord"] += 1;
            continue;
        }
        // exact-match prompt collision: a duplicate x would duplicate pairs
        if (!seen_prompts.insert(prompt.value()).second) {
            report.discards["DuplicatePrompt"] += 1;
            continue;
        }
        records_by_id.emplace(record.id, record);
        usable.push_back(&record);
        prompts.push_back(std::move(prompt).value());
    }

    // one teacher batch for all records and samples, record-major order
    std::vector<client::CompletionRequest> teacher_requests;
    teacher_requests.reserve(usable.size() * static_cast<std::size_t>(cfg.n_samples));
    for (const auto& prompt : prompts) {
        for (int k = 0; k < cfg.n_samples; ++k) {
            teacher_requests.push_back(teacher_request(teacher, prompt, cfg, k));
        }
    }
    auto teacher_replies = client::complete_batch(*teacher.backend, teacher_requests, cfg.parallelism);

    std::vector<PreferencePair> cot_pairs;
    struct DedSource {
        const EvaluationRecord* record;
        JudgeOutput positive;
        std::string prompt;
    };
    std::vector<DedSource> ded_sources;

    for (std::size_t r = 0; r < usable.size(); ++r) {
        const EvaluationRecord& record = *usable[r];
        const auto* tmpl = registry.find(record.protocol.template_id);
        const bool allows_tie = tmpl != nullptr && tmpl->allows_tie;
        const bool expects_cot = tmpl != nullptr && tmpl->emits_cot;

        std::vector<Candidate> candidates;
        for (int k = 0; k < cfg.n_samples; ++k) {
            auto& reply = teacher_replies[r * static_cast<std::size_t>(cfg.n_samples) +
                                          static_cast<std::size_t>(k)];
            Candidate candidate;
            if (!reply.ok()) {
                candidate.error = to_string(reply.error().code);
                report.discards["TeacherClientError"] += 1;
            } else {
                candidate.raw = reply.value().text;
                auto parsed = parser::parse_judge_output(candidate.raw, record.protocol.task,
                                                         allows_tie, expects_cot);
                if (parsed.ok()) {
                    candidate.parsed = std::move(parsed).value();
                } else {
                    candidate.error = to_string(parsed.error().code);
                }
            }
            candidates.push_back(std::move(candidate));
        }

        auto split = split_by_ground_truth(candidates, record.ground_truth);
        report.discards["UnparseableCandidate"] += split.discarded;

        if (split.positives.empty()) {
            report.discards["NoPositive"] += 1;
        } else if (split.negatives.empty()) {
            report.discards["NoNegative"] += 1;
        }

        auto pairs = build_cot_pairs(split.positives, split.negatives, prompts[r], record.id,
                                     cfg.pairing);
        cot_pairs.insert(cot_pairs.end(), pairs.begin(), pairs.end());

        if (!split.positives.empty()) {
            auto prompt = render_deduction_prompt(registry, record, split.positives.front());
            if (prompt.ok()) {
                ded_sources.push_back(
                    DedSource{&record, split.positives.front(), std::move(prompt).value()});
            } else {
                report.discards["DeductionPromptError"] += 1;
            }
        }
    }

    // one weak-model batch for all deduction prompts
    std::vector<client::CompletionRequest> weak_requests;
    weak_requests.reserve(ded_sources.size());
    for (const auto& source : ded_sources) {
        client::CompletionRequest request;
        request.model = weak.model;
        request.messages.push_back({"user", source.prompt});
        request.sampling.temperature = 0.0;
        request.sampling.top_p = 1.0;
        request.sampling.max_tokens = cfg.max_tokens;
        weak_requests.push_back(std::move(request));
    }
    auto weak_replies = client::complete_batch(*weak.backend, weak_requests, cfg.parallelism);

    std::vector<PreferencePair> ded_pairs;
    for (std::size_t i = 0; i < ded_sources.size(); ++i) {
        if (!weak_replies[i].ok()) {
            report.discards["WeakClientError"] += 1;
            continue;
        }
        const std::string& weak_text = weak_replies[i].value().text;
        if (auto parsed = parser::parse_deduction(weak_text, ded_sources[i].record->protocol.task);
            !parsed.ok()) {
            report.discards["WeakModelUnparseable"] += 1;  // tolerated, counted only
        }
        auto pair = build_ded_pair(registry, *ded_sources[i].record, ded_sources[i].positive,
                                   ded_sources[i].prompt, weak_text);
        if (!pair.ok()) {
            report.discards["DedBuildError"] += 1;
            continue;
        }
        if (!pair.value()) {
            report.discards["DegenerateDed"] += 1;
            continue;
        }
        ded_pairs.push_back(*pair.value());
    }

    std::vector<PreferencePair> std_pairs;
    for (const auto& cot_pair : cot_pairs) {
        const auto& record = records_by_id.at(cot_pair.source_record_id);
        auto pair = build_std_pair(registry, record, cot_pair);
        if (!pair.ok()) {
            report.discards["StdSourceUnparseable"] += 1;
            continue;
        }
        if (!pair.value()) {
            report.discards["DegenerateStd"] += 1;
            continue;
        }
        std_pairs.push_back(*pair.value());
    }

    report.raw_pool_sizes = {cot_pairs.size(), std_pairs.size(), ded_pairs.size()};

    auto mixed = mix_and_balance(cot_pairs, std_pairs, ded_pairs, cfg.ratio, cfg.seed,
                                 records_by_id);
    if (!mixed.ok()) return mixed.error();

    report.balanced_pool_sizes = mixed.value().balanced_pool_sizes;
    report.final_counts = mixed.value().final_counts;
    report.label_histograms = mixed.value().label_histograms;
    output.corpus = std::move(mixed).value().corpus;
    return output;
}

}  // namespace judgekit::curation
