#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "judgekit/result.hpp"

namespace judgekit::loss {

enum class ModelTag { Policy, Reference };

/// Per-token log-probabilities of one completion under one model.
/// Valid entries are finite and <= 0; the JSONL loader enforces this.
struct TokenLogProbs {
    std::size_t prompt_len{};                  // |x|
    std::vector<double> completion_logprobs;   // one per completion token
    ModelTag model_tag{ModelTag::Policy};
};

/// LogRatio is the standard DPO inner term on summed log-probabilities.
/// LiteralRatio exponentiates the summed log-probabilities into probability
/// ratios before the sigmoid; it collapses numerically for long sequences
/// and exists for auditing only.
enum class DpoForm { LogRatio, LiteralRatio };

struct LossConfig {
    double beta{0.1};
    double sft_weight{1.0};
    DpoForm dpo_form{DpoForm::LogRatio};
    bool sft_completion_only{false};  // drop |x| from the SFT denominator
};

struct LossInstance {
    std::size_t x_len{};
    TokenLogProbs chosen_policy;
    TokenLogProbs chosen_ref;
    TokenLogProbs rejected_policy;
    TokenLogProbs rejected_ref;
};

struct LossBreakdown {
    double total{};
    double sft{};
    double dpo{};
};

/// Numerically stable log(1 + e^z).
double stable_softplus(double z);

/// Numerically stable logistic sigmoid.
double stable_sigmoid(double z);

/// Length-normalized negative log-likelihood of the chosen completion:
/// -(sum of completion log-probs) / (|y^w| + |x|).
Result<double> sft_loss(const LossConfig& cfg, std::size_t x_len,
                        const TokenLogProbs& chosen_policy);

/// -log sigma of the preference margin between chosen and rejected
/// completions, policy vs fixed reference.
Result<double> dpo_loss(const LossConfig& cfg,
                        const TokenLogProbs& chosen_policy,
                        const TokenLogProbs& chosen_ref,
                        const TokenLogProbs& rejected_policy,
                        const TokenLogProbs& rejected_ref);

/// sft_weight * SFT + DPO, components reported separately.
Result<LossBreakdown> combined_loss(const LossConfig& cfg, const LossInstance& instance);

/// Analytic d(total)/d(policy completion log-prob), chosen tokens first,
/// rejected tokens after.
Result<std::vector<double>> policy_gradient(const LossConfig& cfg, const LossInstance& instance);

struct GradCheckReport {
    double max_relative_error{};
    std::size_t worst_coordinate{};
    std::size_t coordinates{};
};

/// Central finite differences on every policy completion log-prob against
/// the analytic gradient. epsilon must be in (0, 1e-3].
Result<GradCheckReport> grad_check(const LossConfig& cfg, const LossInstance& instance,
                                   double epsilon);

/// JSONL instance format:
///   {"x_len": 7, "chosen_policy": [...], "chosen_ref": [...],
///    "rejected_policy": [...], "rejected_ref": [...]}
Result<LossInstance> instance_from_json_line(const std::string& line);
std::string instance_to_json_line(const LossInstance& instance);
Result<std::vector<LossInstance>> load_instances(const std::filesystem::path& path);

}  // namespace judgekit::loss
