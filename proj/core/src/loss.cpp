#include "judgekit/loss.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "judgekit/jsonl.hpp"

namespace judgekit::loss {

namespace {

double logprob_sum(const TokenLogProbs& t) {
    return std::accumulate(t.completion_logprobs.begin(), t.completion_logprobs.end(), 0.0);
}

Status check(const TokenLogProbs& t, ModelTag expected, const char* name) {
    if (t.model_tag != expected) {
        return make_error(ErrorCode::TagMismatch, std::string(name) + " has the wrong model tag");
    }
    if (t.completion_logprobs.empty()) {
        return make_error(ErrorCode::EmptyCompletion, name);
    }
    for (double v : t.completion_logprobs) {
        if (!std::isfinite(v)) {
            return make_error(ErrorCode::NonFiniteInput, name);
        }
    }
    return ok_status();
}

Status check_pair(const TokenLogProbs& policy, const TokenLogProbs& ref, const char* which) {
    if (auto s = check(policy, ModelTag::Policy, which); !s.ok()) return s;
    if (auto s = check(ref, ModelTag::Reference, which); !s.ok()) return s;
    if (policy.completion_logprobs.size() != ref.completion_logprobs.size()) {
        return make_error(ErrorCode::LengthMismatch,
                          std::string(which) + ": policy and reference token counts differ");
    }
    return ok_status();
}

struct DpoTerms {
    double sigma_neg;  // sigma(-inner): the shared gradient factor
    double loss;
    double chosen_scale;    // d(inner)/d(chosen policy log-prob)
    double rejected_scale;  // -d(inner)/d(rejected policy log-prob)
};

DpoTerms dpo_terms(const LossConfig& cfg,
                   const TokenLogProbs& chosen_policy, const TokenLogProbs& chosen_ref,
                   const TokenLogProbs& rejected_policy, const TokenLogProbs& rejected_ref) {
    const double dw = logprob_sum(chosen_policy) - logprob_sum(chosen_ref);
    const double dl = logprob_sum(rejected_policy) - logprob_sum(rejected_ref);
    DpoTerms terms{};
    double inner = 0.0;
    if (cfg.dpo_form == DpoForm::LogRatio) {
        inner = cfg.beta * (dw - dl);
        terms.chosen_scale = cfg.beta;
        terms.rejected_scale = cfg.beta;
    } else {
        inner = cfg.beta * std::exp(dw) - cfg.beta * std::exp(dl);
        terms.chosen_scale = cfg.beta * std::exp(dw);
        terms.rejected_scale = cfg.beta * std::exp(dl);
    }
    terms.sigma_neg = stable_sigmoid(-inner);
    terms.loss = stable_softplus(-inner);  // -log sigma(inner)
    return terms;
}

void require_valid_config(const LossConfig& cfg) {
    if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) {
        throw std::invalid_argument("LossConfig.beta must be finite and >= 0");
    }
    if (!(cfg.sft_weight >= 0.0) || !std::isfinite(cfg.sft_weight)) {
        throw std::invalid_argument("LossConfig.sft_weight must be finite and >= 0");
    }
}

}  // namespace

double stable_softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Result<double> sft_loss(const LossConfig& cfg, std::size_t x_len,
                        const TokenLogProbs& chosen_policy) {
    require_valid_config(cfg);
    if (auto s = check(chosen_policy, ModelTag::Policy, "chosen_policy"); !s.ok()) {
        return s.error();
    }
    const double denom = static_cast<double>(chosen_policy.completion_logprobs.size() +
                                             (cfg.sft_completion_only ? 0 : x_len));
    const double value = -logprob_sum(chosen_policy) / denom;
    return value == 0.0 ? 0.0 : value;  // avoid -0.0 in reports
}

Result<double> dpo_loss(const LossConfig& cfg,
                        const TokenLogProbs& chosen_policy,
                        const TokenLogProbs& chosen_ref,
                        const TokenLogProbs& rejected_policy,
                        const TokenLogProbs& rejected_ref) {
    require_valid_config(cfg);
    if (auto s = check_pair(chosen_policy, chosen_ref, "chosen"); !s.ok()) return s.error();
    if (auto s = check_pair(rejected_policy, rejected_ref, "rejected"); !s.ok()) return s.error();
    return dpo_terms(cfg, chosen_policy, chosen_ref, rejected_policy, rejected_ref).loss;
}

Result<LossBreakdown> combined_loss(const LossConfig& cfg, const LossInstance& instance) {
    auto sft = sft_loss(cfg, instance.x_len, instance.chosen_policy);
    if (!sft.ok()) return sft.error();
    auto dpo = dpo_loss(cfg, instance.chosen_policy, instance.chosen_ref,
                        instance.rejected_policy, instance.rejected_ref);
    if (!dpo.ok()) return dpo.error();
    LossBreakdown breakdown;
    breakdown.sft = sft.value();
    breakdown.dpo = dpo.value();
    breakdown.total = cfg.sft_weight * breakdown.sft + breakdown.dpo;
    return breakdown;
}

Result<std::vector<double>> policy_gradient(const LossConfig& cfg, const LossInstance& instance) {
    require_valid_config(cfg);
    if (auto s = check_pair(instance.chosen_policy, instance.chosen_ref, "chosen"); !s.ok()) {
        return s.error();
    }
    if (auto s = check_pair(instance.rejected_policy, instance.rejected_ref, "rejected"); !s.ok()) {
        return s.error();
    }

    const auto terms = dpo_terms(cfg, instance.chosen_policy, instance.chosen_ref,
                                 instance.rejected_policy, instance.rejected_ref);
    const double sft_denom = static_cast<double>(
        instance.chosen_policy.completion_logprobs.size() +
        (cfg.sft_completion_only ? 0 : instance.x_len));

    // Every token log-prob of one completion enters only through the sum, so
    // the partials are constant across tokens of that completion.
    const double d_chosen = -cfg.sft_weight / sft_denom - terms.sigma_neg * terms.chosen_scale;
    const double d_rejected = terms.sigma_neg * terms.rejected_scale;

    std::vector<double> grad;
    grad.reserve(instance.chosen_policy.completion_logprobs.size() +
                 instance.rejected_policy.completion_logprobs.size());
    grad.insert(grad.end(), instance.chosen_policy.completion_logprobs.size(), d_chosen);
    grad.insert(grad.end(), instance.rejected_policy.completion_logprobs.size(), d_rejected);
    return grad;
}

Result<GradCheckReport> grad_check(const LossConfig& cfg, const LossInstance& instance,
                                   double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 1e-3) {
        throw std::invalid_argument("grad_check: epsilon must be in (0, 1e-3]");
    }
    auto analytic = policy_gradient(cfg, instance);
    if (!analytic.ok()) return analytic.error();

    const std::size_t n_chosen = instance.chosen_policy.completion_logprobs.size();
    const std::size_t n_total = analytic->size();

    auto evaluate = [&](std::size_t coord, double delta) -> double {
        LossInstance perturbed = instance;
        auto& target = coord < n_chosen
                           ? perturbed.chosen_policy.completion_logprobs[coord]
                           : perturbed.rejected_policy.completion_logprobs[coord - n_chosen];
        target += delta;
        return combined_loss(cfg, perturbed).value().total;
    };

    GradCheckReport report;
    report.coordinates = n_total;
    for (std::size_t i = 0; i < n_total; ++i) {
        const double numeric = (evaluate(i, epsilon) - evaluate(i, -epsilon)) / (2.0 * epsilon);
        const double a = (*analytic)[i];
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
        const double rel = std::abs(a - numeric) / scale;
        if (rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_coordinate = i;
        }
    }
    return report;
}

Result<LossInstance> instance_from_json_line(const std::string& line) try {
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        return make_error(ErrorCode::JsonError, "loss instance line is not a JSON object");
    }
    auto read_array = [&](const char* key, ModelTag tag,
                          std::size_t x_len) -> Result<TokenLogProbs> {
        if (!obj.contains(key) || !obj[key].is_array()) {
            return make_error(ErrorCode::JsonError, std::string("missing array '") + key + "'");
        }
        TokenLogProbs t;
        t.prompt_len = x_len;
        t.model_tag = tag;
        for (const auto& v : obj[key]) {
            if (!v.is_number()) {
                return make_error(ErrorCode::JsonError, std::string(key) + " holds a non-number");
            }
            const double lp = v.get<double>();
            if (!std::isfinite(lp) || lp > 0.0) {
                return make_error(ErrorCode::NonFiniteInput,
                                  std::string(key) + ": log-probabilities must be finite and <= 0");
            }
            t.completion_logprobs.push_back(lp);
        }
        if (t.completion_logprobs.empty()) {
            return make_error(ErrorCode::EmptyCompletion, key);
        }
        return t;
    };

    if (!obj.contains("x_len") || !obj["x_len"].is_number_unsigned()) {
        return make_error(ErrorCode::JsonError, "missing nonnegative integer 'x_len'");
    }
    LossInstance instance;
    instance.x_len = obj["x_len"].get<std::size_t>();

    auto cp = read_array("chosen_policy", ModelTag::Policy, instance.x_len);
    if (!cp.ok()) return cp.error();
    auto cr = read_array("chosen_ref", ModelTag::Reference, instance.x_len);
    if (!cr.ok()) return cr.error();
    auto rp = read_array("rejected_policy", ModelTag::Policy, instance.x_len);
    if (!rp.ok()) return rp.error();
    auto rr = read_array("rejected_ref", ModelTag::Reference, instance.x_len);
    if (!rr.ok()) return rr.error();
    instance.chosen_policy = std::move(cp).value();
    instance.chosen_ref = std::move(cr).value();
    instance.rejected_policy = std::move(rp).value();
    instance.rejected_ref = std::move(rr).value();
    return instance;
} catch (const nlohmann::json::exception& e) {
    return make_error(ErrorCode::JsonError, e.what());
}

std::string instance_to_json_line(const LossInstance& instance) {
    nlohmann::json obj;
    obj["x_len"] = instance.x_len;
    obj["chosen_policy"] = instance.chosen_policy.completion_logprobs;
    obj["chosen_ref"] = instance.chosen_ref.completion_logprobs;
    obj["rejected_policy"] = instance.rejected_policy.completion_logprobs;
    obj["rejected_ref"] = instance.rejected_ref.completion_logprobs;
    return obj.dump();
}

Result<std::vector<LossInstance>> load_instances(const std::filesystem::path& path) {
    auto lines = jsonl::read_lines(path);
    if (!lines.ok()) return lines.error();
    std::vector<LossInstance> instances;
    instances.reserve(lines->size());
    for (size_t i = 0; i < lines->size(); ++i) {
        auto instance = instance_from_json_line((*lines)[i]);
        if (!instance.ok()) {
            return make_error(instance.error().code,
                              path.string() + ":" + std::to_string(i + 1) + ": " +
                                  instance.error().message);
        }
        instances.push_back(std::move(instance).value());
    }
    return instances;
}

}  // namespace judgekit::loss
