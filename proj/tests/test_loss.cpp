#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "judgekit/loss.hpp"

namespace judgekit::loss {
namespace {

TokenLogProbs make_probs(std::vector<double> values, ModelTag tag, std::size_t x_len = 0) {
    TokenLogProbs t;
    t.prompt_len = x_len;
    t.completion_logprobs = std::move(values);
    t.model_tag = tag;
    return t;
}

// ---------------------------------------------------------------------------
// independent oracle: long double arithmetic, reverse-order summation and the
// direct sigmoid formulas, kept apart from the implementation path

namespace oracle {

long double sum_reversed(const std::vector<double>& values) {
    long double sum = 0.0L;
    for (auto it = values.rbegin(); it != values.rend(); ++it) sum += *it;
    return sum;
}

long double neg_log_sigmoid(long double inner) {
    // -log sigma(inner) = log(1 + e^{-inner}); inputs in the tests keep the
    // exponent within long double range
    if (-inner > 11000.0L) return -inner;  // e^{-inner} dwarfs the 1
    return std::log(1.0L + std::exp(-inner));
}

struct Breakdown {
    long double total, sft, dpo;
};

Breakdown combined(const LossConfig& cfg, const LossInstance& instance) {
    Breakdown out{};
    const long double denom = static_cast<long double>(
        instance.chosen_policy.completion_logprobs.size() +
        (cfg.sft_completion_only ? 0 : instance.x_len));
    out.sft = -sum_reversed(instance.chosen_policy.completion_logprobs) / denom;

    const long double dw = sum_reversed(instance.chosen_policy.completion_logprobs) -
                           sum_reversed(instance.chosen_ref.completion_logprobs);
    const long double dl = sum_reversed(instance.rejected_policy.completion_logprobs) -
                           sum_reversed(instance.rejected_ref.completion_logprobs);
    long double inner;
    if (cfg.dpo_form == DpoForm::LogRatio) {
        inner = static_cast<long double>(cfg.beta) * (dw - dl);
    } else {
        inner = static_cast<long double>(cfg.beta) * std::exp(dw) -
                static_cast<long double>(cfg.beta) * std::exp(dl);
    }
    out.dpo = neg_log_sigmoid(inner);
    out.total = static_cast<long double>(cfg.sft_weight) * out.sft + out.dpo;
    return out;
}

}  // namespace oracle

LossInstance random_instance(std::mt19937& rng, int max_len = 20) {
    std::uniform_real_distribution<double> logprob(-3.0, -1e-3);
    std::uniform_int_distribution<int> length(1, max_len);
    auto draw = [&](ModelTag tag, int n, std::size_t x_len) {
        std::vector<double> values;
        for (int i = 0; i < n; ++i) values.push_back(logprob(rng));
        return make_probs(std::move(values), tag, x_len);
    };
    LossInstance instance;
    instance.x_len = static_cast<std::size_t>(length(rng));
    const int n_chosen = length(rng);
    const int n_rejected = length(rng);
    instance.chosen_policy = draw(ModelTag::Policy, n_chosen, instance.x_len);
    instance.chosen_ref = draw(ModelTag::Reference, n_chosen, instance.x_len);
    instance.rejected_policy = draw(ModelTag::Policy, n_rejected, instance.x_len);
    instance.rejected_ref = draw(ModelTag::Reference, n_rejected, instance.x_len);
    return instance;
}

LossInstance zero_margin_instance() {
    LossInstance instance;
    instance.x_len = 3;
    instance.chosen_policy = make_probs({-0.5, -1.0, -0.25}, ModelTag::Policy, 3);
    instance.chosen_ref = make_probs({-0.5, -1.0, -0.25}, ModelTag::Reference, 3);
    instance.rejected_policy = make_probs({-2.0, -0.75}, ModelTag::Policy, 3);
    instance.rejected_ref = make_probs({-2.0, -0.75}, ModelTag::Reference, 3);
    return instance;
}

TEST(SftLoss, KnownValues) {
    LossConfig cfg;
    auto half = sft_loss(cfg, 2, make_probs({-1.0, -1.0}, ModelTag::Policy));
    ASSERT_TRUE(half.ok());
    EXPECT_DOUBLE_EQ(half.value(), 0.5);  // 2 / (2 + 2)

    auto zero = sft_loss(cfg, 10, make_probs({0.0, 0.0, 0.0}, ModelTag::Policy));
    ASSERT_TRUE(zero.ok());
    EXPECT_DOUBLE_EQ(zero.value(), 0.0);

    cfg.sft_completion_only = true;
    auto completion_only = sft_loss(cfg, 2, make_probs({-1.0, -1.0}, ModelTag::Policy));
    ASSERT_TRUE(completion_only.ok());
    EXPECT_DOUBLE_EQ(completion_only.value(), 1.0);
}

TEST(SftLoss, MatchesIndependentSummation) {
    std::mt19937 rng(11);
    LossConfig cfg;
    for (int i = 0; i < 300; ++i) {
        auto instance = random_instance(rng, 50);
        auto value = sft_loss(cfg, instance.x_len, instance.chosen_policy);
        ASSERT_TRUE(value.ok());
        const long double expected =
            -oracle::sum_reversed(instance.chosen_policy.completion_logprobs) /
            static_cast<long double>(instance.chosen_policy.completion_logprobs.size() +
                                     instance.x_len);
        EXPECT_NEAR(value.value(), static_cast<double>(expected), 1e-12);
    }
}

TEST(SftLoss, Errors) {
    LossConfig cfg;
    auto empty = sft_loss(cfg, 2, make_probs({}, ModelTag::Policy));
    ASSERT_FALSE(empty.ok());
    EXPECT_EQ(empty.error().code, ErrorCode::EmptyCompletion);

    auto wrong_tag = sft_loss(cfg, 2, make_probs({-1.0}, ModelTag::Reference));
    ASSERT_FALSE(wrong_tag.ok());
    EXPECT_EQ(wrong_tag.error().code, ErrorCode::TagMismatch);

    auto non_finite = sft_loss(cfg, 2, make_probs({std::nan("")}, ModelTag::Policy));
    ASSERT_FALSE(non_finite.ok());
    EXPECT_EQ(non_finite.error().code, ErrorCode::NonFiniteInput);
}

TEST(DpoLoss, ZeroMarginIsLogTwo) {
    LossConfig cfg;
    auto instance = zero_margin_instance();
    auto value = dpo_loss(cfg, instance.chosen_policy, instance.chosen_ref,
                          instance.rejected_policy, instance.rejected_ref);
    ASSERT_TRUE(value.ok());
    EXPECT_NEAR(value.value(), std::log(2.0), 1e-12);

    cfg.dpo_form = DpoForm::LiteralRatio;
    auto literal = dpo_loss(cfg, instance.chosen_policy, instance.chosen_ref,
                            instance.rejected_policy, instance.rejected_ref);
    ASSERT_TRUE(literal.ok());
    EXPECT_NEAR(literal.value(), std::log(2.0), 1e-12);
}

TEST(DpoLoss, BetaZeroIsLogTwoForAnyInput) {
    std::mt19937 rng(13);
    LossConfig cfg;
    cfg.beta = 0.0;
    for (int i = 0; i < 50; ++i) {
        auto instance = random_instance(rng);
        auto value = dpo_loss(cfg, instance.chosen_policy, instance.chosen_ref,
                              instance.rejected_policy, instance.rejected_ref);
        ASSERT_TRUE(value.ok());
        EXPECT_NEAR(value.value(), std::log(2.0), 1e-12);
    }
}

TEST(DpoLoss, LengthMismatchRejected) {
    LossConfig cfg;
    auto value = dpo_loss(cfg, make_probs({-1.0, -1.0}, ModelTag::Policy),
                          make_probs({-1.0}, ModelTag::Reference),
                          make_probs({-1.0}, ModelTag::Policy),
                          make_probs({-1.0}, ModelTag::Reference));
    ASSERT_FALSE(value.ok());
    EXPECT_EQ(value.error().code, ErrorCode::LengthMismatch);
}

TEST(CombinedLoss, MatchesBruteForceOracle) {
    std::mt19937 rng(17);
    const double betas[] = {0.05, 0.1, 0.5, 1.0};
    const double weights[] = {0.0, 0.5, 1.0};
    for (int i = 0; i < 500; ++i) {
        LossConfig cfg;
        cfg.beta = betas[i % 4];
        cfg.sft_weight = weights[i % 3];
        cfg.dpo_form = i % 2 == 0 ? DpoForm::LogRatio : DpoForm::LiteralRatio;
        auto instance = random_instance(rng);
        auto breakdown = combined_loss(cfg, instance);
        ASSERT_TRUE(breakdown.ok());
        const auto expected = oracle::combined(cfg, instance);
        const double tol = 1e-12 * std::max(1.0, std::abs(static_cast<double>(expected.total)));
        EXPECT_NEAR(breakdown.value().total, static_cast<double>(expected.total), tol);
        EXPECT_NEAR(breakdown.value().sft, static_cast<double>(expected.sft), tol);
        EXPECT_NEAR(breakdown.value().dpo, static_cast<double>(expected.dpo), tol);
        // component-sum identity
        EXPECT_DOUBLE_EQ(breakdown.value().total,
                         cfg.sft_weight * breakdown.value().sft + breakdown.value().dpo);
    }
}

TEST(CombinedLoss, ZeroMarginZeroLogprobFixture) {
    LossConfig cfg;
    LossInstance instance;
    instance.x_len = 4;
    instance.chosen_policy = make_probs({0.0, 0.0}, ModelTag::Policy, 4);
    instance.chosen_ref = make_probs({0.0, 0.0}, ModelTag::Reference, 4);
    instance.rejected_policy = make_probs({-1.0}, ModelTag::Policy, 4);
    instance.rejected_ref = make_probs({-1.0}, ModelTag::Reference, 4);
    auto breakdown = combined_loss(cfg, instance);
    ASSERT_TRUE(breakdown.ok());
    EXPECT_NEAR(breakdown.value().total, std::log(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(breakdown.value().sft, 0.0);
    EXPECT_NEAR(breakdown.value().dpo, std::log(2.0), 1e-12);
}

TEST(CombinedLoss, SftWeightZeroReducesToDpo) {
    std::mt19937 rng(23);
    LossConfig cfg;
    cfg.sft_weight = 0.0;
    auto instance = random_instance(rng);
    auto breakdown = combined_loss(cfg, instance);
    auto dpo = dpo_loss(cfg, instance.chosen_policy, instance.chosen_ref,
                        instance.rejected_policy, instance.rejected_ref);
    ASSERT_TRUE(breakdown.ok());
    ASSERT_TRUE(dpo.ok());
    EXPECT_DOUBLE_EQ(breakdown.value().total, dpo.value());
}

TEST(GradCheck, RandomInstancesWithinTolerance) {
    std::mt19937 rng(29);
    for (int i = 0; i < 50; ++i) {
        LossConfig cfg;
        cfg.beta = i % 2 == 0 ? 0.1 : 0.7;
        cfg.dpo_form = i % 3 == 0 ? DpoForm::LiteralRatio : DpoForm::LogRatio;
        auto instance = random_instance(rng);
        auto report = grad_check(cfg, instance, 1e-5);
        ASSERT_TRUE(report.ok());
        EXPECT_LE(report.value().max_relative_error, 1e-4) << "instance " << i;
    }
}

TEST(GradCheck, ClosedFormAtZeroMargin) {
    LossConfig cfg;
    cfg.sft_weight = 0.0;  // isolate the DPO term
    auto instance = zero_margin_instance();
    auto grad = policy_gradient(cfg, instance);
    ASSERT_TRUE(grad.ok());
    const std::size_t n_chosen = instance.chosen_policy.completion_logprobs.size();
    for (std::size_t i = 0; i < n_chosen; ++i) {
        EXPECT_NEAR((*grad)[i], -cfg.beta / 2.0, 1e-15);  // sigma(0) = 1/2
    }
    for (std::size_t i = n_chosen; i < grad->size(); ++i) {
        EXPECT_NEAR((*grad)[i], cfg.beta / 2.0, 1e-15);
    }
}

TEST(GradCheck, GradientScalesLinearlyInBetaAtZeroMargin) {
    auto instance = zero_margin_instance();
    LossConfig low;
    low.sft_weight = 0.0;
    low.beta = 0.1;
    LossConfig high = low;
    high.beta = 0.2;
    auto grad_low = policy_gradient(low, instance);
    auto grad_high = policy_gradient(high, instance);
    ASSERT_TRUE(grad_low.ok());
    ASSERT_TRUE(grad_high.ok());
    for (std::size_t i = 0; i < grad_low->size(); ++i) {
        EXPECT_NEAR((*grad_high)[i], 2.0 * (*grad_low)[i], 1e-15);
    }
}

TEST(GradCheck, EpsilonPrecondition) {
    auto instance = zero_margin_instance();
    EXPECT_THROW((void)grad_check(LossConfig{}, instance, 0.0), std::invalid_argument);
    EXPECT_THROW((void)grad_check(LossConfig{}, instance, 1e-2), std::invalid_argument);
}

// strictly decreasing in the chosen policy sum, strictly increasing in the
// rejected policy sum, over a 100-point grid
TEST(Invariants, MonotonicitySweep) {
    LossConfig cfg;
    cfg.sft_weight = 0.0;  // sweep the dpo term alone
    double last = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 100; ++step) {
        const double lp = -10.0 + 0.1 * static_cast<double>(step);
        LossInstance instance;
        instance.x_len = 1;
        instance.chosen_policy = make_probs({lp}, ModelTag::Policy, 1);
        instance.chosen_ref = make_probs({-1.0}, ModelTag::Reference, 1);
        instance.rejected_policy = make_probs({-1.0}, ModelTag::Policy, 1);
        instance.rejected_ref = make_probs({-1.0}, ModelTag::Reference, 1);
        auto value = combined_loss(cfg, instance);
        ASSERT_TRUE(value.ok());
        EXPECT_LT(value.value().total, last);
        last = value.value().total;
    }

    last = -std::numeric_limits<double>::infinity();
    for (int step = 0; step < 100; ++step) {
        const double lp = -10.0 + 0.1 * static_cast<double>(step);
        LossInstance instance;
        instance.x_len = 1;
        instance.chosen_policy = make_probs({-1.0}, ModelTag::Policy, 1);
        instance.chosen_ref = make_probs({-1.0}, ModelTag::Reference, 1);
        instance.rejected_policy = make_probs({lp}, ModelTag::Policy, 1);
        instance.rejected_ref = make_probs({-1.0}, ModelTag::Reference, 1);
        auto value = combined_loss(cfg, instance);
        ASSERT_TRUE(value.ok());
        EXPECT_GT(value.value().total, last);
        last = value.value().total;
    }
}

// adding a constant to both policy and reference log-probs of the same
// completion leaves the ratio unchanged
TEST(Invariants, ShiftInvariance) {
    std::mt19937 rng(31);
    for (const auto form : {DpoForm::LogRatio, DpoForm::LiteralRatio}) {
        LossConfig cfg;
        cfg.dpo_form = form;
        cfg.sft_weight = 0.0;
        for (int i = 0; i < 100; ++i) {
            auto instance = random_instance(rng);
            auto baseline = combined_loss(cfg, instance);
            ASSERT_TRUE(baseline.ok());

            auto shifted = instance;
            const double c = -0.01 * static_cast<double>(i % 37);
            const double per_token =
                c / static_cast<double>(shifted.chosen_policy.completion_logprobs.size());
            for (auto& lp : shifted.chosen_policy.completion_logprobs) lp += per_token;
            for (auto& lp : shifted.chosen_ref.completion_logprobs) lp += per_token;
            auto value = combined_loss(cfg, shifted);
            ASSERT_TRUE(value.ok());
            EXPECT_NEAR(value.value().total, baseline.value().total, 1e-12);
        }
    }
}

TEST(Invariants, FiniteAtExtremeMargins) {
    LossConfig cfg;
    cfg.beta = 1.0;
    cfg.sft_weight = 0.0;
    LossInstance instance;
    instance.x_len = 1;
    instance.chosen_policy = make_probs(std::vector<double>(50, -200.0), ModelTag::Policy, 1);
    instance.chosen_ref = make_probs(std::vector<double>(50, 0.0), ModelTag::Reference, 1);
    instance.rejected_policy = make_probs({0.0}, ModelTag::Policy, 1);
    instance.rejected_ref = make_probs({0.0}, ModelTag::Reference, 1);
    // margin = -1e4
    auto value = combined_loss(cfg, instance);
    ASSERT_TRUE(value.ok());
    EXPECT_TRUE(std::isfinite(value.value().total));
    EXPECT_NEAR(value.value().total, 1e4, 1e-6);

    std::swap(instance.chosen_policy, instance.rejected_policy);
    std::swap(instance.chosen_ref, instance.rejected_ref);
    // margin = +1e4
    value = combined_loss(cfg, instance);
    ASSERT_TRUE(value.ok());
    EXPECT_TRUE(std::isfinite(value.value().total));
    EXPECT_NEAR(value.value().total, 0.0, 1e-12);
}

TEST(InstanceJsonl, RoundTripAndValidation) {
    auto instance = zero_margin_instance();
    auto parsed = instance_from_json_line(instance_to_json_line(instance));
    ASSERT_TRUE(parsed.ok());
    EXPECT_EQ(parsed.value().chosen_policy.completion_logprobs,
              instance.chosen_policy.completion_logprobs);
    EXPECT_EQ(parsed.value().x_len, instance.x_len);
    EXPECT_EQ(parsed.value().chosen_ref.model_tag, ModelTag::Reference);

    auto positive = instance_from_json_line(
        R"({"x_len":1,"chosen_policy":[0.5],"chosen_ref":[-1],"rejected_policy":[-1],"rejected_ref":[-1]})");
    ASSERT_FALSE(positive.ok());
    EXPECT_EQ(positive.error().code, ErrorCode::NonFiniteInput);

    auto missing = instance_from_json_line(R"({"x_len":1,"chosen_policy":[-1]})");
    ASSERT_FALSE(missing.ok());
    EXPECT_EQ(missing.error().code, ErrorCode::JsonError);
}

}  // namespace
}  // namespace judgekit::loss
