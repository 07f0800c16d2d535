#include <benchmark/benchmark.h>

#include <random>

#include "judgekit/loss.hpp"

namespace {

using namespace judgekit::loss;

LossInstance make_instance(int tokens) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> logprob(-3.0, -1e-3);
    auto draw = [&](ModelTag tag) {
        TokenLogProbs t;
        t.prompt_len = 32;
        t.model_tag = tag;
        for (int i = 0; i < tokens; ++i) t.completion_logprobs.push_back(logprob(rng));
        return t;
    };
    LossInstance instance;
    instance.x_len = 32;
    instance.chosen_policy = draw(ModelTag::Policy);
    instance.chosen_ref = draw(ModelTag::Reference);
    instance.rejected_policy = draw(ModelTag::Policy);
    instance.rejected_ref = draw(ModelTag::Reference);
    return instance;
}

void BM_CombinedLoss(benchmark::State& state) {
    const auto instance = make_instance(static_cast<int>(state.range(0)));
    const LossConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(combined_loss(cfg, instance).value());
    }
}
BENCHMARK(BM_CombinedLoss)->Arg(64)->Arg(1024);

void BM_GradCheck(benchmark::State& state) {
    const auto instance = make_instance(32);
    const LossConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_check(cfg, instance, 1e-5).value());
    }
}
BENCHMARK(BM_GradCheck);

}  // namespace

BENCHMARK_MAIN();
