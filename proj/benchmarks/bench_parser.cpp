#include <benchmark/benchmark.h>

#include "judgekit/parser.hpp"

namespace {

using namespace judgekit;

void BM_ParseJudgeOutput(benchmark::State& state) {
    const std::string reply = "**Reasoning:** " + std::string(1500, 'x') +
                              " the second response is more precise.\n\n**Result:** B";
    for (auto _ : state) {
        auto out = parser::parse_judge_output(reply, TaskKind::PairwiseComparison, false, true);
        benchmark::DoNotOptimize(out.value());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(reply.size()));
}
BENCHMARK(BM_ParseJudgeOutput);

void BM_ParseDeductionPairwise(benchmark::State& state) {
    const std::string reply = "**Response A:** " + std::string(700, 'a') +
                              "\n\n**Response B:** " + std::string(700, 'b');
    for (auto _ : state) {
        auto out = parser::parse_deduction(reply, TaskKind::PairwiseComparison);
        benchmark::DoNotOptimize(out.value());
    }
}
BENCHMARK(BM_ParseDeductionPairwise);

}  // namespace
