#include <benchmark/benchmark.h>

#include "judgekit/templates.hpp"

namespace {

using judgekit::templates::Registry;

void BM_RenderRewardBench(benchmark::State& state) {
    const auto& registry = Registry::builtin();
    const std::map<std::string, std::string> fields = {
        {"input", std::string(200, 'i')},
        {"output_1", std::string(800, 'a')},
        {"output_2", std::string(800, 'b')},
    };
    for (auto _ : state) {
        auto rendered = registry.render("rewardbench", fields);
        benchmark::DoNotOptimize(rendered.value());
    }
}
BENCHMARK(BM_RenderRewardBench);

void BM_RegistryLookup(benchmark::State& state) {
    const auto& registry = Registry::builtin();
    for (auto _ : state) {
        benchmark::DoNotOptimize(registry.find("single_rating_no_cot"));
    }
}
BENCHMARK(BM_RegistryLookup);

}  // namespace
