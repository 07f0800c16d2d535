// judgekit command-line tool: curate, evaluate, refine, loss-check, templates.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "judgekit/curation.hpp"
#include "judgekit/harness.hpp"
#include "judgekit/jsonl.hpp"
#include "judgekit/llm_client.hpp"
#include "judgekit/loss.hpp"
#include "judgekit/refine.hpp"
#include "judgekit/templates.hpp"

namespace {

using namespace judgekit;

constexpr int kExitOk = 0;
constexpr int kExitPipelineError = 1;
constexpr int kExitUsageError = 2;

struct CommonOptions {
    std::string endpoint;
    std::string api_key;
    std::string cache_dir;
    std::string config_file;
    int parallelism{1};
    std::uint64_t seed{0};
    std::optional<double> rps;
    int max_attempts{4};
    long timeout_seconds{120};
};

void add_common_options(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--endpoint", opts.endpoint,
                    "chat-completions base URL (default: env JUDGE_API_BASE)");
    cmd->add_option("--cache-dir", opts.cache_dir, "response cache directory (enables caching)");
    cmd->add_option("--config", opts.config_file, "JSON config file (lowest precedence)");
    cmd->add_option("--parallelism", opts.parallelism, "max in-flight requests")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opts.seed, "seed for all randomness");
    cmd->add_option("--rps", opts.rps, "request rate limit (requests per second)");
    cmd->add_option("--max-attempts", opts.max_attempts, "retry cap per request")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--timeout", opts.timeout_seconds, "request timeout in seconds");
}

// precedence: flags > environment > config file
void apply_config_file(CommonOptions& opts) {
    if (opts.endpoint.empty()) {
        if (const char* base = std::getenv("JUDGE_API_BASE")) opts.endpoint = base;
    }
    if (opts.api_key.empty()) {
        if (const char* key = std::getenv("JUDGE_API_KEY")) opts.api_key = key;
    }
    if (opts.config_file.empty()) return;
    std::ifstream in(opts.config_file);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + opts.config_file);
    }
    nlohmann::json cfg = nlohmann::json::parse(in, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
        throw std::runtime_error("config file is not a JSON object: " + opts.config_file);
    }
    if (opts.endpoint.empty() && cfg.contains("endpoint")) {
        opts.endpoint = cfg["endpoint"].get<std::string>();
    }
    if (opts.api_key.empty() && cfg.contains("api_key")) {
        opts.api_key = cfg["api_key"].get<std::string>();
    }
    if (opts.cache_dir.empty() && cfg.contains("cache_dir")) {
        opts.cache_dir = cfg["cache_dir"].get<std::string>();
    }
}

client::ClientConfig make_client_config(const CommonOptions& opts) {
    client::ClientConfig config;
    config.base_url = opts.endpoint;
    config.api_key = opts.api_key;
    config.retry.max_attempts = opts.max_attempts;
    config.requests_per_second = opts.rps;
    config.timeout = std::chrono::seconds(opts.timeout_seconds);
    if (!opts.cache_dir.empty()) config.cache_dir = opts.cache_dir;
    return config;
}

int fail(const Error& error) {
    std::cerr << "error: " << error.describe() << "\n";
    return kExitPipelineError;
}

int fail(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kExitPipelineError;
}

Status write_file(const std::string& path, const std::string& text) {
    return jsonl::write_text(path, text);
}

// ---------------------------------------------------------------------------
// templates

int run_templates_list() {
    const auto& registry = templates::Registry::builtin();
    for (const auto& id : registry.ids()) {
        const auto* tmpl = registry.find(id);
        std::printf("%-28s task=%-20s cot=%d tie=%d verbatim=%d\n", id.c_str(),
                    to_string(tmpl->task), tmpl->emits_cot ? 1 : 0, tmpl->allows_tie ? 1 : 0,
                    tmpl->source_verbatim ? 1 : 0);
    }
    return kExitOk;
}

int run_templates_show(const std::string& id) {
    const auto* tmpl = templates::Registry::builtin().find(id);
    if (tmpl == nullptr) return fail("unknown template: " + id);
    std::cout << tmpl->body << "\n";
    return kExitOk;
}

int run_templates_render(const std::string& id, const std::vector<std::string>& field_args) {
    std::map<std::string, std::string> fields;
    for (const auto& arg : field_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) return fail("--field expects name=value, got: " + arg);
        fields[arg.substr(0, eq)] = arg.substr(eq + 1);
    }
    auto rendered = templates::Registry::builtin().render(id, fields);
    if (!rendered.ok()) return fail(rendered.error());
    std::cout << rendered.value() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// loss-check

struct LossCheckOptions {
    std::string instances_path;
    std::string output_path;
    double beta{0.1};
    double sft_weight{1.0};
    std::string dpo_form{"log-ratio"};
    bool sft_completion_only{false};
    bool grad_check{true};
    double epsilon{1e-5};
};

int run_loss_check(const LossCheckOptions& opts) {
    loss::LossConfig cfg;
    cfg.beta = opts.beta;
    cfg.sft_weight = opts.sft_weight;
    cfg.sft_completion_only = opts.sft_completion_only;
    if (opts.dpo_form == "log-ratio") {
        cfg.dpo_form = loss::DpoForm::LogRatio;
    } else if (opts.dpo_form == "literal") {
        cfg.dpo_form = loss::DpoForm::LiteralRatio;
    } else {
        return fail("--dpo-form must be log-ratio or literal");
    }

    auto instances = loss::load_instances(opts.instances_path);
    if (!instances.ok()) return fail(instances.error());

    std::string output_lines;
    double max_grad_error = 0.0;
    for (std::size_t i = 0; i < instances->size(); ++i) {
        auto breakdown = loss::combined_loss(cfg, (*instances)[i]);
        if (!breakdown.ok()) {
            return fail(Error{breakdown.error().code,
                              "instance " + std::to_string(i) + ": " + breakdown.error().message});
        }
        std::printf("instance %zu: total = %.6f  sft = %.6f  dpo = %.6f\n", i,
                    breakdown.value().total, breakdown.value().sft, breakdown.value().dpo);
        if (!opts.output_path.empty()) {
            nlohmann::json line;
            line["index"] = i;
            line["total"] = breakdown.value().total;
            line["sft"] = breakdown.value().sft;
            line["dpo"] = breakdown.value().dpo;
            output_lines += line.dump();
            output_lines += '\n';
        }
        if (opts.grad_check) {
            auto report = loss::grad_check(cfg, (*instances)[i], opts.epsilon);
            if (!report.ok()) return fail(report.error());
            max_grad_error = std::max(max_grad_error, report.value().max_relative_error);
        }
    }
    if (opts.grad_check) {
        std::printf("grad-check: max relative error %.3e over %zu instance(s)\n", max_grad_error,
                    instances->size());
    }
    if (!opts.output_path.empty()) {
        if (auto status = write_file(opts.output_path, output_lines); !status.ok()) {
            return fail(status.error());
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    CommonOptions common;
    std::string benchmark_path;
    std::string benchmark_id;
    std::string model;
    std::string template_id;
    std::string swap{"single"};
    bool no_cot{false};
    bool provider_defaults{false};
    double temperature{0.0};
    double top_p{1.0};
    int max_tokens{1024};
    std::string report_path;
    std::string outcomes_path;
};

int run_evaluate(const EvaluateOptions& opts) {
    const auto& registry = templates::Registry::builtin();
    auto records = jsonl::load_records(opts.benchmark_path, &registry);
    if (!records.ok()) return fail(records.error());

    if (opts.common.endpoint.empty()) {
        return fail("no endpoint configured (use --endpoint or JUDGE_API_BASE)");
    }
    client::LlmClient llm(make_client_config(opts.common));

    client::SamplingConfig sampling;
    sampling.temperature = opts.temperature;
    sampling.top_p = opts.top_p;
    sampling.max_tokens = opts.max_tokens;
    sampling.provider_defaults = opts.provider_defaults;

    harness::RunConfig cfg;
    cfg.benchmark_id = opts.benchmark_id.empty()
                           ? std::filesystem::path(opts.benchmark_path).stem().string()
                           : opts.benchmark_id;
    cfg.model = opts.model;
    if (!opts.template_id.empty()) cfg.template_override = opts.template_id;
    cfg.swap = opts.swap == "best-of-two" ? harness::SwapProtocol::BestOfTwo
                                          : harness::SwapProtocol::Single;
    cfg.expects_cot = !opts.no_cot;
    cfg.sampling = sampling;
    cfg.parallelism = opts.common.parallelism;

    harness::ApiJudge judge(llm, opts.model, sampling);
    auto run = harness::run_benchmark(records.value(), cfg, judge, registry);
    if (!run.ok()) return fail(run.error());

    const std::string report_json = harness::report_to_json(run.value().report);
    std::cout << report_json << "\n";
    if (!opts.report_path.empty()) {
        if (auto status = write_file(opts.report_path, report_json + "\n"); !status.ok()) {
            return fail(status.error());
        }
    }
    if (!opts.outcomes_path.empty()) {
        std::string lines;
        for (const auto& outcome : run.value().pass1) {
            lines += harness::outcome_to_json_line(outcome);
            lines += '\n';
        }
        for (const auto& outcome : run.value().pass2) {
            lines += harness::outcome_to_json_line(outcome);
            lines += '\n';
        }
        if (auto status = write_file(opts.outcomes_path, lines); !status.ok()) {
            return fail(status.error());
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// curate

struct CurateOptions {
    CommonOptions common;
    std::string records_path;
    std::string teacher_model;
    std::string weak_model;
    int n_samples{4};
    double teacher_temperature{1.0};
    std::vector<double> ratio{0.7, 0.15, 0.15};
    std::string pairing{"one-per-record"};
    std::string output_path{"pairs.jsonl"};
    std::string report_path;
};

int run_curate(const CurateOptions& opts) {
    const auto& registry = templates::Registry::builtin();
    auto records = jsonl::load_records(opts.records_path, &registry);
    if (!records.ok()) return fail(records.error());

    if (opts.common.endpoint.empty()) {
        return fail("no endpoint configured (use --endpoint or JUDGE_API_BASE)");
    }
    if (opts.ratio.size() != 3) return fail("--ratio expects three comma-separated values");

    client::LlmClient llm(make_client_config(opts.common));
    curation::ModelHandle teacher{&llm, opts.teacher_model};
    curation::ModelHandle weak{&llm, opts.weak_model.empty() ? opts.teacher_model : opts.weak_model};

    curation::CurationConfig cfg;
    cfg.n_samples = opts.n_samples;
    cfg.teacher_temperature = opts.teacher_temperature;
    cfg.pairing = opts.pairing == "all-pairs" ? curation::PairingPolicy::AllPairs
                                              : curation::PairingPolicy::OnePerRecord;
    cfg.ratio = {opts.ratio[0], opts.ratio[1], opts.ratio[2]};
    cfg.seed = opts.common.seed;
    cfg.parallelism = opts.common.parallelism;

    auto output = curation::curate(records.value(), teacher, weak, cfg, registry);
    if (!output.ok()) return fail(output.error());

    if (auto status = jsonl::save_pairs(opts.output_path, output.value().corpus); !status.ok()) {
        return fail(status.error());
    }
    const std::string report_json = curation::report_to_json(output.value().report);
    std::cout << report_json << "\n";
    if (!opts.report_path.empty()) {
        if (auto status = write_file(opts.report_path, report_json + "\n"); !status.ok()) {
            return fail(status.error());
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// refine

struct RefineOptions {
    CommonOptions common;
    std::string inputs_path;
    std::string judge_model;
    std::string refiner_model;
    std::string mode{"score"};
    std::optional<int> refine_threshold;
    std::string output_path{"refine_pairs.jsonl"};
    std::string report_path;
};

int run_refine(const RefineOptions& opts) {
    const auto& registry = templates::Registry::builtin();
    auto inputs = refine::load_inputs(opts.inputs_path);
    if (!inputs.ok()) return fail(inputs.error());

    if (opts.common.endpoint.empty()) {
        return fail("no endpoint configured (use --endpoint or JUDGE_API_BASE)");
    }
    client::LlmClient llm(make_client_config(opts.common));
    refine::ModelHandle judge{&llm, opts.judge_model};
    refine::ModelHandle refiner{&llm,
                                opts.refiner_model.empty() ? opts.judge_model : opts.refiner_model};

    refine::RefineConfig cfg;
    if (opts.mode == "score") {
        cfg.mode = refine::PairMode::ScorePair;
    } else if (opts.mode == "refine") {
        cfg.mode = refine::PairMode::RefinePair;
    } else if (opts.mode == "both") {
        cfg.mode = refine::PairMode::Both;
    } else {
        return fail("--mode must be score, refine or both");
    }
    cfg.refine_threshold = opts.refine_threshold;
    cfg.parallelism = opts.common.parallelism;

    auto output = refine::build_downstream_pairs(inputs.value(), judge, refiner, cfg, registry);
    if (!output.ok()) return fail(output.error());

    if (auto status = jsonl::save_pairs(opts.output_path, output.value().pairs); !status.ok()) {
        return fail(status.error());
    }
    const std::string report_json = refine::report_to_json(output.value().report);
    std::cout << report_json << "\n";
    if (!opts.report_path.empty()) {
        if (auto status = write_file(opts.report_path, report_json + "\n"); !status.ok()) {
            return fail(status.error());
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"judgekit: preference-pair curation, judge evaluation and refinement pipelines"};
    app.require_subcommand(1);

    // templates
    auto* templates_cmd = app.add_subcommand("templates", "inspect the prompt template registry");
    templates_cmd->require_subcommand(1);
    templates_cmd->add_subcommand("list", "list registered templates");
    std::string show_id;
    auto* show_cmd = templates_cmd->add_subcommand("show", "print a template body");
    show_cmd->add_option("id", show_id, "template id")->required();
    std::string render_id;
    std::vector<std::string> render_fields;
    auto* render_cmd = templates_cmd->add_subcommand("render", "render a template");
    render_cmd->add_option("id", render_id, "template id")->required();
    render_cmd->add_option("--field", render_fields, "placeholder value as name=value");

    // loss-check
    LossCheckOptions loss_opts;
    auto* loss_cmd = app.add_subcommand("loss-check", "evaluate the reference training objective");
    loss_cmd->add_option("--instances", loss_opts.instances_path, "instances JSONL")->required();
    loss_cmd->add_option("--output", loss_opts.output_path, "write per-instance losses as JSONL");
    loss_cmd->add_option("--beta", loss_opts.beta, "DPO beta (default 0.1)");
    loss_cmd->add_option("--sft-weight", loss_opts.sft_weight, "SFT term weight (default 1.0)");
    loss_cmd->add_option("--dpo-form", loss_opts.dpo_form, "log-ratio (default) or literal");
    loss_cmd->add_flag("--sft-completion-only", loss_opts.sft_completion_only,
                       "normalize SFT by completion length only");
    loss_cmd->add_flag("!--no-grad-check", loss_opts.grad_check, "skip the gradient check");
    loss_cmd->add_option("--epsilon", loss_opts.epsilon, "finite-difference step (default 1e-5)");

    // evaluate
    EvaluateOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "run a judge over a benchmark");
    eval_cmd->add_option("--benchmark", eval_opts.benchmark_path, "benchmark records JSONL")
        ->required();
    eval_cmd->add_option("--benchmark-id", eval_opts.benchmark_id, "report id (default: file stem)");
    eval_cmd->add_option("--model", eval_opts.model, "judge model id")->required();
    eval_cmd->add_option("--template", eval_opts.template_id, "template id override");
    eval_cmd->add_option("--swap", eval_opts.swap, "single or best-of-two")
        ->check(CLI::IsMember({"single", "best-of-two"}));
    eval_cmd->add_flag("--no-cot", eval_opts.no_cot, "use the no-CoT template variants");
    eval_cmd->add_flag("--provider-defaults", eval_opts.provider_defaults,
                       "omit sampling parameters from requests");
    eval_cmd->add_option("--temperature", eval_opts.temperature, "sampling temperature (default 0)");
    eval_cmd->add_option("--top-p", eval_opts.top_p, "top-p (default 1)");
    eval_cmd->add_option("--max-tokens", eval_opts.max_tokens, "output token cap (default 1024)");
    eval_cmd->add_option("--report", eval_opts.report_path, "write the metric report JSON here");
    eval_cmd->add_option("--outcomes", eval_opts.outcomes_path, "write per-record outcomes JSONL");
    add_common_options(eval_cmd, eval_opts.common);

    // curate
    CurateOptions curate_opts;
    auto* curate_cmd = app.add_subcommand("curate", "build the three preference datasets");
    curate_cmd->add_option("--records", curate_opts.records_path, "annotated records JSONL")
        ->required();
    curate_cmd->add_option("--teacher-model", curate_opts.teacher_model, "teacher model id")
        ->required();
    curate_cmd->add_option("--weak-model", curate_opts.weak_model,
                           "weak model id for response deduction (default: teacher)");
    curate_cmd->add_option("--n-samples", curate_opts.n_samples,
                           "teacher samples per record (default 4)");
    curate_cmd->add_option("--teacher-temperature", curate_opts.teacher_temperature,
                           "teacher sampling temperature (default 1.0)");
    curate_cmd->add_option("--ratio", curate_opts.ratio, "CoT,Std,Ded mixing ratio")
        ->delimiter(',')
        ->expected(3);
    curate_cmd->add_option("--pairing", curate_opts.pairing, "one-per-record or all-pairs")
        ->check(CLI::IsMember({"one-per-record", "all-pairs"}));
    curate_cmd->add_option("--output", curate_opts.output_path, "trainer pair JSONL output");
    curate_cmd->add_option("--report", curate_opts.report_path, "curation report JSON");
    add_common_options(curate_cmd, curate_opts.common);

    // refine
    RefineOptions refine_opts;
    auto* refine_cmd = app.add_subcommand("refine", "judge-as-reward scoring and refinement");
    refine_cmd->add_option("--inputs", refine_opts.inputs_path, "responses JSONL")->required();
    refine_cmd->add_option("--judge-model", refine_opts.judge_model, "judge model id")->required();
    refine_cmd->add_option("--refiner-model", refine_opts.refiner_model,
                           "refiner model id (default: judge)");
    refine_cmd->add_option("--mode", refine_opts.mode, "score, refine or both")
        ->check(CLI::IsMember({"score", "refine", "both"}));
    refine_cmd->add_option("--refine-threshold", refine_opts.refine_threshold,
                           "refine every response scoring <= threshold (default: lowest only)");
    refine_cmd->add_option("--output", refine_opts.output_path, "trainer pair JSONL output");
    refine_cmd->add_option("--report", refine_opts.report_path, "scoring report JSON");
    add_common_options(refine_cmd, refine_opts.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return kExitUsageError;
    }

    try {
        if (templates_cmd->parsed()) {
            if (templates_cmd->get_subcommand_ptr("list")->parsed()) return run_templates_list();
            if (show_cmd->parsed()) return run_templates_show(show_id);
            if (render_cmd->parsed()) return run_templates_render(render_id, render_fields);
            return kExitUsageError;
        }
        if (loss_cmd->parsed()) return run_loss_check(loss_opts);
        if (eval_cmd->parsed()) {
            apply_config_file(eval_opts.common);
            return run_evaluate(eval_opts);
        }
        if (curate_cmd->parsed()) {
            apply_config_file(curate_opts.common);
            return run_curate(curate_opts);
        }
        if (refine_cmd->parsed()) {
            apply_config_file(refine_opts.common);
            return run_refine(refine_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipelineError;
    }
    return kExitUsageError;
}
