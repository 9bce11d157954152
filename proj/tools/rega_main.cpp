#include "rega/config.hpp"
#include "rega/corpus.hpp"
#include "rega/defaults.hpp"
#include "rega/distill.hpp"
#include "rega/error.hpp"
#include "rega/eval.hpp"
#include "rega/manifest.hpp"
#include "rega/strategy.hpp"
#include "rega/toy.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <json.hpp>

namespace {

using nlohmann::json;
using namespace rega;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

// --------------------------------------------------------------------------
// distill
// --------------------------------------------------------------------------

struct DistillArgs {
    std::string config_path;
    std::string instructions;
    std::string endpoint;
    std::string model;
    double temperature = 0.7;
    double top_p = 0.95;
    int max_new_tokens = 1024;
    int concurrency = 1;
    int max_attempts = 3;
    std::string checkpoint;
    std::string out;
    std::string api_key_env = "OPENAI_API_KEY";
    bool mock = false;
    std::string mock_prefix = "OK:";
    std::uint64_t mock_unreachable_after = UINT64_MAX;
};

int run_distill(const DistillArgs& args) {
    PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = PipelineConfig::load(args.config_path);

    if (!std::filesystem::exists(args.instructions)) {
        throw ValidationError("instructions file '" + args.instructions + "' does not exist");
    }
    const std::string endpoint = !args.endpoint.empty() ? args.endpoint : cfg.endpoint.url;
    if (endpoint.empty() && !args.mock) {
        throw ValidationError("either --endpoint or --mock is required");
    }

    DistillJob job;
    job.instructions = load_instruction_set(args.instructions);
    job.params.model_name = !args.model.empty() ? args.model : cfg.generation.model_name;
    job.params.temperature = args.temperature;
    job.params.top_p = args.top_p;
    job.params.max_new_tokens = args.max_new_tokens;
    job.concurrency_limit = args.concurrency;
    job.checkpoint_path = args.checkpoint;
    job.retry.max_attempts = args.max_attempts;
    job.validate();

    std::unique_ptr<GenerationClient> client;
    if (args.mock) {
        auto mock = std::make_unique<MockGenerationClient>(args.mock_prefix);
        if (args.mock_unreachable_after != UINT64_MAX) {
            mock->set_unreachable_after(args.mock_unreachable_after);
        }
        client = std::move(mock);
    } else {
        client = std::make_unique<HttpGenerationClient>(endpoint, args.api_key_env,
                                                        cfg.endpoint.timeout_seconds);
    }

    const auto outcome = distill(job, *client);

    json report;
    report["succeeded"] = outcome.report.succeeded;
    report["failed"] = outcome.report.failed;
    report["skipped"] = outcome.report.skipped;
    report["backend_calls"] = outcome.report.backend_calls;
    report["wall_time_s"] = outcome.report.wall_time_s;
    report["halted"] = outcome.halted;
    if (outcome.halted) report["halt_reason"] = outcome.halt_reason;
    std::cout << report.dump(2) << '\n';

    if (outcome.halted) {
        std::cerr << "distill halted: " << outcome.halt_reason
                  << " (checkpoint preserved at " << args.checkpoint << ")\n";
        return kExitRuntime;
    }
    write_dataset(outcome.dataset, args.out);
    write_manifest({args.out}, std::filesystem::path(args.out).string() + ".manifest.json");
    return kExitOk;
}

// --------------------------------------------------------------------------
// compile
// --------------------------------------------------------------------------

struct CompileArgs {
    std::string config_path;
    std::string strategy = "ft";
    std::vector<std::string> domains;
    std::string general;
    std::string prompts;
    double mixing_ratio = -1.0;
    std::uint64_t seed = UINT64_MAX;
    std::string out;
    int adapter_rank = -1;
    int adapter_alpha = -1;
    int batch_size = -1;
    int max_epochs = -1;
    int eval_checkpoint_epoch = -1;
};

std::vector<std::filesystem::path> expand_domain_inputs(
    const std::vector<std::string>& inputs) {
    std::vector<std::filesystem::path> files;
    for (const auto& item : inputs) {
        std::filesystem::path p(item);
        if (std::filesystem::is_directory(p)) {
            std::vector<std::filesystem::path> found;
            for (const auto& entry : std::filesystem::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
                    found.push_back(entry.path());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

int run_compile(const CompileArgs& args) {
    PipelineConfig cfg;
    if (!args.config_path.empty()) {
        cfg = PipelineConfig::load(args.config_path);
        cfg.validate_paths();
    }

    CorpusSpec spec;
    spec.strategy = strategy_from_string(args.strategy);
    spec.seed = args.seed != UINT64_MAX ? args.seed : cfg.seed;

    // Flags win over config.
    std::vector<std::filesystem::path> domain_files = expand_domain_inputs(args.domains);
    if (domain_files.empty()) {
        for (const auto& [name, entry] : cfg.domains) domain_files.push_back(entry.train_path);
    }
    if (domain_files.empty()) {
        throw ValidationError("no domain datasets given (--domains or config)");
    }
    for (const auto& f : domain_files) {
        if (!std::filesystem::exists(f)) {
            throw ValidationError("domain dataset '" + f.string() + "' does not exist");
        }
    }

    std::optional<std::filesystem::path> general_path;
    if (!args.general.empty()) {
        general_path = args.general;
    } else if (cfg.general_path) {
        general_path = cfg.general_path;
    }
    const bool needs_general =
        spec.strategy == Strategy::ftsd || spec.strategy == Strategy::rega;
    if (needs_general && !general_path) {
        throw ValidationError(to_string(spec.strategy) +
                              " requires --general <file> (the self-distilled set)");
    }
    if (general_path && !std::filesystem::exists(*general_path)) {
        throw ValidationError("general dataset '" + general_path->string() +
                              "' does not exist");
    }

    const bool needs_prompts =
        spec.strategy == Strategy::ftrp || spec.strategy == Strategy::rega;
    if (!args.prompts.empty()) {
        spec.prompts = load_prompts_file(args.prompts);
    } else if (cfg.prompts) {
        spec.prompts = cfg.prompts;
    } else if (needs_prompts) {
        spec.prompts = default_role_prompts();
    }

    if (spec.strategy == Strategy::rega) {
        double r = args.mixing_ratio >= 0.0
                       ? args.mixing_ratio
                       : cfg.mixing_ratio.value_or(-1.0);
        if (r < 0.0) throw ValidationError("rega requires --mixing-ratio");
        spec.mixing_ratio = MixingRatio{r};
        spec.mixing_ratio->validate();
    }

    for (const auto& f : domain_files) spec.domains.push_back(load_dataset(f));
    if (general_path) spec.general = load_dataset(*general_path, std::string("general"));
    spec.validate();

    auto corpus = build_corpus(spec);
    const auto stats = corpus_stats(corpus.records);

    const std::filesystem::path out_path(args.out);
    write_corpus(corpus, out_path);

    RecipeOverrides overrides;
    if (args.adapter_rank > 0) overrides.adapter_rank = args.adapter_rank;
    if (args.adapter_alpha > 0) overrides.adapter_alpha = args.adapter_alpha;
    if (args.batch_size > 0) overrides.batch_size = args.batch_size;
    if (args.max_epochs > 0) overrides.max_epochs = args.max_epochs;
    if (args.eval_checkpoint_epoch > 0) {
        overrides.eval_checkpoint_epoch = args.eval_checkpoint_epoch;
    }
    const auto recipe = export_recipe(corpus, overrides);

    std::filesystem::path recipe_path = out_path;
    recipe_path += ".recipe.json";
    std::filesystem::path stats_path = out_path;
    stats_path += ".stats.json";
    std::filesystem::path manifest_path = out_path;
    manifest_path += ".manifest.json";
    write_recipe(recipe, recipe_path);
    write_stats(stats, spec.strategy, spec.seed, stats_path);
    write_manifest({out_path, recipe_path, stats_path}, manifest_path);

    json summary;
    summary["strategy"] = to_string(spec.strategy);
    summary["records"] = corpus.records.size();
    summary["duplicates"] = stats.duplicates;
    json comp = json::object();
    for (const auto& [domain, kinds] : stats.composition) {
        for (const auto& [kind, count] : kinds) comp[domain][kind] = count;
    }
    summary["composition"] = comp;
    summary["out"] = out_path.string();
    std::cout << summary.dump(2) << '\n';
    return kExitOk;
}

// --------------------------------------------------------------------------
// eval
// --------------------------------------------------------------------------

struct EvalArgs {
    std::string predictions;
    std::string registry;
    std::string out;
    std::string csv;
    bool normalize = false;
    std::string normalizer = "default";
    std::string judge_endpoint;
    bool judge_mock = false;
    std::string judge_model = "gpt-4-0613";
    std::string api_key_env = "OPENAI_API_KEY";
};

int run_eval(const EvalArgs& args) {
    if (!std::filesystem::exists(args.predictions)) {
        throw ValidationError("predictions file '" + args.predictions + "' does not exist");
    }
    if (!std::filesystem::exists(args.registry)) {
        throw ValidationError("registry file '" + args.registry + "' does not exist");
    }
    const auto registry = DatasetRegistry::load(args.registry);
    const auto predictions = load_predictions(args.predictions);

    EvaluateOptions options;
    options.normalize_matrix = args.normalize;
    if (args.normalizer == "exact") {
        options.normalizer = [](const std::string& s) { return s; };
    } else if (args.normalizer != "default") {
        throw ValidationError("unknown normalizer '" + args.normalizer + "'");
    }

    std::unique_ptr<GenerationClient> judge_client;
    if (args.judge_mock) {
        judge_client = std::make_unique<MockGenerationClient>(
            "{\"分析\": \"mock\", \"助手\": {\"评分\": 7}}//");
    } else if (!args.judge_endpoint.empty()) {
        judge_client = std::make_unique<HttpGenerationClient>(args.judge_endpoint,
                                                              args.api_key_env);
    }
    if (judge_client) {
        options.judge_client = judge_client.get();
        options.judge.judge_model = args.judge_model;
    }

    const auto report = evaluate_run(predictions, registry, options);

    std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + args.out + "'");
    out << report.to_json_string(2) << '\n';
    out.close();

    std::vector<std::filesystem::path> outputs{args.out};
    if (!args.csv.empty()) {
        write_matrix_csv(report.matrix, args.csv);
        outputs.push_back(args.csv);
    }
    write_manifest(outputs, std::filesystem::path(args.out).string() + ".manifest.json");

    std::cout << report.to_json_string(2) << '\n';
    return kExitOk;
}

// --------------------------------------------------------------------------
// toy-demo / toy-sweep
// --------------------------------------------------------------------------

struct ToyCommonArgs {
    std::uint64_t seed_base = 1;
    int seeds = 10;
    std::size_t pretrain = 2000;
    std::size_t replay = 3000;
    std::size_t per_domain = 1000;
    std::size_t eval_general = 1000;
    std::size_t eval_domain = 1000;
    double learning_rate = 0.1;
    int batch_size = 16;
    int epochs = 2;
};

toy::ToySizes sizes_of(const ToyCommonArgs& a) {
    return {a.pretrain, a.replay, a.per_domain, a.eval_general, a.eval_domain};
}

toy::ToyHyperparams hp_of(const ToyCommonArgs& a) {
    toy::ToyHyperparams hp;
    hp.learning_rate = a.learning_rate;
    hp.batch_size = a.batch_size;
    hp.epochs = a.epochs;
    return hp;
}

std::vector<std::uint64_t> seed_list(const ToyCommonArgs& a) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < a.seeds; ++i) seeds.push_back(a.seed_base + i);
    return seeds;
}

std::vector<Strategy> parse_strategies(const std::string& csv) {
    std::vector<Strategy> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(strategy_from_string(item));
    }
    if (out.empty()) throw ValidationError("no strategies given");
    return out;
}

struct ToyDemoArgs {
    ToyCommonArgs common;
    std::string strategies = "ft,ftsd,ftrp,rega";
    double mixing_ratio = 0.1;
    std::string out;
};

int run_toy_demo(const ToyDemoArgs& args) {
    const auto strategies = parse_strategies(args.strategies);
    const auto sizes = sizes_of(args.common);
    const auto hp = hp_of(args.common);
    const auto seeds = seed_list(args.common);

    json runs = json::array();
    for (const auto strategy : strategies) {
        for (const auto seed : seeds) {
            const auto world = toy::ToyWorld::make_default(seed);
            const auto rep =
                toy::run_experiment(strategy, world, args.mixing_ratio, sizes, hp, seed);
            json r;
            r["strategy"] = rep.strategy;
            r["mixing_ratio"] = rep.mixing_ratio;
            r["seed"] = rep.seed;
            r["base_general_acc"] = rep.base_general_acc;
            r["general_acc"] = rep.general_acc;
            r["domain_acc"] = rep.domain_acc;
            r["domain_mean_acc"] = rep.domain_mean_acc;
            runs.push_back(std::move(r));
        }
    }

    json doc;
    doc["config"] = {{"strategies", args.strategies},
                     {"mixing_ratio", args.mixing_ratio},
                     {"seeds", args.common.seeds},
                     {"seed_base", args.common.seed_base},
                     {"sizes",
                      {{"pretrain", sizes.pretrain},
                       {"replay", sizes.replay},
                       {"per_domain", sizes.per_domain},
                       {"eval_general", sizes.eval_general},
                       {"eval_domain", sizes.eval_domain}}},
                     {"hyperparams",
                      {{"learning_rate", hp.learning_rate},
                       {"batch_size", hp.batch_size},
                       {"epochs", hp.epochs}}}};
    doc["runs"] = runs;

    std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + args.out + "'");
    out << doc.dump(2) << '\n';
    out.close();
    write_manifest({args.out}, std::filesystem::path(args.out).string() + ".manifest.json");

    std::cout << "wrote " << runs.size() << " runs to " << args.out << '\n';
    return kExitOk;
}

struct ToySweepArgs {
    ToyCommonArgs common;
    std::string strategies = "rega,ft";
    std::string grid = "0.01,0.05,0.1,0.2,0.3,0.5";
    std::string out;
};

int run_toy_sweep(const ToySweepArgs& args) {
    std::vector<double> grid;
    {
        std::stringstream ss(args.grid);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) grid.push_back(std::stod(item));
        }
    }
    const auto rows = toy::sweep_mixing_ratio(grid, parse_strategies(args.strategies),
                                              sizes_of(args.common), hp_of(args.common),
                                              seed_list(args.common));
    toy::write_sweep_csv(rows, args.out);
    write_manifest({args.out}, std::filesystem::path(args.out).string() + ".manifest.json");
    std::cout << "wrote " << rows.size() << " rows to " << args.out << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"REGA multi-domain adaptation pipeline: corpus compilation, "
                 "self-distillation, evaluation, and the desk-scale lab"};
    app.require_subcommand(1);

    DistillArgs distill_args;
    auto* distill_cmd =
        app.add_subcommand("distill", "Generate the general exemplar set D_g");
    distill_cmd->add_option("--config", distill_args.config_path, "Pipeline config JSON");
    distill_cmd->add_option("--instructions", distill_args.instructions,
                            "Instruction JSONL file")->required();
    distill_cmd->add_option("--endpoint", distill_args.endpoint,
                            "Chat-completions endpoint URL");
    distill_cmd->add_option("--model", distill_args.model, "Model name");
    distill_cmd->add_option("--temperature", distill_args.temperature, "Sampling temperature");
    distill_cmd->add_option("--top-p", distill_args.top_p, "Nucleus sampling p");
    distill_cmd->add_option("--max-new-tokens", distill_args.max_new_tokens,
                            "Generation length cap");
    distill_cmd->add_option("--concurrency", distill_args.concurrency,
                            "Requests in flight");
    distill_cmd->add_option("--max-attempts", distill_args.max_attempts,
                            "Attempts per item");
    distill_cmd->add_option("--checkpoint", distill_args.checkpoint,
                            "Resumable checkpoint JSONL")->required();
    distill_cmd->add_option("--out", distill_args.out, "Output dataset JSONL")->required();
    distill_cmd->add_option("--api-key-env", distill_args.api_key_env,
                            "Environment variable holding the API key");
    distill_cmd->add_flag("--mock", distill_args.mock, "Use the offline mock backend");
    distill_cmd->add_option("--mock-prefix", distill_args.mock_prefix,
                            "Mock response prefix");
    distill_cmd->add_option("--mock-unreachable-after", distill_args.mock_unreachable_after,
                            "Mock fault injection: endpoint dies after N calls");

    CompileArgs compile_args;
    auto* compile_cmd =
        app.add_subcommand("compile", "Build a training corpus for a strategy");
    compile_cmd->add_option("--config", compile_args.config_path, "Pipeline config JSON");
    compile_cmd->add_option("--strategy", compile_args.strategy, "ft|ftsd|ftrp|rega")
        ->required();
    compile_cmd->add_option("--domains", compile_args.domains,
                            "Domain dataset files or a directory of .jsonl files");
    compile_cmd->add_option("--general", compile_args.general,
                            "Self-distilled general dataset (D_g)");
    compile_cmd->add_option("--prompts", compile_args.prompts, "Role prompt config JSON");
    compile_cmd->add_option("--mixing-ratio", compile_args.mixing_ratio,
                            "Fraction of each domain reused under the central prompt");
    compile_cmd->add_option("--seed", compile_args.seed, "Corpus build seed");
    compile_cmd->add_option("--out", compile_args.out, "Output corpus JSONL")->required();
    compile_cmd->add_option("--adapter-rank", compile_args.adapter_rank, "Recipe override");
    compile_cmd->add_option("--adapter-alpha", compile_args.adapter_alpha,
                            "Recipe override");
    compile_cmd->add_option("--batch-size", compile_args.batch_size, "Recipe override");
    compile_cmd->add_option("--max-epochs", compile_args.max_epochs, "Recipe override");
    compile_cmd->add_option("--eval-checkpoint-epoch", compile_args.eval_checkpoint_epoch,
                            "Recipe override");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Score a prediction file");
    eval_cmd->add_option("--predictions", eval_args.predictions, "Prediction JSONL")
        ->required();
    eval_cmd->add_option("--registry", eval_args.registry, "Dataset registry JSON")
        ->required();
    eval_cmd->add_option("--out", eval_args.out, "Report JSON path")->required();
    eval_cmd->add_option("--csv", eval_args.csv, "Optional score matrix CSV");
    eval_cmd->add_flag("--normalize", eval_args.normalize,
                       "Column-max normalize the score matrix");
    eval_cmd->add_option("--normalizer", eval_args.normalizer,
                         "Answer normalizer for accuracy: default|exact");
    eval_cmd->add_option("--judge-endpoint", eval_args.judge_endpoint,
                         "Judge model endpoint for judge-metric datasets");
    eval_cmd->add_flag("--judge-mock", eval_args.judge_mock,
                       "Use the offline mock judge");
    eval_cmd->add_option("--judge-model", eval_args.judge_model, "Judge model name");
    eval_cmd->add_option("--api-key-env", eval_args.api_key_env,
                         "Environment variable holding the API key");

    auto add_toy_common = [](CLI::App* cmd, ToyCommonArgs& a) {
        cmd->add_option("--seeds", a.seeds, "Number of seeds");
        cmd->add_option("--seed-base", a.seed_base, "First seed value");
        cmd->add_option("--pretrain", a.pretrain, "General pretraining set size");
        cmd->add_option("--replay", a.replay, "Distilled replay set size");
        cmd->add_option("--per-domain", a.per_domain, "Per-domain training set size");
        cmd->add_option("--eval-general", a.eval_general, "General eval set size");
        cmd->add_option("--eval-domain", a.eval_domain, "Per-domain eval set size");
        cmd->add_option("--lr", a.learning_rate, "SGD learning rate");
        cmd->add_option("--batch", a.batch_size, "SGD batch size");
        cmd->add_option("--epochs", a.epochs, "SGD epochs");
    };

    ToyDemoArgs demo_args;
    auto* demo_cmd =
        app.add_subcommand("toy-demo", "Run the desk-scale strategy comparison");
    demo_cmd->add_option("--strategies", demo_args.strategies, "Comma list of strategies");
    demo_cmd->add_option("--mixing-ratio", demo_args.mixing_ratio, "REGA mixing ratio");
    demo_cmd->add_option("--out", demo_args.out, "Report JSON path")->required();
    add_toy_common(demo_cmd, demo_args.common);

    ToySweepArgs sweep_args;
    auto* sweep_cmd =
        app.add_subcommand("toy-sweep", "Sweep the REGA mixing ratio");
    sweep_cmd->add_option("--grid", sweep_args.grid, "Comma list of mixing ratios");
    sweep_cmd->add_option("--strategies", sweep_args.strategies, "Comma list of strategies");
    sweep_cmd->add_option("--out", sweep_args.out, "Sweep CSV path")->required();
    sweep_cmd->add_option("--seeds", sweep_args.common.seeds, "Number of seeds");
    sweep_cmd->add_option("--seed-base", sweep_args.common.seed_base, "First seed value");
    sweep_cmd->add_option("--pretrain", sweep_args.common.pretrain, "Pretraining set size");
    sweep_cmd->add_option("--replay", sweep_args.common.replay, "Replay set size");
    sweep_cmd->add_option("--per-domain", sweep_args.common.per_domain,
                          "Per-domain training set size");
    sweep_cmd->add_option("--eval-general", sweep_args.common.eval_general,
                          "General eval set size");
    sweep_cmd->add_option("--eval-domain", sweep_args.common.eval_domain,
                          "Per-domain eval set size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (distill_cmd->parsed()) return run_distill(distill_args);
        if (compile_cmd->parsed()) return run_compile(compile_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (demo_cmd->parsed()) return run_toy_demo(demo_args);
        if (sweep_cmd->parsed()) return run_toy_sweep(sweep_args);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitValidation;
}
