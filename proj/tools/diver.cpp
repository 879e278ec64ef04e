// Command-line front door: corpus runs, fusion training, evaluation, and
// hyperparameter sweeps. Every verb is a thin adapter over the library; all
// logic stays headless and testable.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diver/config.hpp"
#include "diver/engine.hpp"
#include "diver/fusion.hpp"
#include "diver/harness.hpp"
#include "diver/http_providers.hpp"
#include "diver/mock_providers.hpp"
#include "diver/trace_io.hpp"

namespace fs = std::filesystem;
using namespace diver;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProviderBudget = 3;

struct CommonOptions {
    std::string corpus;
    std::string config_file;
    std::string mock_fixtures;
    std::string providers_file;
    std::string prompts_dir = std::string(DIVER_ASSETS_DIR) + "/prompts";
    std::string fusion_params_file;
    std::string judge_params_file;
    int jobs = 1;
    // optional config overrides
    std::optional<double> beta, gamma, temperature;
    std::optional<int> tau, max_claims, max_rollbacks;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool needs_corpus = true) {
    if (needs_corpus) cmd->add_option("--corpus", opt.corpus, "JSON-lines corpus file")->required();
    cmd->add_option("--config", opt.config_file, "key=value pipeline config file");
    cmd->add_option("--mock-fixtures", opt.mock_fixtures, "fixture directory; switches to mock providers");
    cmd->add_option("--providers", opt.providers_file, "JSON endpoint map; switches to HTTP providers");
    cmd->add_option("--prompts", opt.prompts_dir, "prompt template directory");
    cmd->add_option("--fusion-params", opt.fusion_params_file, "trained fusion head (JSON)");
    cmd->add_option("--judge-params", opt.judge_params_file, "judge parameters (JSON)");
    cmd->add_option("--jobs", opt.jobs, "parallel samples")->check(CLI::PositiveNumber);
    cmd->add_option("--beta", opt.beta, "override: alignment threshold");
    cmd->add_option("--tau", opt.tau, "override: max correction rounds");
    cmd->add_option("--gamma", opt.gamma, "override: refutation threshold");
    cmd->add_option("--temperature", opt.temperature, "override: LLM temperature");
    cmd->add_option("--max-claims", opt.max_claims, "override: claim cap");
    cmd->add_option("--max-rollbacks", opt.max_rollbacks, "override: rollback cap");
    cmd->add_option("--seed", opt.seed, "override: RNG seed");
}

PipelineConfig build_config(const CommonOptions& opt) {
    PipelineConfig cfg = opt.config_file.empty() ? PipelineConfig{} : load_config(opt.config_file);
    if (opt.beta) cfg.beta = *opt.beta;
    if (opt.tau) cfg.tau = *opt.tau;
    if (opt.gamma) cfg.gamma = *opt.gamma;
    if (opt.temperature) cfg.llm_temperature = *opt.temperature;
    if (opt.max_claims) cfg.max_claims = *opt.max_claims;
    if (opt.max_rollbacks) cfg.max_rollbacks = *opt.max_rollbacks;
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.validate();
    return cfg;
}

ProviderSet build_providers(const CommonOptions& opt, const PipelineConfig& cfg) {
    if (opt.mock_fixtures.empty() == opt.providers_file.empty())
        throw ConfigError("exactly one of --mock-fixtures or --providers is required");
    PromptLibrary prompts = PromptLibrary::load_dir(opt.prompts_dir);
    if (!opt.mock_fixtures.empty())
        return make_mock_provider_set(cfg, load_fixture_dir(opt.mock_fixtures), std::move(prompts));
    return load_http_provider_set(opt.providers_file, cfg, std::move(prompts));
}

EngineContext build_context(const CommonOptions& opt, const PipelineConfig& cfg) {
    FusionParams params = opt.fusion_params_file.empty() ? init_params(cfg.fusion_dims, cfg.seed)
                                                         : load_fusion_params(opt.fusion_params_file);
    EngineContext ctx = EngineContext::with_defaults(cfg, std::move(params));
    if (!opt.judge_params_file.empty()) ctx.judge_params = load_judge_params(opt.judge_params_file);
    return ctx;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << body;
}

std::map<std::string, int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open labels file: " + path);
    std::map<std::string, int> labels;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const std::string id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            labels[id] = j.at("label").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (labels.empty()) throw EmptyCorpus("no labels in " + path);
    return labels;
}

// --- run ---------------------------------------------------------------------

int cmd_run(const CommonOptions& opt, const std::string& out_dir, const std::string& emit_banks,
            double error_budget, double base_calls, double forensic_calls) {
    PipelineConfig cfg = build_config(opt);
    ProviderSet providers = build_providers(opt, cfg);
    EngineContext ctx = build_context(opt, cfg);

    IngestResult corpus = ingest_corpus(opt.corpus);
    fs::create_directories(out_dir);
    if (!corpus.errors.empty()) {
        std::ostringstream os;
        for (const auto& e : corpus.errors)
            os << nlohmann::ordered_json{{"line", e.line}, {"message", e.message}}.dump() << "\n";
        write_text(out_dir + "/ingest_errors.jsonl", os.str());
        std::cerr << "warning: " << corpus.errors.size() << " malformed corpus line(s) skipped\n";
    }

    auto traces = run_corpus(corpus.items, providers, ctx, opt.jobs);
    for (const auto& t : traces) write_trace(t, out_dir + "/" + t.item_id + ".trace.json");

    if (!emit_banks.empty()) {
        // re-derive banks from traces is lossy for f_t/f_H/f_R, so rerun the
        // bank assembly path: recorded masks + evidence give f_v, the
        // linguistic features are recomputed deterministically
        std::vector<LabeledBank> banks;
        ProviderGateway gw(providers, cfg, nullptr);
        for (std::size_t i = 0; i < corpus.items.size(); ++i) {
            if (traces[i].errored) continue;
            Stage1Result s1 = run_stage1(corpus.items[i], gw, cfg);
            FeatureBank bank;
            bank.features = {s1.style.f_t, s1.style.f_H, s1.style.f_R, traces[i].evidence.f_v};
            bank.masks = {s1.style.m_t, s1.style.m_H, s1.style.m_R, traces[i].evidence.m_v};
            banks.emplace_back(std::move(bank), corpus.items[i].label.value_or(traces[i].verdict));
        }
        if (banks.empty()) throw DataError("no usable samples for --emit-banks");
        save_banks_jsonl(banks, emit_banks);
    }

    std::size_t errored = 0;
    for (const auto& t : traces) errored += t.errored;

    std::vector<PipelineTrace> labeled;
    for (const auto& t : traces)
        if (t.label && !t.errored) labeled.push_back(t);
    if (!labeled.empty()) {
        EvalReport report = evaluate(predictions_from_traces(labeled));
        write_text(out_dir + "/eval.json", eval_report_to_json(report).dump(2) + "\n");
        write_text(out_dir + "/eval.csv", eval_report_to_csv(report));
        std::cout << "eval: " << eval_report_to_json(report).dump() << "\n";
    }
    CostReport cost = cost_account(traces, CallModel{base_calls, forensic_calls});
    write_text(out_dir + "/cost.json", cost_report_to_json(cost).dump(2) + "\n");
    std::cout << "cost: " << cost_report_to_json(cost).dump() << "\n";
    std::cout << "traces: " << traces.size() << " (" << errored << " errored) -> " << out_dir << "\n";

    const double errored_rate = traces.empty() ? 0.0 : static_cast<double>(errored) / traces.size();
    if (errored_rate > error_budget) {
        std::cerr << "provider failures exceed budget: " << errored_rate << " > " << error_budget << "\n";
        return kExitProviderBudget;
    }
    return kExitOk;
}

// --- train-fusion --------------------------------------------------------------

int cmd_train_fusion(const std::string& banks_file, const std::string& out_file, const std::string& curve_file,
                     TrainOptions train_opt, int d_p, int d_h) {
    auto banks = load_banks_jsonl(banks_file);
    const int d = static_cast<int>(banks.front().first.features[0].size());
    FusionDims dims{d, d_p, d_h};
    TrainResult result = train_fusion(banks, init_params(dims, train_opt.seed), train_opt);
    save_fusion_params(result.params, out_file);
    if (!curve_file.empty()) save_training_curve(result.curve, curve_file);
    double final_train = result.curve.empty() ? 0.0 : result.curve.back().train_loss;
    std::cout << "trained on " << banks.size() << " banks (d=" << d << "), best epoch " << result.best_epoch
              << ", final train loss " << final_train << " -> " << out_file << "\n";
    return kExitOk;
}

// --- eval ---------------------------------------------------------------------

int cmd_eval(const std::string& traces_dir, const std::string& labels_file, const std::string& out_file) {
    auto labels = load_labels(labels_file);
    std::vector<Prediction> preds;
    std::size_t unlabeled = 0;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(traces_dir))
        if (entry.path().extension() == ".json" && entry.path().string().ends_with(".trace.json"))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        PipelineTrace t = read_trace(path.string());
        auto it = labels.find(t.item_id);
        if (it == labels.end()) {
            ++unlabeled;
            continue;
        }
        preds.push_back(Prediction{t.prediction, t.verdict, it->second});
    }
    if (preds.empty()) throw DataError("no labeled traces under " + traces_dir);
    if (unlabeled) std::cerr << "warning: " << unlabeled << " trace(s) without labels skipped\n";
    EvalReport report = evaluate(preds);
    const std::string body = eval_report_to_json(report).dump(2) + "\n";
    if (!out_file.empty()) write_text(out_file, body);
    std::cout << body;
    return kExitOk;
}

// --- grid-search / sweep-tau ----------------------------------------------------

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

int cmd_grid_search(const CommonOptions& opt, const std::string& grid_csv, const std::string& objective,
                    const std::string& cache_dir, const std::string& out_file) {
    PipelineConfig cfg = build_config(opt);
    ProviderSet providers = build_providers(opt, cfg);
    EngineContext ctx = build_context(opt, cfg);
    IngestResult corpus = ingest_corpus(opt.corpus);

    auto cache = std::make_shared<ProviderCache>(cache_dir);
    GridSearchResult result =
        grid_search_beta(corpus.items, parse_double_list(grid_csv), objective, providers, ctx, opt.jobs, cache);
    const std::string csv = grid_table_to_csv(result, objective);
    if (!out_file.empty()) write_text(out_file, csv);
    std::cout << csv << "best_beta: " << result.best_beta << "\n";
    return kExitOk;
}

int cmd_sweep_tau(const CommonOptions& opt, const std::string& values_csv, const std::string& out_file) {
    PipelineConfig cfg = build_config(opt);
    ProviderSet providers = build_providers(opt, cfg);
    EngineContext ctx = build_context(opt, cfg);
    IngestResult corpus = ingest_corpus(opt.corpus);

    auto rows = sweep_tau(corpus.items, parse_int_list(values_csv), providers, ctx, opt.jobs);
    const std::string csv = tau_table_to_csv(rows);
    if (!out_file.empty()) write_text(out_file, csv);
    std::cout << csv;
    return kExitOk;
}

// --- trace -----------------------------------------------------------------------

int cmd_trace(const std::string& id, const std::string& out_dir) {
    PipelineTrace t = read_trace(out_dir + "/" + id + ".trace.json");
    std::cout << "trace " << t.item_id << ": prediction=" << t.prediction << " verdict="
              << (t.verdict ? "fake" : "real");
    if (t.label) std::cout << " label=" << (*t.label ? "fake" : "real");
    std::cout << "\nstages:";
    for (const auto& d : t.decisions) std::cout << " " << to_string(d.stage) << "/" << to_string(d.action);
    std::cout << "\n" << trace_to_json(t).dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DIVER: dynamic multimodal fake-news verification pipeline"};
    app.require_subcommand(1);

    CommonOptions run_opt;
    std::string run_out, run_banks;
    double error_budget = 0.0, base_calls = 1.0, forensic_calls = 1.0;
    CLI::App* run = app.add_subcommand("run", "run the pipeline over a corpus");
    add_common(run, run_opt);
    run->add_option("--out", run_out, "output directory for traces and reports")->required();
    run->add_option("--emit-banks", run_banks, "also write fusion feature banks (JSONL)");
    run->add_option("--error-budget", error_budget, "max tolerated fraction of errored samples");
    run->add_option("--base-calls", base_calls, "cost model: base API calls per sample");
    run->add_option("--forensic-calls", forensic_calls, "cost model: extra calls when forensics runs");

    std::string tf_banks, tf_out, tf_curve;
    TrainOptions tf_opt;
    int tf_dp = 16, tf_dh = 16;
    CLI::App* tf = app.add_subcommand("train-fusion", "train the fusion head on feature banks");
    tf->add_option("--banks", tf_banks, "feature banks JSONL")->required();
    tf->add_option("--out", tf_out, "output fusion params JSON")->required();
    tf->add_option("--curve", tf_curve, "training curve CSV");
    tf->add_option("--lr", tf_opt.lr, "learning rate");
    tf->add_option("--epochs", tf_opt.epochs, "max epochs");
    tf->add_option("--batch", tf_opt.batch_size, "batch size");
    tf->add_option("--seed", tf_opt.seed, "RNG seed");
    tf->add_option("--momentum", tf_opt.momentum, "SGD momentum");
    tf->add_option("--val-fraction", tf_opt.val_fraction, "held-out fraction for early stopping");
    tf->add_option("--patience", tf_opt.patience, "early stopping patience (epochs)");
    tf->add_option("--d-p", tf_dp, "confidence hidden dim");
    tf->add_option("--d-h", tf_dh, "attention dim");

    std::string ev_traces, ev_labels, ev_out;
    CLI::App* ev = app.add_subcommand("eval", "evaluate stored traces against labels");
    ev->add_option("--traces", ev_traces, "directory of *.trace.json")->required();
    ev->add_option("--labels", ev_labels, "JSON-lines file with id and label")->required();
    ev->add_option("--out", ev_out, "write report JSON here");

    CommonOptions gs_opt;
    std::string gs_grid = "0.1,0.2,0.29,0.4,0.5", gs_objective = "accuracy", gs_cache, gs_out;
    CLI::App* gs = app.add_subcommand("grid-search", "select beta by validation grid search");
    add_common(gs, gs_opt);
    gs->add_option("--grid", gs_grid, "comma-separated beta values (sorted)");
    gs->add_option("--objective", gs_objective, "accuracy | f1_fake | f1_real | auc");
    gs->add_option("--cache", gs_cache, "on-disk provider cache directory");
    gs->add_option("--out", gs_out, "write table CSV here");

    CommonOptions st_opt;
    std::string st_values = "1,2,3,4", st_out;
    CLI::App* st = app.add_subcommand("sweep-tau", "re-run the pipeline across correction limits");
    add_common(st, st_opt);
    st->add_option("--values", st_values, "comma-separated tau values");
    st->add_option("--out", st_out, "write table CSV here");

    std::string tr_id, tr_out;
    CLI::App* tr = app.add_subcommand("trace", "pretty-print one stored trace");
    tr->add_option("--id", tr_id, "sample id")->required();
    tr->add_option("--out", tr_out, "run output directory holding the trace")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);   // --help
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(run_opt, run_out, run_banks, error_budget, base_calls, forensic_calls);
        if (tf->parsed()) return cmd_train_fusion(tf_banks, tf_out, tf_curve, tf_opt, tf_dp, tf_dh);
        if (ev->parsed()) return cmd_eval(ev_traces, ev_labels, ev_out);
        if (gs->parsed()) return cmd_grid_search(gs_opt, gs_grid, gs_objective, gs_cache, gs_out);
        if (st->parsed()) return cmd_sweep_tau(st_opt, st_values, st_out);
        if (tr->parsed()) return cmd_trace(tr_id, tr_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TransportError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProviderBudget;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
