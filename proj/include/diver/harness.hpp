#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diver/cache.hpp"
#include "diver/engine.hpp"
#include "diver/trace_io.hpp"
#include "diver/types.hpp"

namespace diver {

// ---------------------------------------------------------------------------
// Metrics. Fake (label 1) is the positive class throughout.
// ---------------------------------------------------------------------------

struct Prediction {
    double probability = 0.0;
    int verdict = 0;
    int label = 0;
};

struct Confusion {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    double f1_fake = 0.0;
    double f1_real = 0.0;
    std::optional<double> auc;      // absent for one-class label sets
    std::int64_t n = 0;
    Confusion confusion;
    std::vector<std::string> flags;
};

// Mann-Whitney rank statistic with average ranks for ties; every intermediate
// is an exact multiple of 0.5, so this agrees bit-for-bit with the
// brute-force all-pairs oracle.
inline double auc_rank_statistic(const std::vector<std::pair<double, int>>& scored) {
    std::vector<std::size_t> order(scored.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scored[a].first < scored[b].first; });
    double rank_sum_pos = 0.0;
    std::int64_t n_pos = 0, n_neg = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scored[order[j]].first == scored[order[i]].first) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (scored[order[k]].second == 1) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline EvalReport evaluate(const std::vector<Prediction>& predictions) {
    if (predictions.empty()) throw DataError("evaluate: no predictions");
    EvalReport report;
    report.n = static_cast<std::int64_t>(predictions.size());
    for (const auto& p : predictions) {
        if (p.label != 0 && p.label != 1) throw DataError("evaluate: labels must be 0/1");
        if (p.verdict == 1)
            ++(p.label == 1 ? report.confusion.tp : report.confusion.fp);
        else
            ++(p.label == 1 ? report.confusion.fn : report.confusion.tn);
    }
    const Confusion& c = report.confusion;
    report.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(report.n);

    const std::int64_t actual_fake = c.tp + c.fn;
    const std::int64_t actual_real = c.tn + c.fp;
    if (actual_fake == 0) {
        report.f1_fake = 0.0;
        report.flags.push_back("no_fake_samples");
    } else {
        const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
        report.f1_fake = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
    }
    if (actual_real == 0) {
        report.f1_real = 0.0;
        report.flags.push_back("no_real_samples");
    } else {
        const double denom = static_cast<double>(2 * c.tn + c.fn + c.fp);
        report.f1_real = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tn) / denom;
    }

    if (actual_fake == 0 || actual_real == 0) {
        report.flags.push_back("auc_undefined");
    } else {
        std::vector<std::pair<double, int>> scored;
        scored.reserve(predictions.size());
        for (const auto& p : predictions) scored.emplace_back(p.probability, p.label);
        report.auc = auc_rank_statistic(scored);
    }
    return report;
}

inline std::vector<Prediction> predictions_from_traces(const std::vector<PipelineTrace>& traces) {
    std::vector<Prediction> out;
    for (const auto& t : traces) {
        if (!t.label) throw DataError("trace " + t.item_id + " carries no label");
        out.push_back(Prediction{t.prediction, t.verdict, *t.label});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cost accounting.
// ---------------------------------------------------------------------------

struct CallModel {
    double base_calls_per_sample = 1.0;
    double forensic_calls_per_sample = 1.0;
};

struct CostReport {
    double avg_api_calls = 0.0;        // under the call model
    double avg_tokens_k = 0.0;         // mean total tokens per sample / 1000
    double avg_latency_s = 0.0;        // mean summed wall time per sample
    double skip_rate = 0.0;
    double expected_api_calls = 0.0;   // closed form: base + (1-skip_rate)*forensic
    double avg_raw_provider_calls = 0.0;
};

inline CostReport cost_account(const std::vector<PipelineTrace>& traces, const CallModel& model) {
    if (traces.empty()) throw DataError("cost_account: no traces");
    CostReport report;
    double calls = 0.0, tokens = 0.0, wall = 0.0, raw = 0.0;
    std::int64_t skips = 0;
    for (const auto& t : traces) {
        const bool forensic = t.forensics_ran();
        calls += model.base_calls_per_sample + (forensic ? model.forensic_calls_per_sample : 0.0);
        tokens += static_cast<double>(t.total_tokens_in() + t.total_tokens_out());
        wall += static_cast<double>(t.total_wall_ms());
        raw += static_cast<double>(t.provider_calls.size());
        skips += t.skipped_forensics();
    }
    const double n = static_cast<double>(traces.size());
    report.avg_api_calls = calls / n;
    report.avg_tokens_k = tokens / n / 1000.0;
    report.avg_latency_s = wall / n / 1000.0;
    report.skip_rate = static_cast<double>(skips) / n;
    report.expected_api_calls =
        model.base_calls_per_sample + (1.0 - report.skip_rate) * model.forensic_calls_per_sample;
    report.avg_raw_provider_calls = raw / n;
    return report;
}

// ---------------------------------------------------------------------------
// Corpus ingestion (JSON lines).
// ---------------------------------------------------------------------------

struct IngestError {
    int line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<NewsItem> items;
    std::vector<IngestError> errors;
};

inline IngestResult ingest_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);
    IngestResult result;
    std::map<std::string, int> seen;   // id -> line
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            result.errors.push_back({lineno, std::string("bad json: ") + e.what()});
            continue;
        }
        NewsItem item;
        try {
            if (!j.contains("id")) throw DataError("missing id");
            item.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
            if (!j.contains("text") || !j["text"].is_string()) throw DataError("missing text");
            item.text = j["text"].get<std::string>();
            if (!j.contains("image") || !j["image"].is_string()) throw DataError("missing image");
            item.image = j["image"].get<std::string>();
            if (j.contains("label")) item.label = j["label"].get<int>();
            item.validate();
        } catch (const std::exception& e) {
            result.errors.push_back({lineno, e.what()});
            continue;
        }
        auto [it, inserted] = seen.emplace(item.id, lineno);
        if (!inserted)
            throw DuplicateId("duplicate id '" + item.id + "' at lines " + std::to_string(it->second) + " and " +
                              std::to_string(lineno));
        result.items.push_back(std::move(item));
    }
    if (result.items.empty()) throw EmptyCorpus("no valid items in " + path);
    return result;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweeps.
// ---------------------------------------------------------------------------

inline double metric_value(const EvalReport& report, const std::string& objective) {
    if (objective == "accuracy") return report.accuracy;
    if (objective == "f1_fake") return report.f1_fake;
    if (objective == "f1_real") return report.f1_real;
    if (objective == "auc") {
        if (!report.auc) throw DataError("objective auc undefined for this corpus");
        return *report.auc;
    }
    throw ConfigError("unknown objective: " + objective);
}

struct GridSearchRow {
    double beta = 0.0;
    double metric = 0.0;
    EvalReport report;
};

struct GridSearchResult {
    double best_beta = 0.0;
    std::vector<GridSearchRow> table;
};

// Re-runs the pipeline per beta behind a shared provider cache, so repeated
// provider inputs are answered once; only the gate decision and everything
// downstream of it change between grid points. Ties break toward smaller
// beta.
inline GridSearchResult grid_search_beta(const std::vector<NewsItem>& corpus, const std::vector<double>& beta_grid,
                                         const std::string& objective, const ProviderSet& providers,
                                         const EngineContext& ctx, int jobs = 1,
                                         std::shared_ptr<ProviderCache> cache = nullptr) {
    if (beta_grid.empty()) throw ConfigError("grid_search_beta: empty grid");
    if (!std::is_sorted(beta_grid.begin(), beta_grid.end()))
        throw ConfigError("grid_search_beta: grid must be sorted");
    for (const auto& item : corpus)
        if (!item.label) throw DataError("grid_search_beta: item " + item.id + " is unlabeled");

    if (!cache) cache = std::make_shared<ProviderCache>();
    const ProviderSet cached = make_cached_provider_set(providers, cache);

    GridSearchResult result;
    bool have_best = false;
    double best_metric = 0.0;
    for (double beta : beta_grid) {
        EngineContext local = ctx;
        local.config.beta = beta;
        auto traces = run_corpus(corpus, cached, local, jobs);
        EvalReport report = evaluate(predictions_from_traces(traces));
        const double metric = metric_value(report, objective);
        result.table.push_back({beta, metric, report});
        if (!have_best || metric > best_metric) {
            have_best = true;
            best_metric = metric;
            result.best_beta = beta;
        }
    }
    return result;
}

struct TauSweepRow {
    int tau = 0;
    EvalReport report;
};

inline std::vector<TauSweepRow> sweep_tau(const std::vector<NewsItem>& corpus, const std::vector<int>& tau_values,
                                          const ProviderSet& providers, const EngineContext& ctx, int jobs = 1) {
    for (const auto& item : corpus)
        if (!item.label) throw DataError("sweep_tau: item " + item.id + " is unlabeled");
    std::vector<TauSweepRow> rows;
    for (int tau : tau_values) {
        if (tau < 0) throw ConfigError("sweep_tau: tau must be >= 0");
        EngineContext local = ctx;
        local.config.tau = tau;
        auto traces = run_corpus(corpus, providers, local, jobs);
        rows.push_back({tau, evaluate(predictions_from_traces(traces))});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Report serialization (JSON + CSV).
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json eval_report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["f1_fake"] = r.f1_fake;
    j["f1_real"] = r.f1_real;
    if (r.auc) j["auc"] = *r.auc;
    else j["auc"] = nullptr;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    j["flags"] = r.flags;
    return j;
}

inline std::string eval_report_to_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "n,accuracy,f1_fake,f1_real,auc,tp,fp,tn,fn\n";
    os << r.n << "," << r.accuracy << "," << r.f1_fake << "," << r.f1_real << ",";
    if (r.auc) os << *r.auc;
    os << "," << r.confusion.tp << "," << r.confusion.fp << "," << r.confusion.tn << "," << r.confusion.fn << "\n";
    return os.str();
}

inline nlohmann::ordered_json cost_report_to_json(const CostReport& r) {
    nlohmann::ordered_json j;
    j["avg_api_calls"] = r.avg_api_calls;
    j["avg_tokens_k"] = r.avg_tokens_k;
    j["avg_latency_s"] = r.avg_latency_s;
    j["skip_rate"] = r.skip_rate;
    j["expected_api_calls"] = r.expected_api_calls;
    j["avg_raw_provider_calls"] = r.avg_raw_provider_calls;
    return j;
}

inline std::string grid_table_to_csv(const GridSearchResult& r, const std::string& objective) {
    std::ostringstream os;
    os << "beta," << objective << ",accuracy,f1_fake,f1_real,auc\n";
    for (const auto& row : r.table) {
        os << row.beta << "," << row.metric << "," << row.report.accuracy << "," << row.report.f1_fake << ","
           << row.report.f1_real << ",";
        if (row.report.auc) os << *row.report.auc;
        os << "\n";
    }
    return os.str();
}

inline std::string tau_table_to_csv(const std::vector<TauSweepRow>& rows) {
    std::ostringstream os;
    os << "tau,accuracy,f1_fake,f1_real,auc\n";
    for (const auto& row : rows) {
        os << row.tau << "," << row.report.accuracy << "," << row.report.f1_fake << "," << row.report.f1_real << ",";
        if (row.report.auc) os << *row.report.auc;
        os << "\n";
    }
    return os.str();
}

}  // namespace diver
