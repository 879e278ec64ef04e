#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "diver/alignment.hpp"
#include "diver/consistency.hpp"
#include "diver/forensics.hpp"
#include "diver/fusion.hpp"
#include "diver/gateway.hpp"
#include "diver/linguistic.hpp"
#include "diver/types.hpp"

namespace diver {

struct EngineContext {
    PipelineConfig config;
    FusionParams fusion_params;
    JudgeParams judge_params;
    LocalXAttnParams local_params;

    static EngineContext with_defaults(const PipelineConfig& config, FusionParams fusion_params) {
        EngineContext ctx;
        ctx.config = config;
        ctx.fusion_params = std::move(fusion_params);
        ctx.local_params = LocalXAttnParams::untrained(config.feature_dim_text);
        return ctx;
    }
};

struct RunResult {
    int verdict = 0;
    double probability = 0.0;
    PipelineTrace trace;
};

namespace engine_detail {

inline void add_flags(PipelineTrace& trace, const std::vector<std::string>& flags) {
    for (const auto& f : flags)
        if (!trace.has_flag(f)) trace.flags.push_back(f);
}

}  // namespace engine_detail

// Runs the four-stage decision pipeline for one sample. Provider failures
// follow the declared fallbacks; a failure with no fallback marks this sample
// errored instead of crashing the batch. Configuration and dimension problems
// throw, since they are batch-level bugs.
inline RunResult run_pipeline_ctx(const NewsItem& item, const ProviderSet& providers, const EngineContext& ctx) {
    const PipelineConfig& config = ctx.config;
    config.validate();
    ctx.fusion_params.validate(config.fusion_dims);
    providers.validate();
    if (static_cast<int>(ctx.local_params.w.size()) != config.feature_dim_text)
        throw ConfigError("local_params dimension does not match feature_dim_text");
    item.validate();

    RunResult result;
    PipelineTrace& trace = result.trace;
    trace.item_id = item.id;
    trace.seed = config.seed;
    trace.label = item.label;

    ProviderGateway gw(providers, config, &trace);
    try {
        // Stage 1: linguistic investigation
        Stage1Result stage1 = run_stage1(item, gw, config);
        engine_detail::add_flags(trace, stage1.flags);
        engine_detail::add_flags(trace, stage1.style.flags);
        StageDecision d1;
        d1.stage = Stage::Linguistic;
        d1.action = StageAction::Proceed;
        d1.scores = {{"claims", static_cast<double>(stage1.claims.claims.size())}};
        trace.decisions.push_back(d1);

        // Stage 2: consistency reflection with bounded self-correction
        ReflectionResult reflection =
            reflect_and_correct(item, stage1.claims, gw, config, ctx.judge_params, ctx.local_params);
        for (auto& d : reflection.decisions) trace.decisions.push_back(d);
        ClaimSet claims = reflection.claims;
        claims.validate(config.max_claims, config.tau);

        // Stage 3: inter-modal alignment gate
        AlignmentReport report = alignment_score(claims, item.image, gw, config.alignment_aggregation);
        const GateAction gate = decide_gate_action(report.s_inter, config.beta);
        StageDecision d3;
        d3.stage = Stage::AlignmentGate;
        d3.action = gate == GateAction::SkipForensics ? StageAction::SkipForensics : StageAction::Proceed;
        d3.scores = {{"s_inter", report.s_inter}, {"beta", config.beta}};
        trace.decisions.push_back(d3);

        // Stage 4: evidence-driven forensics with bounded rollback
        EvidenceBundle bundle;
        if (gate == GateAction::SkipForensics) {
            bundle = skipped_bundle(config.feature_dim_text);
        } else {
            int rollback_count = 0;
            for (;;) {
                ForensicPassResult pass = forensic_pass(item, claims, gw, config, rollback_count);
                engine_detail::add_flags(trace, pass.flags);
                trace.decisions.push_back(pass.decision);
                if (!pass.rollback_requested) {
                    bundle = std::move(pass.bundle);
                    break;
                }
                // refined claims re-enter stage 2 before the next pass
                ReflectionResult redo =
                    reflect_and_correct(item, pass.refined, gw, config, ctx.judge_params, ctx.local_params);
                for (auto& d : redo.decisions) trace.decisions.push_back(d);
                claims = redo.claims;
                claims.validate(config.max_claims, config.tau);
                ++rollback_count;
            }
        }
        bundle.validate();

        // Uncertainty-aware fusion
        FeatureBank bank;
        bank.features = {stage1.style.f_t, stage1.style.f_H, stage1.style.f_R, bundle.f_v};
        bank.masks = {stage1.style.m_t, stage1.style.m_H, stage1.style.m_R, bundle.m_v};
        FusionOutput fused = fusion_forward(bank, ctx.fusion_params);

        StageDecision d5;
        d5.stage = Stage::Fusion;
        d5.action = StageAction::Proceed;
        d5.scores = {{"y_hat", fused.y_hat}};
        trace.decisions.push_back(d5);

        trace.claims = claims;
        trace.evidence = std::move(bundle);
        trace.bank_masks.assign(bank.masks.begin(), bank.masks.end());
        trace.fusion_alpha = fused.alpha;
        trace.fusion_mu = fused.mu;
        trace.prediction = fused.y_hat;
        trace.verdict = fused.y_hat >= 0.5 ? 1 : 0;
        result.probability = fused.y_hat;
        result.verdict = trace.verdict;
    } catch (const ConfigError&) {
        throw;
    } catch (const DimensionMismatch&) {
        throw;
    } catch (const Error& e) {
        trace.errored = true;
        trace.error = e.what();
        engine_detail::add_flags(trace, {"errored"});
        trace.prediction = 0.5;
        trace.verdict = 0;
        result.probability = 0.5;
        result.verdict = 0;
    }
    return result;
}

inline RunResult run_pipeline(const NewsItem& item, const PipelineConfig& config, const ProviderSet& providers,
                              const FusionParams& fusion_params) {
    return run_pipeline_ctx(item, providers, EngineContext::with_defaults(config, fusion_params));
}

// Batch evaluation; per-sample state machines stay independent, shared
// objects are read-only. Traces come back in corpus order.
inline std::vector<PipelineTrace> run_corpus(const std::vector<NewsItem>& items, const ProviderSet& providers,
                                             const EngineContext& ctx, int jobs = 1) {
    std::vector<PipelineTrace> traces(items.size());
    if (jobs < 1) jobs = 1;
    if (jobs == 1) {
        for (std::size_t i = 0; i < items.size(); ++i) traces[i] = run_pipeline_ctx(items[i], providers, ctx).trace;
        return traces;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                traces[i] = run_pipeline_ctx(items[i], providers, ctx).trace;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return traces;
}

}  // namespace diver
