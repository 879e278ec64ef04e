#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <thread>

#include "diver/providers.hpp"
#include "diver/types.hpp"

namespace diver {

// Single choke point for provider calls: bounded retry on transport errors,
// token/latency accounting, thread-safe trace recording. Stage code that
// needs to control record ordering (the concurrent stage-1 calls) uses the
// *_deferred variants and appends the records itself after the join.
class ProviderGateway {
  public:
    static constexpr int kMaxAttempts = 3;

    ProviderGateway(const ProviderSet& providers, const PipelineConfig& config, PipelineTrace* trace)
        : providers_(providers), config_(config), trace_(trace) {}

    const ProviderSet& providers() const { return providers_; }
    const PipelineConfig& config() const { return config_; }

    // --- LLM ---------------------------------------------------------------

    std::pair<std::string, CallRecord> complete_deferred(PromptId id,
                                                         const std::map<std::string, std::string>& variables,
                                                         const std::string& purpose,
                                                         bool extended_context = false) const {
        LlmRequest req;
        req.prompt_id = id;
        req.variables = variables;
        req.temperature = config_.llm_temperature;
        req.max_context_tokens = extended_context ? config_.extended_context_tokens : config_.max_context_tokens;

        std::string rendered;
        const auto t0 = std::chrono::steady_clock::now();
        std::string completion = with_retries([&] {
            return llm_complete(*providers_.llm, providers_.prompts, req, &rendered);
        });
        CallRecord rec;
        rec.provider = "llm";
        rec.purpose = purpose;
        rec.tokens_in = estimate_tokens(rendered);
        rec.tokens_out = estimate_tokens(completion);
        rec.wall_ms = wall_ms(t0, 20 + rec.tokens_in / 16 + rec.tokens_out);
        return {std::move(completion), std::move(rec)};
    }

    std::string complete(PromptId id, const std::map<std::string, std::string>& variables,
                         const std::string& purpose, bool extended_context = false) const {
        auto [completion, rec] = complete_deferred(id, variables, purpose, extended_context);
        record(rec);
        return completion;
    }

    // --- Embedders -----------------------------------------------------------

    std::pair<EmbeddingVector, CallRecord> embed_deferred(const TextEmbedder& embedder, const char* provider_name,
                                                          const std::string& text, const std::string& purpose) const {
        const auto t0 = std::chrono::steady_clock::now();
        EmbeddingVector v = with_retries([&] { return embed_text(embedder, text); });
        CallRecord rec;
        rec.provider = provider_name;
        rec.purpose = purpose;
        rec.tokens_in = estimate_tokens(text);
        rec.tokens_out = 0;
        rec.wall_ms = wall_ms(t0, 2 + rec.tokens_in / 64);
        return {std::move(v), std::move(rec)};
    }

    EmbeddingVector sentence_embed(const std::string& text, const std::string& purpose) const {
        auto [v, rec] = embed_deferred(*providers_.sentence_embedder, "sentence_embedder", text, purpose);
        record(rec);
        return v;
    }

    EmbeddingVector claim_embed(const std::string& text, const std::string& purpose) const {
        auto [v, rec] = embed_deferred(*providers_.claim_embedder, "claim_embedder", text, purpose);
        record(rec);
        return v;
    }

    EmbeddingVector joint_text(const std::string& text, const std::string& purpose) const {
        const auto t0 = std::chrono::steady_clock::now();
        EmbeddingVector v = with_retries([&] { return embed_joint_text(*providers_.joint_embedder, text); });
        record_simple("joint_embedder", purpose, estimate_tokens(text), 0, t0, 2 + estimate_tokens(text) / 64);
        return v;
    }

    EmbeddingVector joint_image(const std::string& image_ref, const std::string& purpose) const {
        const auto t0 = std::chrono::steady_clock::now();
        EmbeddingVector v = with_retries([&] { return embed_joint_image(*providers_.joint_embedder, image_ref); });
        record_simple("joint_embedder", purpose, estimate_tokens(image_ref), 0, t0, 8);
        return v;
    }

    // --- Vision tools --------------------------------------------------------

    std::string vision(ToolKind kind, const std::string& image_ref, const std::string& purpose) const {
        const VisionTool& tool = *providers_.vision_tools.at(kind);
        const auto t0 = std::chrono::steady_clock::now();
        std::string out = with_retries([&] { return run_vision_tool(tool, image_ref); });
        record_simple(std::string("tool:") + to_string(kind), purpose, estimate_tokens(image_ref),
                      estimate_tokens(out), t0, 15 + estimate_tokens(out) / 4);
        return out;
    }

    void record(const CallRecord& rec) const {
        if (!trace_) return;
        std::lock_guard<std::mutex> lock(mutex_);
        trace_->provider_calls.push_back(rec);
    }

  private:
    template <typename Fn>
    auto with_retries(Fn&& fn) const -> decltype(fn()) {
        int attempt = 0;
        for (;;) {
            try {
                return fn();
            } catch (const TransportError&) {
                if (++attempt >= kMaxAttempts) throw;
                if (!providers_.simulated_latency)
                    std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
            }
        }
    }

    std::int64_t wall_ms(std::chrono::steady_clock::time_point t0, std::int64_t simulated) const {
        if (providers_.simulated_latency) return simulated;
        const auto dt = std::chrono::steady_clock::now() - t0;
        return std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
    }

    void record_simple(const std::string& provider, const std::string& purpose, std::int64_t tokens_in,
                       std::int64_t tokens_out, std::chrono::steady_clock::time_point t0,
                       std::int64_t simulated) const {
        CallRecord rec;
        rec.provider = provider;
        rec.purpose = purpose;
        rec.tokens_in = tokens_in;
        rec.tokens_out = tokens_out;
        rec.wall_ms = wall_ms(t0, simulated);
        record(rec);
    }

    const ProviderSet& providers_;
    const PipelineConfig& config_;
    PipelineTrace* trace_;
    mutable std::mutex mutex_;
};

}  // namespace diver
