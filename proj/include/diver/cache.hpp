#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "diver/hashing.hpp"
#include "diver/providers.hpp"

namespace diver {

// Content-addressed store for provider outputs, keyed by sha256 of the full
// input payload. Layout: <dir>/<role>/<hash[0:2]>/<hash>.json. With an empty
// directory the cache is memory-only, which is what hyperparameter sweeps use
// by default.
class ProviderCache {
  public:
    explicit ProviderCache(std::string dir = "") : dir_(std::move(dir)) {}

    std::optional<nlohmann::json> get(const std::string& role, const std::string& payload) const {
        const std::string key = sha256_hex(payload);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = memory_.find(role + "/" + key);
            if (it != memory_.end()) {
                ++hits_;
                return it->second;
            }
        }
        if (dir_.empty()) return std::nullopt;
        const std::string path = entry_path(role, key);
        std::ifstream in(path);
        if (!in) return std::nullopt;
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;   // corrupt entry behaves like a miss
        }
        std::lock_guard<std::mutex> lock(mutex_);
        memory_[role + "/" + key] = doc.at("output");
        ++hits_;
        return doc.at("output");
    }

    void put(const std::string& role, const std::string& payload, nlohmann::json output) const {
        const std::string key = sha256_hex(payload);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            memory_[role + "/" + key] = output;
        }
        if (dir_.empty()) return;
        namespace fs = std::filesystem;
        const std::string path = entry_path(role, key);
        fs::create_directories(fs::path(path).parent_path());
        nlohmann::json doc;
        doc["input_sha256"] = key;
        doc["output"] = std::move(output);
        std::ofstream out(path);
        if (!out) throw IoError("cannot write cache entry: " + path);
        out << doc.dump();
    }

    std::size_t hit_count() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return hits_;
    }

  private:
    std::string entry_path(const std::string& role, const std::string& key) const {
        return dir_ + "/" + role + "/" + key.substr(0, 2) + "/" + key + ".json";
    }

    std::string dir_;
    mutable std::map<std::string, nlohmann::json> memory_;
    mutable std::mutex mutex_;
    mutable std::size_t hits_ = 0;
};

namespace cache_detail {

class CachedLlm final : public LlmProvider {
  public:
    CachedLlm(std::shared_ptr<const LlmProvider> inner, std::shared_ptr<ProviderCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string complete(const LlmRequest& request, const std::string& rendered_prompt) const override {
        const std::string payload = std::string(to_string(request.prompt_id)) + "\x1f" + rendered_prompt + "\x1f" +
                                    std::to_string(request.temperature);
        if (auto hit = cache_->get("llm", payload)) return hit->get<std::string>();
        std::string out = inner_->complete(request, rendered_prompt);
        cache_->put("llm", payload, out);
        return out;
    }

  private:
    std::shared_ptr<const LlmProvider> inner_;
    std::shared_ptr<ProviderCache> cache_;
};

class CachedTextEmbedder final : public TextEmbedder {
  public:
    CachedTextEmbedder(std::shared_ptr<const TextEmbedder> inner, std::shared_ptr<ProviderCache> cache,
                       std::string role)
        : inner_(std::move(inner)), cache_(std::move(cache)), role_(std::move(role)) {}

    EmbeddingVector embed(const std::string& text) const override {
        if (auto hit = cache_->get(role_, text)) return EmbeddingVector{hit->get<Vec>(), true};
        EmbeddingVector v = inner_->embed(text);
        cache_->put(role_, text, v.values);
        return v;
    }

    int dim() const override { return inner_->dim(); }

  private:
    std::shared_ptr<const TextEmbedder> inner_;
    std::shared_ptr<ProviderCache> cache_;
    std::string role_;
};

class CachedJointEmbedder final : public JointEmbedder {
  public:
    CachedJointEmbedder(std::shared_ptr<const JointEmbedder> inner, std::shared_ptr<ProviderCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    EmbeddingVector embed_text(const std::string& text) const override {
        if (auto hit = cache_->get("joint_text", text)) return EmbeddingVector{hit->get<Vec>(), true};
        EmbeddingVector v = inner_->embed_text(text);
        cache_->put("joint_text", text, v.values);
        return v;
    }

    EmbeddingVector embed_image(const std::string& image_ref) const override {
        if (auto hit = cache_->get("joint_image", image_ref)) return EmbeddingVector{hit->get<Vec>(), true};
        EmbeddingVector v = inner_->embed_image(image_ref);
        cache_->put("joint_image", image_ref, v.values);
        return v;
    }

    int dim() const override { return inner_->dim(); }

  private:
    std::shared_ptr<const JointEmbedder> inner_;
    std::shared_ptr<ProviderCache> cache_;
};

class CachedVisionTool final : public VisionTool {
  public:
    CachedVisionTool(std::shared_ptr<const VisionTool> inner, std::shared_ptr<ProviderCache> cache, ToolKind kind)
        : inner_(std::move(inner)), cache_(std::move(cache)), role_(std::string("tool_") + to_string(kind)) {}

    std::string run(const std::string& image_ref) const override {
        if (auto hit = cache_->get(role_, image_ref)) return hit->get<std::string>();
        std::string out = inner_->run(image_ref);
        cache_->put(role_, image_ref, out);
        return out;
    }

  private:
    std::shared_ptr<const VisionTool> inner_;
    std::shared_ptr<ProviderCache> cache_;
    std::string role_;
};

}  // namespace cache_detail

inline ProviderSet make_cached_provider_set(const ProviderSet& inner, std::shared_ptr<ProviderCache> cache) {
    ProviderSet out;
    out.llm = std::make_shared<cache_detail::CachedLlm>(inner.llm, cache);
    out.sentence_embedder =
        std::make_shared<cache_detail::CachedTextEmbedder>(inner.sentence_embedder, cache, "sentence");
    out.claim_embedder = std::make_shared<cache_detail::CachedTextEmbedder>(inner.claim_embedder, cache, "claim");
    out.joint_embedder = std::make_shared<cache_detail::CachedJointEmbedder>(inner.joint_embedder, cache);
    for (const auto& [kind, tool] : inner.vision_tools)
        out.vision_tools[kind] = std::make_shared<cache_detail::CachedVisionTool>(tool, cache, kind);
    out.prompts = inner.prompts;
    out.simulated_latency = inner.simulated_latency;
    return out;
}

}  // namespace diver
