#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "diver/hashing.hpp"
#include "diver/providers.hpp"
#include "diver/rng.hpp"
#include "diver/types.hpp"

namespace diver {

// ---------------------------------------------------------------------------
// Fixtures.
//
// Scripted embeddings are expressed as coefficients over named axes. Axes map
// to the first half of the embedding dimensions in registration order, while
// unfixtured inputs hash onto the second half, so a scripted vector and a
// hashed vector always have dot product exactly 0, and two scripted vectors
// have exactly the dot product their coefficients encode.
// ---------------------------------------------------------------------------

using AxisCoeffs = std::vector<std::pair<std::string, double>>;

struct FixtureSet {
    std::map<PromptId, std::map<std::string, std::string>> llm;
    std::map<std::string, AxisCoeffs> sentence_embeddings;
    std::map<std::string, AxisCoeffs> claim_embeddings;
    std::map<std::string, AxisCoeffs> joint_text;
    std::map<std::string, AxisCoeffs> joint_image;
    std::map<ToolKind, std::map<std::string, std::string>> tools;
    std::vector<std::string> axes;   // registration order fixes axis -> dimension

    int axis_index(const std::string& name) {
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (axes[i] == name) return static_cast<int>(i);
        axes.push_back(name);
        return static_cast<int>(axes.size() - 1);
    }

    int axis_index_const(const std::string& name) const {
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (axes[i] == name) return static_cast<int>(i);
        throw ConfigError("fixture axis not registered: " + name);
    }

    void register_axes_of(const AxisCoeffs& coeffs) {
        for (const auto& [name, _] : coeffs) axis_index(name);
    }

    bool mentions_image(const std::string& ref) const {
        if (joint_image.count(ref)) return true;
        for (const auto& [_, per_ref] : tools)
            if (per_ref.count(ref)) return true;
        return false;
    }

    // Registers every axis referenced by a coefficient table; keeps
    // programmatic fixture sets valid without an explicit axes list. Tables
    // are walked in a fixed order so indices stay deterministic.
    void finalize() {
        for (const auto* table : {&sentence_embeddings, &claim_embeddings, &joint_text, &joint_image})
            for (const auto& [_, coeffs] : *table) register_axes_of(coeffs);
    }
};

// Fixture value sentinels for scripting provider failures.
inline constexpr const char* kFixtureTransportError = "!!TRANSPORT_ERROR";
inline constexpr const char* kFixtureEmpty = "!!EMPTY";

namespace detail {

// Deterministic point on the unit sphere of the hash subspace [dim/2, dim).
inline Vec hash_to_sphere(std::uint64_t seed, const std::string& role, const std::string& key, int dim) {
    Vec v(dim, 0.0);
    Rng rng(keyed_seed(seed, role + "\x1f" + key));
    const int lo = dim / 2;
    double norm_sq = 0.0;
    for (int i = lo; i < dim; ++i) {
        v[i] = rng.uniform(-1.0, 1.0);
        norm_sq += v[i] * v[i];
    }
    if (norm_sq < 1e-12) {           // astronomically unlikely; keep total anyway
        v[lo] = 1.0;
        norm_sq = 1.0;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int i = lo; i < dim; ++i) v[i] *= inv;
    return v;
}

inline Vec axes_to_vector(const FixtureSet& fx, const AxisCoeffs& coeffs, int dim) {
    Vec v(dim, 0.0);
    const int budget = dim / 2;
    for (const auto& [name, coeff] : coeffs) {
        int idx = fx.axis_index_const(name);
        if (idx >= budget)
            throw ConfigError("fixture axis '" + name + "' exceeds axis budget " + std::to_string(budget) +
                              " at dim " + std::to_string(dim));
        v[idx] = coeff;
    }
    double n = norm2(v);
    if (n == 0.0) throw ConfigError("fixture embedding has zero coefficients");
    for (double& x : v) x /= n;
    return v;
}

inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?' || c == '\n' || c == ';') {
            std::string t = cur;
            std::size_t a = t.find_first_not_of(" \t\r");
            std::size_t b = t.find_last_not_of(" \t\r");
            if (a != std::string::npos) out.push_back(t.substr(a, b - a + 1));
            cur.clear();
        } else {
            cur += c;
        }
    }
    std::size_t a = cur.find_first_not_of(" \t\r");
    std::size_t b = cur.find_last_not_of(" \t\r");
    if (a != std::string::npos) out.push_back(cur.substr(a, b - a + 1));
    return out;
}

inline std::string short_sig(const std::string& s) {
    std::ostringstream os;
    os << std::hex << (fnv1a64(s) & 0xffffffffULL);
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mock LLM: fixture table first, deterministic synthesis otherwise.
// ---------------------------------------------------------------------------

class MockLlm final : public LlmProvider {
  public:
    MockLlm(std::shared_ptr<const FixtureSet> fixtures, std::uint64_t seed, unsigned jitter_ms = 0)
        : fixtures_(std::move(fixtures)), seed_(seed), jitter_ms_(jitter_ms) {}

    std::string complete(const LlmRequest& request, const std::string& rendered_prompt) const override {
        maybe_jitter();
        const std::string key = fixture_key(request);
        if (const std::string* fx = lookup(request.prompt_id, key)) {
            if (*fx == kFixtureTransportError) throw TransportError("scripted transport failure");
            if (*fx == kFixtureEmpty) return "";
            return *fx;
        }
        return synthesize(request, rendered_prompt, key);
    }

    // The variable a fixture entry is keyed on, per prompt.
    static std::string key_variable(PromptId id) {
        switch (id) {
            case PromptId::Consolidate: return "evidence";
            case PromptId::CategorizeClaim: return "claim";
            default: return "T";
        }
    }

  private:
    std::string fixture_key(const LlmRequest& request) const {
        auto it = request.variables.find(key_variable(request.prompt_id));
        return it == request.variables.end() ? std::string() : it->second;
    }

    const std::string* lookup(PromptId id, const std::string& key) const {
        auto pit = fixtures_->llm.find(id);
        if (pit == fixtures_->llm.end()) return nullptr;
        auto kit = pit->second.find(key);
        if (kit != pit->second.end()) return &kit->second;
        kit = pit->second.find("sha256:" + sha256_hex(key));
        if (kit != pit->second.end()) return &kit->second;
        return nullptr;
    }

    std::string synthesize(const LlmRequest& request, const std::string&, const std::string& key) const {
        switch (request.prompt_id) {
            case PromptId::Extract:
            case PromptId::ReExtract:
            case PromptId::Correct: {
                auto sentences = detail::split_sentences(key);
                std::ostringstream os;
                int n = 0;
                for (const auto& s : sentences) {
                    if (++n > 8) break;
                    os << n << ". " << s << "\n";
                }
                return os.str();
            }
            case PromptId::Auth:
                return "The text reads as neutral reporting without sensational or emotionally loaded phrasing. "
                       "[sig:" + detail::short_sig("auth:" + key) + "]";
            case PromptId::Contra:
                return "No internal logical contradictions were detected between the statements. "
                       "[sig:" + detail::short_sig("contra:" + key) + "]";
            case PromptId::Summarize: {
                auto sentences = detail::split_sentences(key);
                return sentences.empty() ? std::string("(empty text)") : sentences.front();
            }
            case PromptId::Consolidate: {
                std::string flat = key;
                for (char& c : flat)
                    if (c == '\n') c = ';';
                if (flat.size() > 300) flat.resize(300);
                return "Evidence summary: " + flat;
            }
            case PromptId::CategorizeClaim:
                return "";               // engine falls back to the rule-based classifier
        }
        return "";
    }

    void maybe_jitter() const {
        if (jitter_ms_ == 0) return;
        std::uint64_t t = jitter_state_.fetch_add(1, std::memory_order_relaxed);
        Rng rng(keyed_seed(seed_, "jitter" + std::to_string(t)));
        std::this_thread::sleep_for(std::chrono::milliseconds(rng.next_below(jitter_ms_)));
    }

    std::shared_ptr<const FixtureSet> fixtures_;
    std::uint64_t seed_;
    unsigned jitter_ms_;
    mutable std::atomic<std::uint64_t> jitter_state_{0};
};

// ---------------------------------------------------------------------------
// Mock text embedder: fixture axes or hash-to-unit-sphere.
// ---------------------------------------------------------------------------

class MockTextEmbedder final : public TextEmbedder {
  public:
    MockTextEmbedder(std::shared_ptr<const FixtureSet> fixtures, std::string role,
                     const std::map<std::string, AxisCoeffs>* table, std::uint64_t seed, int dim)
        : fixtures_(std::move(fixtures)), role_(std::move(role)), table_(table), seed_(seed), dim_(dim) {}

    EmbeddingVector embed(const std::string& text) const override {
        auto it = table_->find(text);
        if (it != table_->end()) return EmbeddingVector{detail::axes_to_vector(*fixtures_, it->second, dim_), true};
        return EmbeddingVector{detail::hash_to_sphere(seed_, role_, text, dim_), true};
    }

    int dim() const override { return dim_; }

  private:
    std::shared_ptr<const FixtureSet> fixtures_;
    std::string role_;
    const std::map<std::string, AxisCoeffs>* table_;
    std::uint64_t seed_;
    int dim_;
};

// ---------------------------------------------------------------------------
// Mock joint embedder. Image refs it can resolve:
//   - refs with a fixture entry (joint.image or any tool fixture),
//   - "aligned:<key>:<score>"  -> embeds so that dot(text(<key>), image) == score,
//   - "hash:<anything>"        -> plain hash-to-sphere.
// Anything else raises UnresolvableImage.
// ---------------------------------------------------------------------------

class MockJointEmbedder final : public JointEmbedder {
  public:
    MockJointEmbedder(std::shared_ptr<const FixtureSet> fixtures, std::uint64_t seed, int dim)
        : fixtures_(std::move(fixtures)), seed_(seed), dim_(dim) {}

    EmbeddingVector embed_text(const std::string& text) const override {
        auto it = fixtures_->joint_text.find(text);
        if (it != fixtures_->joint_text.end())
            return EmbeddingVector{detail::axes_to_vector(*fixtures_, it->second, dim_), true};
        return EmbeddingVector{detail::hash_to_sphere(seed_, "joint_text", text, dim_), true};
    }

    EmbeddingVector embed_image(const std::string& image_ref) const override {
        auto it = fixtures_->joint_image.find(image_ref);
        if (it != fixtures_->joint_image.end())
            return EmbeddingVector{detail::axes_to_vector(*fixtures_, it->second, dim_), true};
        std::string key;
        double score = 0.0;
        if (parse_aligned(image_ref, key, score)) {
            Vec t = embed_text(key).values;
            Vec u = detail::hash_to_sphere(seed_, "joint_orth", key, dim_);
            double proj = dot(u, t);   // orthogonalize against via Gram-Schmidt
            axpy(u, -proj, t);
            double n = norm2(u);
            if (n < 1e-9) throw UnresolvableImage("degenerate aligned ref: " + image_ref);
            for (double& x : u) x /= n;
            Vec img = scaled(t, score);
            axpy(img, std::sqrt(std::max(0.0, 1.0 - score * score)), u);
            return EmbeddingVector{std::move(img), true};
        }
        if (image_ref.rfind("hash:", 0) == 0)
            return EmbeddingVector{detail::hash_to_sphere(seed_, "joint_image", image_ref, dim_), true};
        if (fixtures_->mentions_image(image_ref))
            return EmbeddingVector{detail::hash_to_sphere(seed_, "joint_image", image_ref, dim_), true};
        throw UnresolvableImage("unknown image handle: " + image_ref);
    }

    int dim() const override { return dim_; }

    static bool parse_aligned(const std::string& ref, std::string& key, double& score) {
        if (ref.rfind("aligned:", 0) != 0) return false;
        std::size_t last = ref.find_last_of(':');
        if (last == 7) return false;   // no score part
        key = ref.substr(8, last - 8);
        try {
            score = std::stod(ref.substr(last + 1));
        } catch (...) {
            return false;
        }
        return !key.empty() && score >= -1.0 && score <= 1.0;
    }

  private:
    std::shared_ptr<const FixtureSet> fixtures_;
    std::uint64_t seed_;
    int dim_;
};

// ---------------------------------------------------------------------------
// Mock vision tools.
// ---------------------------------------------------------------------------

class MockVisionTool final : public VisionTool {
  public:
    MockVisionTool(std::shared_ptr<const FixtureSet> fixtures, ToolKind kind, std::uint64_t seed)
        : fixtures_(std::move(fixtures)), kind_(kind), seed_(seed) {}

    std::string run(const std::string& image_ref) const override {
        auto tit = fixtures_->tools.find(kind_);
        if (tit != fixtures_->tools.end()) {
            auto rit = tit->second.find(image_ref);
            if (rit != tit->second.end()) {
                if (rit->second == kFixtureTransportError) throw TransportError("scripted tool failure");
                if (rit->second == kFixtureEmpty) return "";
                return rit->second;
            }
        }
        if (!resolvable(image_ref)) throw UnresolvableImage("unknown image handle: " + image_ref);
        return synthesize(image_ref);
    }

  private:
    bool resolvable(const std::string& ref) const {
        return fixtures_->mentions_image(ref) || ref.rfind("aligned:", 0) == 0 || ref.rfind("hash:", 0) == 0;
    }

    std::string synthesize(const std::string& ref) const {
        const std::string sig = detail::short_sig(std::to_string(seed_) + ":" + ref);
        switch (kind_) {
            case ToolKind::OCR: return "";   // most images carry no legible text
            case ToolKind::ImageCaptioning: return "a photo of scene " + sig;
            case ToolKind::DenseCaptioning: return "a wide view of scene " + sig + "\na close-up detail of scene " + sig;
            case ToolKind::ImageTagging: return "photo\nscene-" + sig;
        }
        return "";
    }

    std::shared_ptr<const FixtureSet> fixtures_;
    ToolKind kind_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Fixture directory loading. All files optional:
//   llm.json        {"Extract": {"<key>": "<completion>"}, ...}
//   embeddings.json {"sentence": {"<text>": {"axis": coeff}}, "claim": {...}}
//   joint.json      {"text": {...}, "image": {...}}
//   tools.json      {"OCR": {"<ref>": "<output>"}, ...}
// Axis order is fixed by a top-level "axes" list when present, otherwise by
// first appearance.
// ---------------------------------------------------------------------------

namespace detail {

inline AxisCoeffs parse_axis_coeffs(const nlohmann::json& j) {
    AxisCoeffs out;
    for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), it.value().get<double>());
    return out;
}

inline void load_embedding_table(FixtureSet& fx, const nlohmann::json& j,
                                 std::map<std::string, AxisCoeffs>& table) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        AxisCoeffs coeffs = parse_axis_coeffs(it.value());
        fx.register_axes_of(coeffs);
        table[it.key()] = std::move(coeffs);
    }
}

inline bool try_read_json(const std::string& path, nlohmann::json& out) {
    std::ifstream in(path);
    if (!in) return false;
    try {
        in >> out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("fixture file " + path + ": " + e.what());
    }
    return true;
}

}  // namespace detail

inline FixtureSet load_fixture_dir(const std::string& dir) {
    FixtureSet fx;
    nlohmann::json j;
    if (detail::try_read_json(dir + "/embeddings.json", j)) {
        if (j.contains("axes"))
            for (const auto& a : j["axes"]) fx.axis_index(a.get<std::string>());
        if (j.contains("sentence")) detail::load_embedding_table(fx, j["sentence"], fx.sentence_embeddings);
        if (j.contains("claim")) detail::load_embedding_table(fx, j["claim"], fx.claim_embeddings);
    }
    if (detail::try_read_json(dir + "/joint.json", j)) {
        if (j.contains("axes"))
            for (const auto& a : j["axes"]) fx.axis_index(a.get<std::string>());
        if (j.contains("text")) detail::load_embedding_table(fx, j["text"], fx.joint_text);
        if (j.contains("image")) detail::load_embedding_table(fx, j["image"], fx.joint_image);
    }
    if (detail::try_read_json(dir + "/llm.json", j)) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for (PromptId id : kAllPromptIds) {
                if (it.key() == to_string(id)) {
                    for (auto e = it.value().begin(); e != it.value().end(); ++e)
                        fx.llm[id][e.key()] = e.value().get<std::string>();
                    known = true;
                    break;
                }
            }
            if (!known) throw DataError("llm.json: unknown prompt id " + it.key());
        }
    }
    if (detail::try_read_json(dir + "/tools.json", j)) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for (ToolKind k : kAllToolKinds) {
                if (it.key() == to_string(k)) {
                    for (auto e = it.value().begin(); e != it.value().end(); ++e)
                        fx.tools[k][e.key()] = e.value().get<std::string>();
                    known = true;
                    break;
                }
            }
            if (!known) throw DataError("tools.json: unknown tool kind " + it.key());
        }
    }
    return fx;
}

inline ProviderSet make_mock_provider_set(const PipelineConfig& config, FixtureSet fixtures,
                                          PromptLibrary prompts, unsigned llm_jitter_ms = 0) {
    fixtures.finalize();
    auto fx = std::make_shared<const FixtureSet>(std::move(fixtures));
    ProviderSet set;
    set.llm = std::make_shared<MockLlm>(fx, config.seed, llm_jitter_ms);
    set.sentence_embedder = std::make_shared<MockTextEmbedder>(fx, "sentence", &fx->sentence_embeddings,
                                                               config.seed, config.feature_dim_text);
    set.claim_embedder = std::make_shared<MockTextEmbedder>(fx, "claim", &fx->claim_embeddings, config.seed,
                                                            config.feature_dim_text);
    set.joint_embedder = std::make_shared<MockJointEmbedder>(fx, config.seed, config.feature_dim_joint);
    for (ToolKind k : kAllToolKinds)
        set.vision_tools[k] = std::make_shared<MockVisionTool>(fx, k, config.seed);
    set.prompts = std::move(prompts);
    set.simulated_latency = true;
    return set;
}

}  // namespace diver
