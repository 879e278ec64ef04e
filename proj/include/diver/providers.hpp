#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include "diver/errors.hpp"
#include "diver/linalg.hpp"
#include "diver/types.hpp"

namespace diver {

enum class PromptId { Extract, Auth, Contra, Correct, ReExtract, Summarize, Consolidate, CategorizeClaim };

inline const char* to_string(PromptId p) {
    switch (p) {
        case PromptId::Extract: return "Extract";
        case PromptId::Auth: return "Auth";
        case PromptId::Contra: return "Contra";
        case PromptId::Correct: return "Correct";
        case PromptId::ReExtract: return "ReExtract";
        case PromptId::Summarize: return "Summarize";
        case PromptId::Consolidate: return "Consolidate";
        case PromptId::CategorizeClaim: return "CategorizeClaim";
    }
    return "Extract";
}

inline const char* prompt_file_name(PromptId p) {
    switch (p) {
        case PromptId::Extract: return "extract.txt";
        case PromptId::Auth: return "auth.txt";
        case PromptId::Contra: return "contra.txt";
        case PromptId::Correct: return "correct.txt";
        case PromptId::ReExtract: return "re_extract.txt";
        case PromptId::Summarize: return "summarize.txt";
        case PromptId::Consolidate: return "consolidate.txt";
        case PromptId::CategorizeClaim: return "categorize.txt";
    }
    return "extract.txt";
}

constexpr PromptId kAllPromptIds[] = {PromptId::Extract,   PromptId::Auth,      PromptId::Contra,
                                      PromptId::Correct,   PromptId::ReExtract, PromptId::Summarize,
                                      PromptId::Consolidate, PromptId::CategorizeClaim};

struct LlmRequest {
    PromptId prompt_id = PromptId::Extract;
    std::map<std::string, std::string> variables;
    double temperature = 0.4;
    int max_context_tokens = 4096;
};

// Provider-agnostic context-budget estimate, deliberately crude and monotone.
inline std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

struct EmbeddingVector {
    Vec values;
    bool normalized = false;

    int dim() const { return static_cast<int>(values.size()); }

    void validate() const {
        if (values.empty()) throw DataError("EmbeddingVector: empty");
        if (normalized) {
            double n = norm2(values);
            if (std::abs(n - 1.0) > 1e-6)
                throw DataError("EmbeddingVector: normalized flag set but |v| = " + std::to_string(n));
        }
    }
};

inline EmbeddingVector unit_normalized(Vec v) {
    double n = norm2(v);
    if (n == 0.0) throw ZeroVectorError("cannot normalize zero vector");
    for (double& x : v) x /= n;
    return EmbeddingVector{std::move(v), true};
}

// UTF-8 prompt templates with {{name}} placeholders, one file per prompt id.
class PromptLibrary {
  public:
    PromptLibrary() = default;

    static PromptLibrary load_dir(const std::string& dir) {
        PromptLibrary lib;
        for (PromptId id : kAllPromptIds) {
            const std::string path = dir + "/" + prompt_file_name(id);
            std::ifstream in(path);
            if (!in) throw IoError("missing prompt template: " + path);
            std::ostringstream body;
            body << in.rdbuf();
            lib.templates_[id] = body.str();
        }
        return lib;
    }

    void set_template(PromptId id, std::string body) { templates_[id] = std::move(body); }

    const std::string& template_text(PromptId id) const {
        auto it = templates_.find(id);
        if (it == templates_.end()) throw ConfigError(std::string("no template for prompt ") + to_string(id));
        return it->second;
    }

    std::string render(PromptId id, const std::map<std::string, std::string>& variables) const {
        const std::string& tpl = template_text(id);
        std::string out;
        out.reserve(tpl.size());
        std::size_t pos = 0;
        while (pos < tpl.size()) {
            std::size_t open = tpl.find("{{", pos);
            if (open == std::string::npos) {
                out.append(tpl, pos, std::string::npos);
                break;
            }
            out.append(tpl, pos, open - pos);
            std::size_t close = tpl.find("}}", open + 2);
            if (close == std::string::npos)
                throw ConfigError(std::string("unterminated placeholder in template ") + to_string(id));
            std::string name = tpl.substr(open + 2, close - open - 2);
            auto it = variables.find(name);
            if (it == variables.end())
                throw MissingVariable(std::string("prompt ") + to_string(id) + ": missing variable " + name);
            out += it->second;
            pos = close + 2;
        }
        return out;
    }

  private:
    std::map<PromptId, std::string> templates_;
};

// ---------------------------------------------------------------------------
// Provider interfaces. Implementations must be stateless after construction
// and safe for concurrent calls.
// ---------------------------------------------------------------------------

class LlmProvider {
  public:
    virtual ~LlmProvider() = default;
    // `rendered_prompt` is the template with variables substituted; mocks may
    // key their fixtures off the raw request instead.
    virtual std::string complete(const LlmRequest& request, const std::string& rendered_prompt) const = 0;
};

class TextEmbedder {
  public:
    virtual ~TextEmbedder() = default;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
    virtual int dim() const = 0;
};

class JointEmbedder {
  public:
    virtual ~JointEmbedder() = default;
    virtual EmbeddingVector embed_text(const std::string& text) const = 0;
    virtual EmbeddingVector embed_image(const std::string& image_ref) const = 0;
    virtual int dim() const = 0;
};

class VisionTool {
  public:
    virtual ~VisionTool() = default;
    // Output is one item per line (OCR strings, caption, dense captions, tags).
    virtual std::string run(const std::string& image_ref) const = 0;
};

struct ProviderSet {
    std::shared_ptr<const LlmProvider> llm;
    std::shared_ptr<const TextEmbedder> sentence_embedder;   // global consistency + f_* encodings
    std::shared_ptr<const TextEmbedder> claim_embedder;      // refutation-score embeddings
    std::shared_ptr<const JointEmbedder> joint_embedder;
    std::map<ToolKind, std::shared_ptr<const VisionTool>> vision_tools;
    PromptLibrary prompts;
    bool simulated_latency = true;   // deterministic wall_ms (mock mode); HTTP sets false

    void validate() const {
        if (!llm || !sentence_embedder || !claim_embedder || !joint_embedder)
            throw ConfigError("ProviderSet: missing provider role");
        for (ToolKind k : kAllToolKinds)
            if (!vision_tools.count(k))
                throw ConfigError(std::string("ProviderSet: missing vision tool ") + to_string(k));
    }
};

// Renders, enforces the context budget, and dispatches. The raw completion is
// returned as-is; trace accounting happens in the engine gateway.
inline std::string llm_complete(const LlmProvider& llm, const PromptLibrary& prompts, const LlmRequest& request,
                                std::string* rendered_out = nullptr) {
    if (request.temperature < 0.0 || request.temperature > 2.0)
        throw ConfigError("LlmRequest: temperature out of [0,2]");
    const std::string rendered = prompts.render(request.prompt_id, request.variables);
    const std::int64_t est = estimate_tokens(rendered);
    if (est > request.max_context_tokens)
        throw ContextOverflow(std::string("prompt ") + to_string(request.prompt_id) + " estimated " +
                              std::to_string(est) + " tokens > limit " +
                              std::to_string(request.max_context_tokens));
    if (rendered_out) *rendered_out = rendered;
    return llm.complete(request, rendered);
}

inline EmbeddingVector embed_text(const TextEmbedder& embedder, const std::string& text) {
    if (text.empty()) throw DataError("embed_text: empty text");
    EmbeddingVector v = embedder.embed(text);
    v.validate();
    return v;
}

inline EmbeddingVector embed_joint_text(const JointEmbedder& embedder, const std::string& text) {
    if (text.empty()) throw DataError("embed_joint: empty text");
    EmbeddingVector v = embedder.embed_text(text);
    v.validate();
    return v;
}

inline EmbeddingVector embed_joint_image(const JointEmbedder& embedder, const std::string& image_ref) {
    EmbeddingVector v = embedder.embed_image(image_ref);
    v.validate();
    return v;
}

inline std::string run_vision_tool(const VisionTool& tool, const std::string& image_ref) {
    return tool.run(image_ref);
}

}  // namespace diver
