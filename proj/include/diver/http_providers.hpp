#pragma once

#include <cstdlib>
#include <fstream>
#include <memory>
#include <semaphore>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "diver/providers.hpp"
#include "diver/types.hpp"

namespace diver {

struct HttpEndpoint {
    std::string url;                 // http://host:port/path
    std::string auth_token_env;      // environment variable holding the bearer token
    int timeout_ms = 30000;
    int max_in_flight = 8;
};

namespace http_detail {

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path = "/";
};

inline ParsedUrl parse_url(const std::string& url) {
    const std::string prefix = "http://";
    if (url.rfind(prefix, 0) != 0) throw ConfigError("provider url must start with http:// : " + url);
    ParsedUrl out;
    std::string rest = url.substr(prefix.size());
    const std::size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    const std::size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
        out.host = hostport;
    } else {
        out.host = hostport.substr(0, colon);
        out.port = std::stoi(hostport.substr(colon + 1));
    }
    if (out.host.empty()) throw ConfigError("provider url has no host: " + url);
    return out;
}

// One endpoint with a per-provider in-flight limit. A fresh connection per
// request keeps the client trivially safe for concurrent use.
class Endpoint {
  public:
    explicit Endpoint(HttpEndpoint cfg)
        : cfg_(std::move(cfg)), parsed_(parse_url(cfg_.url)),
          slots_(std::max(1, cfg_.max_in_flight)) {}

    nlohmann::json post_json(const nlohmann::json& body) const {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<256>& s;
            ~Release() { s.release(); }
        } release{slots_};

        httplib::Client client(parsed_.host, parsed_.port);
        client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!cfg_.auth_token_env.empty()) {
            const char* token = std::getenv(cfg_.auth_token_env.c_str());
            if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
        }
        auto res = client.Post(parsed_.path, headers, body.dump(), "application/json");
        if (!res) throw TransportError("no response from " + cfg_.url);
        if (res->status == 422) {
            try {
                nlohmann::json err = nlohmann::json::parse(res->body);
                if (err.value("error", "") == "unresolvable_image")
                    throw UnresolvableImage(err.value("message", "unresolvable image"));
            } catch (const nlohmann::json::exception&) {
            }
            throw TransportError("unprocessable request at " + cfg_.url + ": " + res->body);
        }
        if (res->status != 200)
            throw TransportError("HTTP " + std::to_string(res->status) + " from " + cfg_.url);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError("bad JSON from " + cfg_.url + ": " + e.what());
        }
    }

  private:
    HttpEndpoint cfg_;
    ParsedUrl parsed_;
    mutable std::counting_semaphore<256> slots_;
};

}  // namespace http_detail

class HttpLlmProvider final : public LlmProvider {
  public:
    explicit HttpLlmProvider(HttpEndpoint cfg) : endpoint_(std::move(cfg)) {}

    std::string complete(const LlmRequest& request, const std::string& rendered_prompt) const override {
        nlohmann::json body;
        body["prompt_id"] = to_string(request.prompt_id);
        body["prompt"] = rendered_prompt;
        body["variables"] = request.variables;   // for services doing their own templating
        body["temperature"] = request.temperature;
        body["max_context_tokens"] = request.max_context_tokens;
        nlohmann::json res = endpoint_.post_json(body);
        if (!res.contains("completion")) throw TransportError("llm response missing 'completion'");
        return res["completion"].get<std::string>();
    }

  private:
    http_detail::Endpoint endpoint_;
};

class HttpTextEmbedder final : public TextEmbedder {
  public:
    HttpTextEmbedder(HttpEndpoint cfg, int dim) : endpoint_(std::move(cfg)), dim_(dim) {}

    EmbeddingVector embed(const std::string& text) const override {
        nlohmann::json res = endpoint_.post_json({{"text", text}});
        if (!res.contains("embedding")) throw TransportError("embedder response missing 'embedding'");
        return EmbeddingVector{res["embedding"].get<Vec>(), true};
    }

    int dim() const override { return dim_; }

  private:
    http_detail::Endpoint endpoint_;
    int dim_;
};

class HttpJointEmbedder final : public JointEmbedder {
  public:
    HttpJointEmbedder(HttpEndpoint cfg, int dim) : endpoint_(std::move(cfg)), dim_(dim) {}

    EmbeddingVector embed_text(const std::string& text) const override {
        nlohmann::json res = endpoint_.post_json({{"mode", "text"}, {"payload", text}});
        if (!res.contains("embedding")) throw TransportError("joint response missing 'embedding'");
        return EmbeddingVector{res["embedding"].get<Vec>(), true};
    }

    EmbeddingVector embed_image(const std::string& image_ref) const override {
        nlohmann::json res = endpoint_.post_json({{"mode", "image"}, {"payload", image_ref}});
        if (!res.contains("embedding")) throw TransportError("joint response missing 'embedding'");
        return EmbeddingVector{res["embedding"].get<Vec>(), true};
    }

    int dim() const override { return dim_; }

  private:
    http_detail::Endpoint endpoint_;
    int dim_;
};

class HttpVisionTool final : public VisionTool {
  public:
    HttpVisionTool(HttpEndpoint cfg, ToolKind kind) : endpoint_(std::move(cfg)), kind_(kind) {}

    std::string run(const std::string& image_ref) const override {
        nlohmann::json res = endpoint_.post_json({{"tool", to_string(kind_)}, {"image", image_ref}});
        if (!res.contains("text")) throw TransportError("tool response missing 'text'");
        return res["text"].get<std::string>();
    }

  private:
    http_detail::Endpoint endpoint_;
    ToolKind kind_;
};

// Endpoint configuration document:
// {
//   "llm": {"url": ..., "auth_token_env": ..., "timeout_ms": ..., "max_in_flight": ...},
//   "sentence_embedder": {...}, "claim_embedder": {...}, "joint_embedder": {...},
//   "vision_tools": {"OCR": {...}, "ImageCaptioning": {...}, ...}
// }
inline HttpEndpoint endpoint_from_json(const nlohmann::json& j) {
    HttpEndpoint e;
    e.url = j.at("url").get<std::string>();
    e.auth_token_env = j.value("auth_token_env", "");
    e.timeout_ms = j.value("timeout_ms", 30000);
    e.max_in_flight = j.value("max_in_flight", 8);
    return e;
}

inline ProviderSet make_http_provider_set(const nlohmann::json& endpoints, const PipelineConfig& config,
                                          PromptLibrary prompts) {
    ProviderSet set;
    set.llm = std::make_shared<HttpLlmProvider>(endpoint_from_json(endpoints.at("llm")));
    set.sentence_embedder = std::make_shared<HttpTextEmbedder>(
        endpoint_from_json(endpoints.at("sentence_embedder")), config.feature_dim_text);
    set.claim_embedder = std::make_shared<HttpTextEmbedder>(endpoint_from_json(endpoints.at("claim_embedder")),
                                                            config.feature_dim_text);
    set.joint_embedder = std::make_shared<HttpJointEmbedder>(endpoint_from_json(endpoints.at("joint_embedder")),
                                                             config.feature_dim_joint);
    const auto& tools = endpoints.at("vision_tools");
    for (ToolKind k : kAllToolKinds)
        set.vision_tools[k] = std::make_shared<HttpVisionTool>(endpoint_from_json(tools.at(to_string(k))), k);
    set.prompts = std::move(prompts);
    set.simulated_latency = false;
    return set;
}

inline ProviderSet load_http_provider_set(const std::string& endpoints_path, const PipelineConfig& config,
                                          PromptLibrary prompts) {
    std::ifstream in(endpoints_path);
    if (!in) throw IoError("cannot open provider endpoints: " + endpoints_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("provider endpoints " + endpoints_path + ": " + e.what());
    }
    return make_http_provider_set(j, config, std::move(prompts));
}

}  // namespace diver
