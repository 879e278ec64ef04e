#pragma once

// Local stub server exposing a ProviderSet (normally the mocks) over the
// JSON-over-HTTP wire format the HTTP providers speak. Used to run the shared
// provider contract suite against the HTTP client implementations.

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "diver/providers.hpp"

namespace diver_tests {

class ProviderStubServer {
  public:
    explicit ProviderStubServer(diver::ProviderSet backing) : backing_(std::move(backing)) {
        using nlohmann::json;

        server_.Post("/llm", [this](const httplib::Request& req, httplib::Response& res) {
            if (fail_and_count()) return fail(res);
            handle(res, [&]() -> json {
                const json body = json::parse(req.body);
                diver::LlmRequest r;
                for (diver::PromptId id : diver::kAllPromptIds)
                    if (body.at("prompt_id") == to_string(id)) r.prompt_id = id;
                r.variables = body.at("variables").get<std::map<std::string, std::string>>();
                r.temperature = body.at("temperature").get<double>();
                r.max_context_tokens = body.at("max_context_tokens").get<int>();
                return json{{"completion", backing_.llm->complete(r, body.at("prompt").get<std::string>())}};
            });
        });

        auto embed_route = [this](const diver::TextEmbedder& embedder) {
            return [this, &embedder](const httplib::Request& req, httplib::Response& res) {
                if (fail_and_count()) return fail(res);
                handle(res, [&]() -> json {
                    const json body = json::parse(req.body);
                    return json{{"embedding", embedder.embed(body.at("text").get<std::string>()).values}};
                });
            };
        };
        server_.Post("/embed/sentence", embed_route(*backing_.sentence_embedder));
        server_.Post("/embed/claim", embed_route(*backing_.claim_embedder));

        server_.Post("/joint", [this](const httplib::Request& req, httplib::Response& res) {
            if (fail_and_count()) return fail(res);
            handle(res, [&]() -> json {
                const json body = json::parse(req.body);
                const std::string payload = body.at("payload").get<std::string>();
                const diver::EmbeddingVector v = body.at("mode") == "image"
                                                     ? backing_.joint_embedder->embed_image(payload)
                                                     : backing_.joint_embedder->embed_text(payload);
                return json{{"embedding", v.values}};
            });
        });

        server_.Post("/tool", [this](const httplib::Request& req, httplib::Response& res) {
            if (fail_and_count()) return fail(res);
            handle(res, [&]() -> json {
                const json body = json::parse(req.body);
                diver::ToolKind kind = diver::ToolKind::OCR;
                for (diver::ToolKind k : diver::kAllToolKinds)
                    if (body.at("tool") == to_string(k)) kind = k;
                return json{{"text", backing_.vision_tools.at(kind)->run(body.at("image").get<std::string>())}};
            });
        });

        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~ProviderStubServer() {
        server_.stop();
        thread_.join();
    }

    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    // next `n` requests (any route) answer HTTP 500
    void fail_next(int n) { fail_counter_ = n; }

  private:
    template <typename Fn>
    static void handle(httplib::Response& res, Fn&& fn) {
        try {
            res.set_content(fn().dump(), "application/json");
        } catch (const diver::UnresolvableImage& e) {
            res.status = 422;
            res.set_content(nlohmann::json{{"error", "unresolvable_image"}, {"message", e.what()}}.dump(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump(),
                            "application/json");
        }
    }

    bool fail_and_count() {
        int current = fail_counter_.load();
        while (current > 0) {
            if (fail_counter_.compare_exchange_weak(current, current - 1)) return true;
        }
        return false;
    }

    static void fail(httplib::Response& res) {
        res.status = 500;
        res.set_content("{\"error\": \"scripted failure\"}", "application/json");
    }

    diver::ProviderSet backing_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> fail_counter_{0};
};

}  // namespace diver_tests
