#include <gtest/gtest.h>

#include "diver/engine.hpp"
#include "diver/gateway.hpp"
#include "diver/http_providers.hpp"
#include "diver/mock_providers.hpp"
#include "http_stub.hpp"
#include "provider_contract.hpp"

using namespace diver;

namespace {

PromptLibrary prompts() { return PromptLibrary::load_dir(std::string(DIVER_ASSETS_DIR) + "/prompts"); }

PipelineConfig cfg32() {
    PipelineConfig cfg;
    cfg.feature_dim_text = 32;
    cfg.feature_dim_joint = 32;
    cfg.fusion_dims.d = 32;
    cfg.seed = 42;
    return cfg;
}

nlohmann::json endpoints_for(const std::string& base) {
    nlohmann::json tools;
    for (ToolKind k : kAllToolKinds) tools[to_string(k)] = {{"url", base + "/tool"}};
    return nlohmann::json{{"llm", {{"url", base + "/llm"}}},
                          {"sentence_embedder", {{"url", base + "/embed/sentence"}}},
                          {"claim_embedder", {{"url", base + "/embed/claim"}}},
                          {"joint_embedder", {{"url", base + "/joint"}}},
                          {"vision_tools", tools}};
}

}  // namespace

// The HTTP implementations must satisfy the same operation contracts as the
// mocks; the stub server simply forwards to a mock set.
TEST(HttpProviders, ContractSuiteThroughLocalStub) {
    PipelineConfig cfg = cfg32();
    diver_tests::ProviderStubServer stub(make_mock_provider_set(cfg, diver_tests::contract_fixtures(), prompts()));
    ProviderSet http = make_http_provider_set(endpoints_for(stub.base_url()), cfg, prompts());
    diver_tests::run_provider_contract_suite(http, cfg);
}

TEST(HttpProviders, GatewayRetriesTransientFailures) {
    PipelineConfig cfg = cfg32();
    diver_tests::ProviderStubServer stub(make_mock_provider_set(cfg, FixtureSet{}, prompts()));
    ProviderSet http = make_http_provider_set(endpoints_for(stub.base_url()), cfg, prompts());
    PipelineTrace trace;
    ProviderGateway gw(http, cfg, &trace);

    stub.fail_next(2);   // two 500s, third attempt succeeds
    const std::string out = gw.complete(PromptId::Summarize, {{"T", "retry works"}}, "summarize");
    EXPECT_EQ(out, "retry works");
    EXPECT_EQ(trace.provider_calls.size(), 1u);

    stub.fail_next(3);   // exhausts the retry budget
    EXPECT_THROW(gw.complete(PromptId::Summarize, {{"T", "retry fails"}}, "summarize"), TransportError);
}

TEST(HttpProviders, EndToEndPipelineThroughHttp) {
    PipelineConfig cfg = cfg32();
    diver_tests::ProviderStubServer stub(make_mock_provider_set(cfg, FixtureSet{}, prompts()));
    ProviderSet http = make_http_provider_set(endpoints_for(stub.base_url()), cfg, prompts());

    NewsItem item{"http-1", "city skyline at dusk", "aligned:city skyline at dusk:0.90", 0};
    RunResult r = run_pipeline(item, cfg, http, init_params(cfg.fusion_dims, cfg.seed));
    ASSERT_FALSE(r.trace.errored) << r.trace.error;
    EXPECT_TRUE(r.trace.skipped_forensics());
    // measured latency mode: wall_ms is real time, still non-negative
    for (const auto& c : r.trace.provider_calls) EXPECT_GE(c.wall_ms, 0);
}

TEST(HttpProviders, BadUrlRejected) {
    EXPECT_THROW(http_detail::parse_url("ftp://x"), ConfigError);
    EXPECT_THROW(http_detail::parse_url("http:///path"), ConfigError);
    auto p = http_detail::parse_url("http://localhost:8080/llm");
    EXPECT_EQ(p.host, "localhost");
    EXPECT_EQ(p.port, 8080);
    EXPECT_EQ(p.path, "/llm");
}
