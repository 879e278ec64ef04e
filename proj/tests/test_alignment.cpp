#include <gtest/gtest.h>

#include "diver/alignment.hpp"
#include "diver/mock_providers.hpp"
#include "diver/rng.hpp"

using namespace diver;

TEST(GateAction, BoundaryGoesToSkip) {
    EXPECT_EQ(decide_gate_action(0.29, 0.29), GateAction::SkipForensics);
    EXPECT_EQ(decide_gate_action(0.28, 0.29), GateAction::ProceedToForensics);
    EXPECT_EQ(decide_gate_action(1.0, 0.0), GateAction::SkipForensics);
}

TEST(GateAction, MatchesClosedFormPredicateOnGrid) {
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            const double s = i / 99.0;
            const double beta = j / 99.0;
            const GateAction got = decide_gate_action(s, beta);
            const GateAction want = s >= beta ? GateAction::SkipForensics : GateAction::ProceedToForensics;
            ASSERT_EQ(got, want) << "s=" << s << " beta=" << beta;
        }
    }
}

TEST(GateAction, MonotoneInScore) {
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
        const double beta = rng.next_double();
        const double s = rng.next_double();
        const double bump = rng.next_double() * (1.0 - s);
        if (decide_gate_action(s, beta) == GateAction::SkipForensics)
            EXPECT_EQ(decide_gate_action(s + bump, beta), GateAction::SkipForensics);
    }
}

namespace {

PipelineConfig align_config() {
    PipelineConfig cfg;
    cfg.feature_dim_text = 16;
    cfg.feature_dim_joint = 16;
    cfg.fusion_dims.d = 16;
    return cfg;
}

ClaimSet claims_of(std::initializer_list<const char*> statements) {
    ClaimSet set;
    for (const char* s : statements) set.claims.push_back(Claim{s, ClaimCategory::General});
    return set;
}

}  // namespace

TEST(AlignmentScore, IdenticalPairScoresOne) {
    FixtureSet fx;
    fx.joint_text["a city park"] = {{"park", 1.0}};
    fx.joint_image["park.img"] = {{"park", 1.0}};
    PipelineConfig cfg = align_config();
    ProviderSet set = make_mock_provider_set(cfg, std::move(fx),
                                             PromptLibrary::load_dir(std::string(DIVER_ASSETS_DIR) + "/prompts"));
    ProviderGateway gw(set, cfg, nullptr);
    AlignmentReport r = alignment_score(claims_of({"a city park"}), "park.img", gw, Aggregation::Mean);
    EXPECT_DOUBLE_EQ(r.s_inter, 1.0);
    ASSERT_EQ(r.per_claim.size(), 1u);
    EXPECT_DOUBLE_EQ(r.per_claim[0].second, 1.0);
}

TEST(AlignmentScore, MeanAndMinAggregation) {
    FixtureSet fx;
    fx.joint_text["claim a"] = {{"ax_a", 1.0}};
    fx.joint_text["claim b"] = {{"ax_b", 1.0}};
    // image components: 0.2 on ax_a, 0.6 on ax_b, remainder orthogonal
    fx.joint_image["two.img"] = {{"ax_a", 0.2}, {"ax_b", 0.6}, {"ax_rest", 0.7745966692414834}};
    PipelineConfig cfg = align_config();
    ProviderSet set = make_mock_provider_set(cfg, std::move(fx),
                                             PromptLibrary::load_dir(std::string(DIVER_ASSETS_DIR) + "/prompts"));
    ProviderGateway gw(set, cfg, nullptr);

    AlignmentReport mean = alignment_score(claims_of({"claim a", "claim b"}), "two.img", gw, Aggregation::Mean);
    EXPECT_NEAR(mean.s_inter, 0.4, 1e-9);
    AlignmentReport mn = alignment_score(claims_of({"claim a", "claim b"}), "two.img", gw, Aggregation::Min);
    EXPECT_NEAR(mn.s_inter, 0.2, 1e-9);
    EXPECT_LE(mn.s_inter, mean.s_inter);
}

TEST(AlignmentScore, EmptyClaimSetRaises) {
    PipelineConfig cfg = align_config();
    ProviderSet set = make_mock_provider_set(cfg, FixtureSet{},
                                             PromptLibrary::load_dir(std::string(DIVER_ASSETS_DIR) + "/prompts"));
    ProviderGateway gw(set, cfg, nullptr);
    EXPECT_THROW(alignment_score(ClaimSet{}, "hash:x", gw, Aggregation::Mean), DataError);
}

TEST(AlignmentScore, AggregationEqualsReportedReduction) {
    // s_inter must equal the aggregation of per_claim to 1e-9 on arbitrary inputs
    PipelineConfig cfg = align_config();
    ProviderSet set = make_mock_provider_set(cfg, FixtureSet{},
                                             PromptLibrary::load_dir(std::string(DIVER_ASSETS_DIR) + "/prompts"));
    ProviderGateway gw(set, cfg, nullptr);
    ClaimSet claims = claims_of({"first unscripted claim", "second unscripted claim", "third one"});
    for (Aggregation agg : {Aggregation::Mean, Aggregation::Min}) {
        AlignmentReport r = alignment_score(claims, "hash:random.img", gw, agg);
        EXPECT_LE(r.s_inter, 1.0 + 1e-12);
        EXPECT_GE(r.s_inter, -1.0 - 1e-12);
        double mean = 0.0, mn = r.per_claim.front().second;
        for (const auto& [_, v] : r.per_claim) {
            mean += v;
            mn = std::min(mn, v);
        }
        mean /= static_cast<double>(r.per_claim.size());
        EXPECT_NEAR(r.s_inter, agg == Aggregation::Mean ? mean : mn, 1e-9);
        EXPECT_LE(mn, mean + 1e-12);
    }
}
