#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "diver/fusion.hpp"
#include "diver/rng.hpp"
#include "mathcheck/mathcheck.hpp"

using namespace diver;

namespace {

// Test-local forward pass that never touches branches outside `active`.
// Mirrors the canonical evaluation order (ascending branch index, plain
// index-order reductions) so agreement with the library must be bit-exact.
double forward_excluding(const FeatureBank& bank, const FusionParams& prm, const std::vector<int>& active) {
    const std::size_t d = prm.W_p.cols, d_p = prm.W_p.rows, d_h = prm.W_Q.rows;
    auto matvec_plain = [](const Mat& m, const Vec& x) {
        Vec y(m.rows, 0.0);
        for (std::size_t r = 0; r < m.rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < m.cols; ++c) acc += m.data[r * m.cols + c] * x[c];
            y[r] = acc;
        }
        return y;
    };

    std::vector<Vec> fhat;
    for (int k : active) {
        Vec h = matvec_plain(prm.W_p, bank.features[k]);
        for (std::size_t i = 0; i < d_p; ++i) h[i] = std::tanh(h[i] + prm.b_p[i]);
        double z = 0.0;
        for (std::size_t i = 0; i < d_p; ++i) z += prm.w_mu[i] * h[i];
        const double mu = 1.0 / (1.0 + std::exp(-z));
        Vec fh(d);
        for (std::size_t i = 0; i < d; ++i) fh[i] = bank.features[k][i] * mu;
        fhat.push_back(std::move(fh));
    }

    Vec q = matvec_plain(prm.W_Q, prm.q_task);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_h));
    std::vector<double> e(active.size());
    std::vector<Vec> keys(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
        keys[a] = matvec_plain(prm.W_K, fhat[a]);
        double s = 0.0;
        for (std::size_t i = 0; i < d_h; ++i) s += q[i] * keys[a][i];
        e[a] = s * scale;
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : e) mx = std::max(mx, x);
    double denom = 0.0;
    for (double x : e) denom += std::exp(x - mx);

    Vec f_final(d_h, 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) {
        const double alpha = std::exp(e[a] - mx) / denom;
        Vec v = matvec_plain(prm.W_V, fhat[a]);
        for (std::size_t i = 0; i < d_h; ++i) f_final[i] += alpha * v[i];
    }
    double u = 0.0;
    for (std::size_t i = 0; i < d_h; ++i) u += prm.W_c[i] * f_final[i];
    u += prm.b_c;
    return 1.0 / (1.0 + std::exp(-u));
}

FeatureBank random_bank(Rng& rng, int d, std::array<int, 4> masks) {
    FeatureBank bank;
    bank.masks = masks;
    for (int k = 0; k < kNumBranches; ++k) {
        bank.features[k] = Vec(d, 0.0);
        if (masks[k])
            for (double& x : bank.features[k]) x = rng.uniform(-1.0, 1.0);
    }
    return bank;
}

FusionParams random_params(Rng& rng, const FusionDims& dims) {
    FusionParams p = FusionParams::zeros(dims);
    auto fill = [&rng](Vec& v) {
        for (double& x : v) x = rng.uniform(-0.8, 0.8);
    };
    fill(p.W_p.data); fill(p.b_p); fill(p.w_mu); fill(p.q_task);
    fill(p.W_Q.data); fill(p.W_K.data); fill(p.W_V.data); fill(p.W_c);
    p.b_c = rng.uniform(-0.5, 0.5);
    return p;
}

std::array<int, 4> random_masks(Rng& rng) {
    std::array<int, 4> m{};
    int active = 0;
    for (int& x : m) active += (x = rng.next_below(2) ? 1 : 0);
    if (active == 0) m[rng.next_below(4)] = 1;
    return m;
}

}  // namespace

TEST(FusionForward, SingleSurvivorGetsAllAttention) {
    FusionDims dims{6, 3, 4};
    Rng rng(11);
    FusionParams prm = random_params(rng, dims);
    FeatureBank bank = random_bank(rng, dims.d, {1, 0, 0, 0});
    FusionOutput out = fusion_forward(bank, prm);
    EXPECT_DOUBLE_EQ(out.alpha[0], 1.0);
    EXPECT_DOUBLE_EQ(out.alpha[1], 0.0);
    EXPECT_DOUBLE_EQ(out.alpha[2], 0.0);
    EXPECT_DOUBLE_EQ(out.alpha[3], 0.0);
}

TEST(FusionForward, AllZeroParamsGiveUniformAttentionAndHalf) {
    FusionDims dims{5, 3, 2};
    FusionParams prm = FusionParams::zeros(dims);
    Rng rng(3);
    FeatureBank bank = random_bank(rng, dims.d, {1, 1, 1, 1});
    FusionOutput out = fusion_forward(bank, prm);
    for (int k = 0; k < kNumBranches; ++k) {
        EXPECT_DOUBLE_EQ(out.mu[k], 0.5);
        EXPECT_DOUBLE_EQ(out.alpha[k], 0.25);
    }
    EXPECT_DOUBLE_EQ(out.y_hat, 0.5);
}

TEST(FusionForward, MaskedBranchExcludedBitExact) {
    FusionDims dims{8, 4, 4};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed * 977 + 5);
        FusionParams prm = random_params(rng, dims);
        FeatureBank bank = random_bank(rng, dims.d, {1, 1, 1, 0});
        const double via_mask = fusion_forward(bank, prm).y_hat;
        const double via_exclusion = forward_excluding(bank, prm, {0, 1, 2});
        EXPECT_EQ(via_mask, via_exclusion) << "seed " << seed;
    }
}

TEST(FusionForward, SoftmaxNormalizedOverUnmasked) {
    FusionDims dims{8, 4, 4};
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed + 100);
        auto masks = random_masks(rng);
        FusionParams prm = random_params(rng, dims);
        FeatureBank bank = random_bank(rng, dims.d, masks);
        FusionOutput out = fusion_forward(bank, prm);
        double sum = 0.0;
        for (int k = 0; k < kNumBranches; ++k) {
            EXPECT_GE(out.alpha[k], 0.0);
            if (!masks[k]) EXPECT_DOUBLE_EQ(out.alpha[k], 0.0);
            sum += out.alpha[k];
            EXPECT_GT(out.mu[k], 0.0);
            EXPECT_LT(out.mu[k], 1.0);
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(FusionForward, PermutationCovariance) {
    FusionDims dims{8, 4, 4};
    Rng rng(42);
    FusionParams prm = random_params(rng, dims);
    FeatureBank bank = random_bank(rng, dims.d, {1, 1, 0, 1});
    const double base = fusion_forward(bank, prm).y_hat;
    // rotate branches (features and masks together); attention has no
    // positional term, so the prediction must not move
    FeatureBank rot;
    for (int k = 0; k < kNumBranches; ++k) {
        rot.features[k] = bank.features[(k + 1) % 4];
        rot.masks[k] = bank.masks[(k + 1) % 4];
    }
    EXPECT_NEAR(fusion_forward(rot, prm).y_hat, base, 1e-12);
}

TEST(FusionForward, AllMaskedRaises) {
    FusionDims dims{4, 2, 2};
    FusionParams prm = FusionParams::zeros(dims);
    FeatureBank bank;
    for (int k = 0; k < kNumBranches; ++k) bank.features[k] = Vec(dims.d, 0.0);
    bank.masks = {0, 0, 0, 0};
    EXPECT_THROW(fusion_forward(bank, prm), AllMaskedError);
}

TEST(FusionForward, DimensionMismatchRaises) {
    FusionDims dims{4, 2, 2};
    Rng rng(7);
    FusionParams prm = random_params(rng, dims);
    FeatureBank bank = random_bank(rng, 5, {1, 1, 1, 1});
    EXPECT_THROW(fusion_forward(bank, prm), DimensionMismatch);
}

TEST(FusionLoss, AnalyticValues) {
    EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
    EXPECT_NEAR(bce_loss(1.0 - 1e-12, 1), 1e-12, 1e-13);
    EXPECT_NEAR(bce_loss(0.9, 0), -std::log(0.1), 1e-12);
}

TEST(FusionBackward, MatchesFiniteDifferences) {
    FusionDims dims{8, 4, 4};
    mathcheck::OracleConfig cfg;
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        Rng rng(keyed_seed(7, "fd" + std::to_string(trial)));
        auto masks = random_masks(rng);
        FusionParams prm = random_params(rng, dims);
        FeatureBank bank = random_bank(rng, dims.d, masks);
        const int y = trial % 2;

        FusionParams analytic = fusion_backward(bank, prm, y);
        auto loss_at = [&](const std::vector<double>& flat) {
            FusionParams p = FusionParams::unpack(flat, dims);
            return bce_loss(fusion_forward(bank, p).y_hat, y);
        };
        Vec fd = mathcheck::fd_gradient(loss_at, prm.pack(), cfg);
        Vec an = analytic.pack();
        ASSERT_EQ(fd.size(), an.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < fd.size(); ++i) {
            const double rel = std::abs(an[i] - fd[i]) / std::max({1.0, std::abs(an[i]), std::abs(fd[i])});
            worst = std::max(worst, rel);
        }
        EXPECT_LE(worst, cfg.tolerance_rel) << "trial " << trial;
    }
}

TEST(FusionBackward, SingleBranchTaskQueryGradientIsZero) {
    FusionDims dims{6, 3, 3};
    Rng rng(19);
    FusionParams prm = random_params(rng, dims);
    FeatureBank bank = random_bank(rng, dims.d, {1, 0, 0, 0});
    FusionParams g = fusion_backward(bank, prm, 1);
    for (double v : g.q_task) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : g.W_Q.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(FusionBackward, ClassifierBiasGradientIdentity) {
    FusionDims dims{6, 3, 3};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        FusionParams prm = random_params(rng, dims);
        FeatureBank bank = random_bank(rng, dims.d, random_masks(rng));
        const int y = seed % 2;
        FusionOutput fwd;
        FusionParams g = fusion_backward(bank, prm, y, &fwd);
        EXPECT_NEAR(g.b_c, fwd.y_hat - y, 1e-15);
    }
}

namespace {

std::vector<LabeledBank> separable_banks(int n, int d, std::uint64_t seed) {
    Rng rng(keyed_seed(seed, "separable"));
    Vec direction(d);
    for (double& x : direction) x = rng.uniform(-1.0, 1.0);
    const double nrm = norm2(direction);
    for (double& x : direction) x /= nrm;

    std::vector<LabeledBank> out;
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        FeatureBank bank;
        for (int k = 0; k < kNumBranches; ++k) bank.features[k] = Vec(d, 0.0);
        bank.masks = {1, 1, 1, rng.next_below(4) == 0 ? 0 : 1};
        // f_t carries the label direction, the rest is noise
        for (int j = 0; j < d; ++j)
            bank.features[0][j] = (y == 1 ? 1.5 : -1.5) * direction[j] + 0.3 * rng.uniform(-1.0, 1.0);
        for (int k = 1; k < kNumBranches; ++k) {
            if (!bank.masks[k]) continue;
            for (double& x : bank.features[k]) x = rng.uniform(-1.0, 1.0);
        }
        out.emplace_back(std::move(bank), y);
    }
    return out;
}

}  // namespace

TEST(FusionTrain, ZeroEpochsReturnsInit) {
    FusionDims dims{8, 4, 4};
    FusionParams init = init_params(dims, 5);
    auto data = separable_banks(16, dims.d, 1);
    TrainOptions opt;
    opt.epochs = 0;
    TrainResult r = train_fusion(data, init, opt);
    EXPECT_EQ(r.params.pack(), init.pack());
    EXPECT_TRUE(r.curve.empty());
}

TEST(FusionTrain, DeterministicGivenSeed) {
    FusionDims dims{8, 4, 4};
    FusionParams init = init_params(dims, 5);
    auto data = separable_banks(64, dims.d, 2);
    TrainOptions opt;
    opt.epochs = 5;
    opt.seed = 9;
    TrainResult a = train_fusion(data, init, opt);
    TrainResult b = train_fusion(data, init, opt);
    EXPECT_EQ(a.params.pack(), b.params.pack());
    EXPECT_EQ(a.curve.size(), b.curve.size());
}

TEST(FusionTrain, LearnsSeparableData) {
    FusionDims dims{16, 8, 8};
    auto data = separable_banks(600, dims.d, 3);
    std::vector<LabeledBank> train_set(data.begin(), data.begin() + 480);
    std::vector<LabeledBank> held(data.begin() + 480, data.end());

    TrainOptions opt;
    opt.lr = 0.05;
    opt.epochs = 50;
    opt.seed = 4;
    TrainResult r = train_fusion(train_set, init_params(dims, 4), opt);

    int hit = 0;
    for (const auto& [bank, y] : held) hit += (fusion_forward(bank, r.params).y_hat >= 0.5 ? 1 : 0) == y;
    EXPECT_GE(static_cast<double>(hit) / held.size(), 0.9);
}

TEST(FusionTrain, DivergenceDetected) {
    // saturated sigmoids keep a huge learning rate finite, so divergence is
    // provoked with overflowing features. Two identical poisoned samples with
    // opposite labels guarantee a unit gradient on one of them no matter
    // which way the prediction saturates.
    FusionDims dims{4, 2, 2};
    auto data = separable_banks(8, dims.d, 6);
    Rng rng(13);
    FeatureBank poison;
    poison.masks = {1, 1, 1, 1};
    for (int k = 0; k < kNumBranches; ++k) {
        poison.features[k] = Vec(dims.d);
        for (double& x : poison.features[k]) x = rng.uniform(-1.0, 1.0) * 1e250;
    }
    data[0] = {poison, 0};
    data[1] = {poison, 1};
    TrainOptions opt;
    opt.lr = 0.05;
    opt.epochs = 10;
    opt.val_fraction = 0.0;
    EXPECT_THROW(train_fusion(data, init_params(dims, 1), opt), DivergenceDetected);
}

TEST(FusionInit, ReproducibleBoundedZeroBiases) {
    FusionDims dims{10, 6, 5};
    FusionParams a = init_params(dims, 77);
    FusionParams b = init_params(dims, 77);
    EXPECT_EQ(a.pack(), b.pack());
    for (double v : a.b_p) EXPECT_DOUBLE_EQ(v, 0.0);
    EXPECT_DOUBLE_EQ(a.b_c, 0.0);
    const double bound_wp = std::sqrt(6.0 / (dims.d + dims.d_p));
    for (double v : a.W_p.data) EXPECT_LT(std::abs(v), bound_wp);
    const double bound_wq = std::sqrt(6.0 / (dims.d + dims.d_h));
    for (double v : a.W_Q.data) EXPECT_LT(std::abs(v), bound_wq);
}

TEST(FusionSerialization, ParamsRoundTrip) {
    FusionDims dims{6, 3, 4};
    FusionParams p = init_params(dims, 123);
    p.b_c = -0.25;
    const std::string path = testing::TempDir() + "fusion_params.json";
    save_fusion_params(p, path);
    FusionParams q = load_fusion_params(path);
    EXPECT_EQ(p.pack(), q.pack());
    std::remove(path.c_str());
}

TEST(FusionSerialization, BanksRoundTrip) {
    auto banks = separable_banks(8, 6, 9);
    const std::string path = testing::TempDir() + "banks.jsonl";
    save_banks_jsonl(banks, path);
    auto loaded = load_banks_jsonl(path);
    ASSERT_EQ(loaded.size(), banks.size());
    for (std::size_t i = 0; i < banks.size(); ++i) {
        EXPECT_EQ(loaded[i].second, banks[i].second);
        EXPECT_EQ(loaded[i].first.masks, banks[i].first.masks);
        for (int k = 0; k < kNumBranches; ++k)
            EXPECT_EQ(loaded[i].first.features[k], banks[i].first.features[k]);
    }
    std::remove(path.c_str());
}
