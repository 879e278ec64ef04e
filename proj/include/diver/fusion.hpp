#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diver/errors.hpp"
#include "diver/linalg.hpp"
#include "diver/rng.hpp"
#include "diver/types.hpp"

namespace diver {

// The four fusion branches, fixed order.
constexpr int kNumBranches = 4;
inline const char* branch_name(int k) {
    static const char* names[] = {"f_t", "f_H", "f_R", "f_v"};
    return names[k];
}

struct FeatureBank {
    std::array<Vec, kNumBranches> features;   // [f_t, f_H, f_R, f_v]
    std::array<int, kNumBranches> masks{1, 1, 1, 1};

    void validate(int d) const {
        int active = 0;
        for (int k = 0; k < kNumBranches; ++k) {
            if (static_cast<int>(features[k].size()) != d)
                throw DimensionMismatch(std::string("FeatureBank: branch ") + branch_name(k) + " has dim " +
                                        std::to_string(features[k].size()) + ", expected " + std::to_string(d));
            if (masks[k] != 0 && masks[k] != 1) throw DataError("FeatureBank: masks must be 0/1");
            if (masks[k] == 0) {
                for (double x : features[k])
                    if (x != 0.0) throw DataError("FeatureBank: masked branch must carry the zero vector");
            } else {
                ++active;
            }
        }
        if (active == 0) throw AllMaskedError("FeatureBank: all branches masked");
    }
};

struct FusionParams {
    Mat W_p;      // d_p x d
    Vec b_p;      // d_p
    Vec w_mu;     // d_p
    Vec q_task;   // d
    Mat W_Q;      // d_h x d
    Mat W_K;      // d_h x d
    Mat W_V;      // d_h x d
    Vec W_c;      // d_h
    double b_c = 0.0;

    FusionDims dims() const {
        return FusionDims{static_cast<int>(W_p.cols), static_cast<int>(W_p.rows), static_cast<int>(W_Q.rows)};
    }

    void validate(const FusionDims& expect) const {
        auto req = [](bool ok, const char* what) {
            if (!ok) throw DimensionMismatch(std::string("FusionParams: ") + what);
        };
        const auto d = static_cast<std::size_t>(expect.d);
        const auto d_p = static_cast<std::size_t>(expect.d_p);
        const auto d_h = static_cast<std::size_t>(expect.d_h);
        req(W_p.rows == d_p && W_p.cols == d, "W_p shape");
        req(b_p.size() == d_p, "b_p size");
        req(w_mu.size() == d_p, "w_mu size");
        req(q_task.size() == d, "q_task size");
        req(W_Q.rows == d_h && W_Q.cols == d, "W_Q shape");
        req(W_K.rows == d_h && W_K.cols == d, "W_K shape");
        req(W_V.rows == d_h && W_V.cols == d, "W_V shape");
        req(W_c.size() == d_h, "W_c size");
        for_each_value([](double v) {
            if (!std::isfinite(v)) throw DataError("FusionParams: non-finite entry");
        });
    }

    template <typename Fn>
    void for_each_value(Fn fn) const {
        for (double v : W_p.data) fn(v);
        for (double v : b_p) fn(v);
        for (double v : w_mu) fn(v);
        for (double v : q_task) fn(v);
        for (double v : W_Q.data) fn(v);
        for (double v : W_K.data) fn(v);
        for (double v : W_V.data) fn(v);
        for (double v : W_c) fn(v);
        fn(b_c);
    }

    // Flat layout: W_p, b_p, w_mu, q_task, W_Q, W_K, W_V, W_c, b_c.
    Vec pack() const {
        Vec out;
        out.reserve(size());
        auto app = [&out](const Vec& v) { out.insert(out.end(), v.begin(), v.end()); };
        app(W_p.data); app(b_p); app(w_mu); app(q_task);
        app(W_Q.data); app(W_K.data); app(W_V.data); app(W_c);
        out.push_back(b_c);
        return out;
    }

    static FusionParams unpack(const Vec& flat, const FusionDims& dims) {
        FusionParams p = zeros(dims);
        if (flat.size() != p.size()) throw DimensionMismatch("FusionParams::unpack: flat size mismatch");
        std::size_t pos = 0;
        auto take = [&](Vec& dst) {
            for (double& x : dst) x = flat[pos++];
        };
        take(p.W_p.data); take(p.b_p); take(p.w_mu); take(p.q_task);
        take(p.W_Q.data); take(p.W_K.data); take(p.W_V.data); take(p.W_c);
        p.b_c = flat[pos++];
        return p;
    }

    std::size_t size() const {
        return W_p.data.size() + b_p.size() + w_mu.size() + q_task.size() + W_Q.data.size() +
               W_K.data.size() + W_V.data.size() + W_c.size() + 1;
    }

    static FusionParams zeros(const FusionDims& dims) {
        dims.validate();
        FusionParams p;
        const auto d = static_cast<std::size_t>(dims.d);
        const auto d_p = static_cast<std::size_t>(dims.d_p);
        const auto d_h = static_cast<std::size_t>(dims.d_h);
        p.W_p = Mat(d_p, d);
        p.b_p = Vec(d_p, 0.0);
        p.w_mu = Vec(d_p, 0.0);
        p.q_task = Vec(d, 0.0);
        p.W_Q = Mat(d_h, d);
        p.W_K = Mat(d_h, d);
        p.W_V = Mat(d_h, d);
        p.W_c = Vec(d_h, 0.0);
        p.b_c = 0.0;
        return p;
    }
};

// In-place p += scale * g over every parameter.
inline void axpy_params(FusionParams& p, double scale, const FusionParams& g) {
    auto upd = [scale](Vec& dst, const Vec& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    };
    upd(p.W_p.data, g.W_p.data);
    upd(p.b_p, g.b_p);
    upd(p.w_mu, g.w_mu);
    upd(p.q_task, g.q_task);
    upd(p.W_Q.data, g.W_Q.data);
    upd(p.W_K.data, g.W_K.data);
    upd(p.W_V.data, g.W_V.data);
    upd(p.W_c, g.W_c);
    p.b_c += scale * g.b_c;
}

inline void scale_params(FusionParams& p, double scale) {
    auto upd = [scale](Vec& dst) {
        for (double& x : dst) x *= scale;
    };
    upd(p.W_p.data); upd(p.b_p); upd(p.w_mu); upd(p.q_task);
    upd(p.W_Q.data); upd(p.W_K.data); upd(p.W_V.data); upd(p.W_c);
    p.b_c *= scale;
}

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); vectors count as
// fan_out 1; biases start at zero.
inline FusionParams init_params(const FusionDims& dims, std::uint64_t seed) {
    FusionParams p = FusionParams::zeros(dims);
    Rng rng(keyed_seed(seed, "fusion-init"));
    auto fill = [&rng](Vec& v, int fan_in, int fan_out) {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& x : v) x = rng.uniform(-a, a);
    };
    fill(p.W_p.data, dims.d, dims.d_p);
    fill(p.w_mu, dims.d_p, 1);
    fill(p.q_task, dims.d, 1);
    fill(p.W_Q.data, dims.d, dims.d_h);
    fill(p.W_K.data, dims.d, dims.d_h);
    fill(p.W_V.data, dims.d, dims.d_h);
    fill(p.W_c, dims.d_h, 1);
    return p;
}

struct FusionOutput {
    double y_hat = 0.5;
    Vec alpha = Vec(kNumBranches, 0.0);   // zero exactly where masked
    Vec mu = Vec(kNumBranches, 0.0);
    Vec f_final;
};

namespace fusion_detail {

struct ForwardScratch {
    std::array<Vec, kNumBranches> p_tanh;   // tanh(W_p f_k + b_p)
    std::array<Vec, kNumBranches> f_hat;
    std::array<Vec, kNumBranches> keys;
    std::array<Vec, kNumBranches> vals;
    Vec q;                                  // W_Q q_task
    std::array<double, kNumBranches> e{};
    double u = 0.0;                         // classifier pre-activation
};

// Shared by forward and backward so both see identical intermediates. All
// reductions run in branch/index order; masked branches are excluded from
// every attention sum rather than pushed to -inf, which is what makes the
// result bit-identical to a computation that never saw them.
inline FusionOutput forward_impl(const FeatureBank& bank, const FusionParams& params, ForwardScratch* scratch) {
    const FusionDims dims = params.dims();
    bank.validate(dims.d);
    params.validate(dims);

    FusionOutput out;
    ForwardScratch local;
    ForwardScratch& s = scratch ? *scratch : local;

    for (int k = 0; k < kNumBranches; ++k) {
        Vec h = matvec(params.W_p, bank.features[k]);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += params.b_p[i];
        for (double& x : h) x = std::tanh(x);
        const double z = dot(params.w_mu, h);
        out.mu[k] = sigmoid(z);
        s.p_tanh[k] = std::move(h);
        s.f_hat[k] = scaled(bank.features[k], out.mu[k]);
    }

    s.q = matvec(params.W_Q, params.q_task);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.d_h));
    for (int k = 0; k < kNumBranches; ++k) {
        if (!bank.masks[k]) continue;
        s.keys[k] = matvec(params.W_K, s.f_hat[k]);
        s.e[k] = dot(s.q, s.keys[k]) * scale;
    }

    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kNumBranches; ++k)
        if (bank.masks[k]) mx = std::max(mx, s.e[k]);
    double denom = 0.0;
    for (int k = 0; k < kNumBranches; ++k)
        if (bank.masks[k]) denom += std::exp(s.e[k] - mx);
    for (int k = 0; k < kNumBranches; ++k)
        out.alpha[k] = bank.masks[k] ? std::exp(s.e[k] - mx) / denom : 0.0;

    out.f_final = Vec(dims.d_h, 0.0);
    for (int k = 0; k < kNumBranches; ++k) {
        if (!bank.masks[k]) continue;
        s.vals[k] = matvec(params.W_V, s.f_hat[k]);
        axpy(out.f_final, out.alpha[k], s.vals[k]);
    }

    s.u = dot(params.W_c, out.f_final) + params.b_c;
    out.y_hat = sigmoid(s.u);
    return out;
}

}  // namespace fusion_detail

inline FusionOutput fusion_forward(const FeatureBank& bank, const FusionParams& params) {
    return fusion_detail::forward_impl(bank, params, nullptr);
}

inline double bce_loss(double y_hat, int y) {
    constexpr double eps = 1e-12;
    const double p = std::min(1.0 - eps, std::max(eps, y_hat));
    return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

inline double batch_bce_loss(const std::vector<double>& y_hat, const std::vector<int>& y) {
    if (y_hat.size() != y.size() || y_hat.empty()) throw DimensionMismatch("batch_bce_loss: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) s += bce_loss(y_hat[i], y[i]);
    return s / static_cast<double>(y_hat.size());
}

// Analytic gradients of the per-sample BCE loss with respect to every
// parameter. Masked branches contribute exactly zero through the attention
// path; the reliability projection only receives gradient from unmasked
// branches for the same reason.
inline FusionParams fusion_backward(const FeatureBank& bank, const FusionParams& params, int y,
                                    FusionOutput* out_fwd = nullptr) {
    const FusionDims dims = params.dims();
    fusion_detail::ForwardScratch s;
    FusionOutput out = fusion_detail::forward_impl(bank, params, &s);
    if (out_fwd) *out_fwd = out;

    FusionParams g = FusionParams::zeros(dims);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.d_h));

    // dL/du for sigmoid + BCE
    const double gu = out.y_hat - static_cast<double>(y);
    g.b_c = gu;
    g.W_c = scaled(out.f_final, gu);
    Vec g_final = scaled(params.W_c, gu);

    // attention weights
    Vec g_alpha(kNumBranches, 0.0);
    for (int k = 0; k < kNumBranches; ++k)
        if (bank.masks[k]) g_alpha[k] = dot(g_final, s.vals[k]);
    double dot_ag = 0.0;
    for (int k = 0; k < kNumBranches; ++k)
        if (bank.masks[k]) dot_ag += out.alpha[k] * g_alpha[k];

    Vec g_q(dims.d_h, 0.0);
    std::array<Vec, kNumBranches> g_fhat;
    for (int k = 0; k < kNumBranches; ++k) g_fhat[k] = Vec(dims.d, 0.0);

    for (int k = 0; k < kNumBranches; ++k) {
        if (!bank.masks[k]) continue;
        // value path
        Vec g_val = scaled(g_final, out.alpha[k]);
        add_outer(g.W_V, g_val, s.f_hat[k]);
        axpy(g_fhat[k], 1.0, matvec_t(params.W_V, g_val));
        // score path through softmax
        const double g_e = out.alpha[k] * (g_alpha[k] - dot_ag);
        axpy(g_q, g_e * scale, s.keys[k]);
        Vec g_key = scaled(s.q, g_e * scale);
        add_outer(g.W_K, g_key, s.f_hat[k]);
        axpy(g_fhat[k], 1.0, matvec_t(params.W_K, g_key));
    }

    add_outer(g.W_Q, g_q, params.q_task);
    g.q_task = matvec_t(params.W_Q, g_q);

    // reliability path
    for (int k = 0; k < kNumBranches; ++k) {
        if (!bank.masks[k]) continue;
        const double g_mu = dot(g_fhat[k], bank.features[k]);
        const double g_z = g_mu * out.mu[k] * (1.0 - out.mu[k]);
        axpy(g.w_mu, g_z, s.p_tanh[k]);
        Vec g_h = scaled(params.w_mu, g_z);
        for (std::size_t i = 0; i < g_h.size(); ++i) g_h[i] *= 1.0 - s.p_tanh[k][i] * s.p_tanh[k][i];
        add_outer(g.W_p, g_h, bank.features[k]);
        axpy(g.b_p, 1.0, g_h);
    }

    return g;
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct TrainOptions {
    double lr = 0.05;
    int epochs = 50;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double momentum = 0.0;
    double val_fraction = 0.1;
    int patience = 5;
};

struct CurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double val_acc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    FusionParams params;
    std::vector<CurvePoint> curve;
    int best_epoch = 0;
};

using LabeledBank = std::pair<FeatureBank, int>;

inline double dataset_loss(const std::vector<const LabeledBank*>& split, const FusionParams& params) {
    double s = 0.0;
    for (const LabeledBank* lb : split) s += bce_loss(fusion_forward(lb->first, params).y_hat, lb->second);
    return s / static_cast<double>(split.size());
}

inline double dataset_accuracy(const std::vector<const LabeledBank*>& split, const FusionParams& params) {
    int hit = 0;
    for (const LabeledBank* lb : split) {
        const int pred = fusion_forward(lb->first, params).y_hat >= 0.5 ? 1 : 0;
        hit += pred == lb->second;
    }
    return static_cast<double>(hit) / static_cast<double>(split.size());
}

inline TrainResult train_fusion(const std::vector<LabeledBank>& dataset, const FusionParams& params_init,
                                const TrainOptions& opt) {
    if (dataset.empty()) throw DataError("train_fusion: empty dataset");
    if (opt.batch_size < 1 || opt.lr <= 0.0 || opt.epochs < 0) throw ConfigError("train_fusion: bad options");
    for (const auto& [bank, y] : dataset)
        if (y != 0 && y != 1) throw DataError("train_fusion: labels must be 0/1");

    const FusionDims dims = params_init.dims();
    TrainResult result{params_init, {}, 0};
    if (opt.epochs == 0) return result;

    std::vector<const LabeledBank*> order(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) order[i] = &dataset[i];
    Rng rng(keyed_seed(opt.seed, "fusion-train"));
    rng.shuffle(order);

    const std::size_t n_val = static_cast<std::size_t>(opt.val_fraction * static_cast<double>(order.size()));
    std::vector<const LabeledBank*> val(order.begin(), order.begin() + n_val);
    std::vector<const LabeledBank*> train(order.begin() + n_val, order.end());
    if (train.empty()) throw DataError("train_fusion: validation split leaves no training data");

    FusionParams params = params_init;
    FusionParams velocity = FusionParams::zeros(dims);
    FusionParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale = 0;

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        rng.shuffle(train);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train.size(); start += opt.batch_size) {
            const std::size_t stop = std::min(train.size(), start + opt.batch_size);
            FusionParams grad = FusionParams::zeros(dims);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                FusionOutput fwd;
                FusionParams gi = fusion_backward(train[i]->first, params, train[i]->second, &fwd);
                axpy_params(grad, 1.0, gi);
                batch_loss += bce_loss(fwd.y_hat, train[i]->second);
            }
            const double bsz = static_cast<double>(stop - start);
            scale_params(grad, 1.0 / bsz);
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss))
                throw DivergenceDetected("train_fusion: non-finite loss at epoch " + std::to_string(epoch));
            if (opt.momentum != 0.0) {
                scale_params(velocity, opt.momentum);
                axpy_params(velocity, -opt.lr, grad);
                axpy_params(params, 1.0, velocity);
            } else {
                axpy_params(params, -opt.lr, grad);
            }
            // the BCE clamp hides NaN predictions, so divergence shows up in
            // the parameters first
            bool finite = true;
            params.for_each_value([&finite](double v) { finite = finite && std::isfinite(v); });
            if (!finite)
                throw DivergenceDetected("train_fusion: parameters diverged at epoch " + std::to_string(epoch));
            epoch_loss += batch_loss * bsz;
            seen += stop - start;
        }

        CurvePoint point;
        point.epoch = epoch;
        point.train_loss = epoch_loss / static_cast<double>(seen);
        if (!val.empty()) {
            point.val_loss = dataset_loss(val, params);
            point.val_acc = dataset_accuracy(val, params);
            if (point.val_loss < best_val - 1e-12) {
                best_val = point.val_loss;
                best = params;
                best_epoch = epoch;
                stale = 0;
            } else {
                ++stale;
            }
        }
        result.curve.push_back(point);
        if (!val.empty() && stale > opt.patience) break;
    }

    if (!val.empty()) {
        result.params = best;
        result.best_epoch = best_epoch;
    } else {
        result.params = params;
        result.best_epoch = result.curve.empty() ? 0 : result.curve.back().epoch;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization: params as a versioned JSON document, curve as CSV, banks as
// JSON lines.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json fusion_params_to_json(const FusionParams& p) {
    const FusionDims dims = p.dims();
    auto mat = [](const Mat& m) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < m.rows; ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::ordered_json j;
    j["format"] = "diver-fusion-params";
    j["version"] = 1;
    j["dims"] = {{"d", dims.d}, {"d_p", dims.d_p}, {"d_h", dims.d_h}};
    j["W_p"] = mat(p.W_p);
    j["b_p"] = p.b_p;
    j["w_mu"] = p.w_mu;
    j["q_task"] = p.q_task;
    j["W_Q"] = mat(p.W_Q);
    j["W_K"] = mat(p.W_K);
    j["W_V"] = mat(p.W_V);
    j["W_c"] = p.W_c;
    j["b_c"] = p.b_c;
    return j;
}

inline FusionParams fusion_params_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != "diver-fusion-params")
        throw DataError("fusion params: unrecognized document format");
    if (j.at("version").get<int>() != 1) throw DataError("fusion params: unsupported version");
    FusionDims dims{j.at("dims").at("d").get<int>(), j.at("dims").at("d_p").get<int>(),
                    j.at("dims").at("d_h").get<int>()};
    FusionParams p = FusionParams::zeros(dims);
    auto mat = [](const nlohmann::json& rows, Mat& m) {
        if (rows.size() != m.rows) throw DataError("fusion params: matrix row count mismatch");
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (rows[r].size() != m.cols) throw DataError("fusion params: matrix col count mismatch");
            for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c].get<double>();
        }
    };
    mat(j.at("W_p"), p.W_p);
    p.b_p = j.at("b_p").get<Vec>();
    p.w_mu = j.at("w_mu").get<Vec>();
    p.q_task = j.at("q_task").get<Vec>();
    mat(j.at("W_Q"), p.W_Q);
    mat(j.at("W_K"), p.W_K);
    mat(j.at("W_V"), p.W_V);
    p.W_c = j.at("W_c").get<Vec>();
    p.b_c = j.at("b_c").get<double>();
    p.validate(dims);
    return p;
}

inline void save_fusion_params(const FusionParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write fusion params: " + path);
    out << fusion_params_to_json(p).dump(2) << "\n";
}

inline FusionParams load_fusion_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read fusion params: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("fusion params " + path + ": " + e.what());
    }
    return fusion_params_from_json(j);
}

inline void save_training_curve(const std::vector<CurvePoint>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write training curve: " + path);
    out << "epoch,train_loss,val_loss,val_acc\n";
    for (const auto& p : curve) {
        out << p.epoch << "," << p.train_loss << ",";
        if (std::isfinite(p.val_loss)) out << p.val_loss;
        out << ",";
        if (std::isfinite(p.val_acc)) out << p.val_acc;
        out << "\n";
    }
}

inline void save_banks_jsonl(const std::vector<LabeledBank>& banks, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write banks: " + path);
    for (const auto& [bank, label] : banks) {
        nlohmann::ordered_json j;
        nlohmann::ordered_json feats = nlohmann::ordered_json::array();
        for (const auto& f : bank.features) feats.push_back(f);
        j["features"] = std::move(feats);
        j["masks"] = bank.masks;
        j["label"] = label;
        out << j.dump() << "\n";
    }
}

inline std::vector<LabeledBank> load_banks_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read banks: " + path);
    std::vector<LabeledBank> banks;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        FeatureBank bank;
        const auto& feats = j.at("features");
        if (feats.size() != kNumBranches) throw DataError(path + ": expected 4 feature branches");
        for (int k = 0; k < kNumBranches; ++k) bank.features[k] = feats[k].get<Vec>();
        const auto& masks = j.at("masks");
        for (int k = 0; k < kNumBranches; ++k) bank.masks[k] = masks[k].get<int>();
        banks.emplace_back(std::move(bank), j.at("label").get<int>());
    }
    if (banks.empty()) throw EmptyCorpus("no banks in " + path);
    return banks;
}

}  // namespace diver
