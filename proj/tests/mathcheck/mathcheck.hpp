#pragma once

// Independent oracles for the test suite: central finite differences,
// brute-force AUC, and a textbook attention reference. Deliberately shares no
// code with the library under test; everything here is plain double-precision
// standard C++.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mathcheck {

struct OracleConfig {
    double fd_step = 1e-5;
    double tolerance_rel = 1e-4;
};

using ScalarFn = std::function<double(const std::vector<double>&)>;

inline std::vector<double> fd_gradient(const ScalarFn& f, std::vector<double> x,
                                       const OracleConfig& cfg = {}) {
    if (cfg.fd_step <= 0.0) throw std::invalid_argument("fd_gradient: fd_step must be > 0");
    std::vector<double> g(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + cfg.fd_step;
        const double fp = f(x);
        x[i] = saved - cfg.fd_step;
        const double fm = f(x);
        x[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("fd_gradient: non-finite function value");
        g[i] = (fp - fm) / (2.0 * cfg.fd_step);
    }
    return g;
}

// Mean over all (pos, neg) pairs of 1[p > n] + 0.5 * 1[p == n].
inline double auc_bruteforce(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg) {
    if (scores_pos.empty() || scores_neg.empty())
        throw std::invalid_argument("auc_bruteforce: both score lists must be non-empty");
    double credit = 0.0;
    for (double p : scores_pos)
        for (double n : scores_neg) {
            if (p > n) credit += 1.0;
            else if (p == n) credit += 0.5;
        }
    return credit / (static_cast<double>(scores_pos.size()) * static_cast<double>(scores_neg.size()));
}

// Textbook softmax(Q K^T * scale) V. Row-major matrices as vector-of-rows.
inline std::vector<std::vector<double>> reference_attention(const std::vector<std::vector<double>>& queries,
                                                            const std::vector<std::vector<double>>& keys,
                                                            const std::vector<std::vector<double>>& values,
                                                            double scale) {
    if (keys.size() != values.size()) throw std::invalid_argument("reference_attention: |K| != |V|");
    if (keys.empty() || queries.empty()) throw std::invalid_argument("reference_attention: empty inputs");
    const std::size_t dk = keys[0].size();
    for (const auto& q : queries)
        if (q.size() != dk) throw std::invalid_argument("reference_attention: query dim mismatch");
    for (const auto& k : keys)
        if (k.size() != dk) throw std::invalid_argument("reference_attention: key dim mismatch");
    const std::size_t dv = values[0].size();
    for (const auto& v : values)
        if (v.size() != dv) throw std::invalid_argument("reference_attention: value dim mismatch");

    std::vector<std::vector<double>> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        std::vector<double> logits(keys.size(), 0.0);
        for (std::size_t j = 0; j < keys.size(); ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < dk; ++t) s += q[t] * keys[j][t];
            logits[j] = s * scale;
        }
        double mx = logits[0];
        for (double l : logits) mx = std::max(mx, l);
        std::vector<double> w(logits.size(), 0.0);
        double denom = 0.0;
        for (std::size_t j = 0; j < logits.size(); ++j) {
            w[j] = std::exp(logits[j] - mx);
            denom += w[j];
        }
        std::vector<double> row(dv, 0.0);
        for (std::size_t j = 0; j < keys.size(); ++j)
            for (std::size_t t = 0; t < dv; ++t) row[t] += (w[j] / denom) * values[j][t];
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace mathcheck
