#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "diver/errors.hpp"

namespace diver {

using Vec = std::vector<double>;

// Row-major dense matrix. Deliberately loop-based: every reduction runs in
// index order, which the fusion tests rely on for bit-reproducible results.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw DimensionMismatch("dot: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec matvec(const Mat& m, const Vec& x) {
    if (m.cols != x.size())
        throw DimensionMismatch("matvec: " + std::to_string(m.cols) + " cols vs vec " + std::to_string(x.size()));
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += m.at(r, c) * x[c];
        y[r] = acc;
    }
    return y;
}

// y = M^T x  (x has m.rows entries)
inline Vec matvec_t(const Mat& m, const Vec& x) {
    if (m.rows != x.size())
        throw DimensionMismatch("matvec_t: " + std::to_string(m.rows) + " rows vs vec " + std::to_string(x.size()));
    Vec y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += m.at(r, c) * x[r];
    return y;
}

// m += scale * a b^T
inline void add_outer(Mat& m, const Vec& a, const Vec& b, double scale = 1.0) {
    if (m.rows != a.size() || m.cols != b.size()) throw DimensionMismatch("add_outer: shape mismatch");
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) += scale * a[r] * b[c];
}

inline void axpy(Vec& y, double alpha, const Vec& x) {
    if (y.size() != x.size()) throw DimensionMismatch("axpy: size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline Vec scaled(const Vec& x, double alpha) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i];
    return y;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine: dimension mismatch");
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) throw ZeroVectorError("cosine: zero vector");
    return dot(a, b) / (na * nb);
}

}  // namespace diver
