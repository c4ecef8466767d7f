#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace bdlab {

// Dense vector / small row-major matrix used throughout the simulator.
// Dimensions are tiny (particle positions, action vectors), so plain
// std::vector storage is enough.
using Vec = std::vector<double>;

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<size_t>(r) * c, 0.0);
    }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline double dot(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double dist2(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// out += m * x
inline void matvec_add(const Mat& m, const Vec& x, Vec& out) {
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
        out[static_cast<size_t>(i)] += s;
    }
}

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace bdlab
