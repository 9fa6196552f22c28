#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace olps {

/// Euclidean projection onto the probability simplex {w >= 0, sum w = 1}.
///
/// Sort-based algorithm: sort descending, find the largest k with
/// u_k - (sum_{j<=k} u_j - 1)/k > 0, shift by that threshold and clip.
/// Equal inputs receive equal outputs, so symmetric problems stay symmetric.
inline std::vector<double> project_to_simplex(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return {};
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        running += u[k];
        const double t = (running - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::max(v[i] - theta, 0.0);
    return w;
}

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> p(z.size());
    if (z.empty()) return p;
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        total += p[i];
    }
    for (double& x : p) x /= total;
    return p;
}

/// True when every entry lies in [-tol, 1 + tol] and the sum is within tol of 1.
inline bool on_simplex(std::span<const double> w, double tol) {
    if (w.empty()) return false;
    double total = 0.0;
    for (double x : w) {
        if (!std::isfinite(x) || x < -tol || x > 1.0 + tol) return false;
        total += x;
    }
    return std::abs(total - 1.0) <= tol;
}

} // namespace olps
