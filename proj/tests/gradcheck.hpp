#pragma once

// Finite-difference oracle shared by the test suites. Independent of the
// analytic backward passes it checks.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "miniseg/rng.hpp"
#include "miniseg/tensor.hpp"

namespace miniseg::testing {

inline Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Xoshiro256 rng(seed);
    Tensor t(s);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Central difference of f with respect to each listed element of x.
template <typename F>
std::vector<double> numeric_grad(Tensor& x, F&& f, std::span<const std::size_t> which, double eps = 1e-5) {
    std::vector<double> g;
    g.reserve(which.size());
    for (auto i : which) {
        const double orig = x[i];
        x[i] = orig + eps;
        const double up = f();
        x[i] = orig - eps;
        const double down = f();
        x[i] = orig;
        g.push_back((up - down) / (2.0 * eps));
    }
    return g;
}

template <typename F>
std::vector<double> numeric_grad(Tensor& x, F&& f, double eps = 1e-5) {
    std::vector<std::size_t> all(x.numel());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return numeric_grad(x, f, all, eps);
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double den = std::sqrt(std::max(na, nb));
    return den == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / den;
}

inline std::vector<double> pick(std::span<const double> v, std::span<const std::size_t> which) {
    std::vector<double> out;
    for (auto i : which) out.push_back(v[i]);
    return out;
}

}  // namespace miniseg::testing
