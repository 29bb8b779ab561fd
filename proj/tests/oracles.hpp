#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "poseforge/tensor.hpp"

namespace oracles {

using poseforge::Tensor;

// Central finite differences of a scalar function of several tensors.
// The function is re-evaluated from scratch for every probe.
inline std::vector<Tensor> fd_gradients(const std::function<double(const std::vector<Tensor>&)>& f,
                                        std::vector<Tensor> leaves, double h = 1e-5) {
    std::vector<Tensor> grads;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        Tensor g(leaves[k].shape());
        for (std::int64_t i = 0; i < leaves[k].size(); ++i) {
            double saved = leaves[k][i];
            leaves[k][i] = saved + h;
            double fp = f(leaves);
            leaves[k][i] = saved - h;
            double fm = f(leaves);
            leaves[k][i] = saved;
            g[i] = (fp - fm) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

inline double max_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        double scale = std::max({floor, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

// Dense Gaussian elimination with partial pivoting; direct-solve oracle.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[pivot][col])) pivot = r;
        std::swap(A[col], A[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            double f = A[r][col] / A[col][col];
            for (int c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= A[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = s / A[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
    }
    return x;
}

// Inception Score by direct summation over one split.
inline double brute_force_is(const std::vector<Tensor>& dists) {
    const std::int64_t C = dists.front().size();
    std::vector<double> marginal(static_cast<std::size_t>(C), 0.0);
    for (const Tensor& d : dists)
        for (std::int64_t c = 0; c < C; ++c) marginal[static_cast<std::size_t>(c)] += d[c];
    for (double& v : marginal) v /= static_cast<double>(dists.size());
    double mean_kl = 0.0;
    for (const Tensor& d : dists) {
        double kl = 0.0;
        for (std::int64_t c = 0; c < C; ++c)
            if (d[c] > 0) kl += d[c] * (std::log(d[c]) - std::log(marginal[static_cast<std::size_t>(c)]));
        mean_kl += kl;
    }
    return std::exp(mean_kl / static_cast<double>(dists.size()));
}

}  // namespace oracles
