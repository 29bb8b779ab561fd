#include "poseforge/lbfgsb.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace poseforge {

namespace {

double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const Tensor& a) {
    double m = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

}  // namespace

BoundBox BoundBox::unbounded(int n) {
    double inf = std::numeric_limits<double>::infinity();
    return {Tensor::full({n}, -inf), Tensor::full({n}, inf)};
}

BoundBox BoundBox::uniform(int n, double lo, double hi) {
    return {Tensor::full({n}, lo), Tensor::full({n}, hi)};
}

bool BoundBox::contains(const Tensor& x) const {
    for (std::int64_t i = 0; i < x.size(); ++i)
        if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
}

Tensor BoundBox::project(const Tensor& x) const {
    Tensor p = x;
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] = std::min(std::max(p[i], lower[i]), upper[i]);
    return p;
}

LbfgsbResult lbfgsb_minimize(const Objective& objective, const Tensor& x0, const BoundBox& bounds,
                             const LbfgsbConfig& config) {
    const std::int64_t n = x0.size();
    if (bounds.lower.size() != n || bounds.upper.size() != n)
        throw std::invalid_argument("lbfgsb: bound dimension mismatch");
    for (std::int64_t i = 0; i < n; ++i)
        if (bounds.lower[i] > bounds.upper[i]) throw std::invalid_argument("lbfgsb: lower bound above upper bound");
    if (!bounds.contains(x0)) throw std::invalid_argument("lbfgsb: x0 infeasible");

    Tensor x = x0;
    Tensor g(x.shape());
    double f = objective(x, g);
    if (!std::isfinite(f) || !g.all_finite()) throw std::runtime_error("lbfgsb: objective non-finite at x0");

    LbfgsbResult res;
    res.accepted_objectives.push_back(f);

    std::deque<Tensor> mem_s, mem_y;
    std::deque<double> mem_rho;

    Tensor pg(x.shape()), d(x.shape()), gm(x.shape());
    const double active_eps = 1e-12;

    for (int iter = 0; iter < config.max_iters; ++iter) {
        res.iterations = iter;

        // Projected gradient; also the convergence measure.
        for (std::int64_t i = 0; i < n; ++i) {
            double step = std::min(std::max(x[i] - g[i], bounds.lower[i]), bounds.upper[i]);
            pg[i] = x[i] - step;
        }
        if (max_abs(pg) <= config.grad_tol) {
            res.status = LbfgsbStatus::Converged;
            res.x = x;
            res.f = f;
            return res;
        }

        // Active set at the current point: variables pinned to a bound with
        // the gradient pushing outward stay fixed during subspace descent.
        std::vector<char> active(static_cast<std::size_t>(n), 0);
        for (std::int64_t i = 0; i < n; ++i) {
            bool at_lo = x[i] <= bounds.lower[i] + active_eps && g[i] > 0;
            bool at_hi = x[i] >= bounds.upper[i] - active_eps && g[i] < 0;
            active[static_cast<std::size_t>(i)] = at_lo || at_hi;
            gm[i] = active[static_cast<std::size_t>(i)] ? 0.0 : g[i];
        }

        // Two-loop recursion on the free subspace.
        d = gm;
        std::vector<double> alpha(mem_s.size());
        for (int k = static_cast<int>(mem_s.size()) - 1; k >= 0; --k) {
            alpha[static_cast<std::size_t>(k)] = mem_rho[static_cast<std::size_t>(k)] * dot(mem_s[static_cast<std::size_t>(k)], d);
            for (std::int64_t i = 0; i < n; ++i) d[i] -= alpha[static_cast<std::size_t>(k)] * mem_y[static_cast<std::size_t>(k)][i];
        }
        if (!mem_s.empty()) {
            const Tensor& s_last = mem_s.back();
            const Tensor& y_last = mem_y.back();
            double gamma = dot(s_last, y_last) / std::max(dot(y_last, y_last), 1e-300);
            for (std::int64_t i = 0; i < n; ++i) d[i] *= gamma;
        }
        for (std::size_t k = 0; k < mem_s.size(); ++k) {
            double beta = mem_rho[k] * dot(mem_y[k], d);
            for (std::int64_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * mem_s[k][i];
        }
        for (std::int64_t i = 0; i < n; ++i) d[i] = active[static_cast<std::size_t>(i)] ? 0.0 : -d[i];

        // Fall back to the projected steepest descent direction when the
        // model direction is not a descent direction.
        double dg = dot(d, g);
        if (!(dg < 0)) {
            for (std::int64_t i = 0; i < n; ++i) d[i] = -pg[i];
            dg = dot(d, g);
            if (!(dg < 0)) {
                res.status = LbfgsbStatus::Converged;
                res.x = x;
                res.f = f;
                return res;
            }
        }

        // Backtracking Armijo search along the projection arc.
        double t = 1.0;
        const double c1 = 1e-4;
        Tensor xt(x.shape()), gt(x.shape());
        bool accepted = false;
        double ft = f;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::int64_t i = 0; i < n; ++i)
                xt[i] = std::min(std::max(x[i] + t * d[i], bounds.lower[i]), bounds.upper[i]);
            double step_sq = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                double dx = xt[i] - x[i];
                step_sq += dx * dx;
            }
            if (step_sq == 0.0) break;
            double pred = 0;
            for (std::int64_t i = 0; i < n; ++i) pred += g[i] * (xt[i] - x[i]);
            ft = objective(xt, gt);
            if (std::isfinite(ft) && gt.all_finite() && ft <= f + c1 * pred) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            res.status = LbfgsbStatus::LineSearchFailure;
            res.x = x;
            res.f = f;
            return res;
        }

        Tensor s(x.shape()), y(x.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            s[i] = xt[i] - x[i];
            y[i] = gt[i] - g[i];
        }
        double sy = dot(s, y);
        if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
            mem_s.push_back(s);
            mem_y.push_back(y);
            mem_rho.push_back(1.0 / sy);
            if (static_cast<int>(mem_s.size()) > config.memory) {
                mem_s.pop_front();
                mem_y.pop_front();
                mem_rho.pop_front();
            }
        }

        x = xt;
        f = ft;
        g = gt;
        res.accepted_objectives.push_back(f);
    }

    res.status = LbfgsbStatus::IterationLimit;
    res.x = x;
    res.f = f;
    return res;
}

}  // namespace poseforge
