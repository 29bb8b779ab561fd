#include "poseforge/inverter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace poseforge {

namespace {

constexpr double kProbGuard = 1e-6;  // Eq-9 style log diverges at 0

struct ObjectiveParts {
    double total = 0.0;
    double contextual = 0.0;
    double perceptual = 0.0;
};

// One evaluation of L_c + alpha * L_p and, when requested, its gradient
// w.r.t. the packed latent. Everything runs on a single tape.
ObjectiveParts eval_objective(const LatentState& state, const ConstraintSet& constraints,
                              const InverterModels& models, double alpha, int T, Tensor* grad) {
    const SinglePoseGenerator& g0 = *models.g0;
    const SequenceGenerator& gps = *models.gps;
    const int m = gps.m;
    const int n = gps.n;

    Tape t;
    SeqGenNodes gn = gps_leaves(t, gps);
    MlpNodes g0n = g0_leaves(t, g0);
    int z0_node = t.leaf(Tensor({1, m}, state.z0.values()));
    int z_node = t.leaf(Tensor({1, n}, state.z.values()));
    int c_node = t.leaf(constraints.cls.one_hot().reshaped({1, gps.C}));

    SeqGenGraph graph = gps_apply(t, gps, gn, g0, g0n, z_node, z0_node, c_node, T);

    int lc = -1;
    for (const auto& [idx, pose] : constraints.entries) {
        int target = t.leaf(Tensor({1, 2 * g0.J}, pose.coords));
        int term = t.sum(t.abs(t.sub(graph.frames[static_cast<std::size_t>(idx)], target)));
        lc = lc < 0 ? term : t.add(lc, term);
    }

    ObjectiveParts parts;
    int obj = lc;
    parts.contextual = t.val(lc)[0];
    if (alpha != 0.0) {
        SeqDiscNodes dn = dps_leaves(t, *models.dps);
        int p = dps_apply(t, *models.dps, dn, graph.frames, c_node);
        int lp = t.sum(t.scale(t.log(t.clamp(p, kProbGuard, 1.0 - kProbGuard)), -1.0));
        parts.perceptual = t.val(lp)[0];
        obj = t.add(lc, t.scale(lp, alpha));
    }
    parts.total = t.val(obj)[0];

    if (grad) {
        auto g = t.backward(obj, {z0_node, z_node});
        *grad = Tensor({m + n});
        for (int i = 0; i < m; ++i) (*grad)[i] = g.at(z0_node)[i];
        for (int i = 0; i < n; ++i) (*grad)[m + i] = g.at(z_node)[i];
    }
    return parts;
}

BoundBox latent_bounds(int m, int n, double z_bound) {
    Tensor lo({m + n}), hi({m + n});
    for (int i = 0; i < m; ++i) {
        lo[i] = -1.0;
        hi[i] = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        lo[m + i] = -z_bound;
        hi[m + i] = z_bound;
    }
    return {lo, hi};
}

std::vector<LatentState> draw_pool(const InverterModels& models, const InversionConfig& cfg,
                                   Rng& rng) {
    const int m = models.gps->m;
    const int n = models.gps->n;
    std::vector<LatentState> pool;
    pool.reserve(static_cast<std::size_t>(cfg.pool));
    for (int i = 0; i < cfg.pool; ++i) {
        LatentState s;
        s.z0 = rng.uniform_tensor({m}, -1.0, 1.0);
        s.z = rng.normal_tensor({n});
        for (std::int64_t j = 0; j < s.z.size(); ++j)
            s.z[j] = std::clamp(s.z[j], -cfg.z_bound, cfg.z_bound);
        pool.push_back(std::move(s));
    }
    return pool;
}

std::vector<std::size_t> rank_pool(const std::vector<LatentState>& pool,
                                   const ConstraintSet& constraints, const InverterModels& models,
                                   const InversionConfig& cfg) {
    std::vector<double> values(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        values[i] = eval_objective(pool[i], constraints, models, cfg.alpha, cfg.T, nullptr).total;
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    return order;
}

}  // namespace

void ConstraintSet::validate(int T, int J) const {
    if (entries.empty()) throw std::invalid_argument("constraint set must have at least one entry");
    int prev = -1;
    for (const auto& [idx, pose] : entries) {
        if (idx < 0 || idx >= T)
            throw std::invalid_argument("constraint index " + std::to_string(idx) + " outside [0," +
                                        std::to_string(T) + ")");
        if (idx <= prev) throw std::invalid_argument("constraint indices must be unique and sorted");
        if (pose.joints() != J) throw std::invalid_argument("constraint pose has wrong joint count");
        prev = idx;
    }
}

bool ConstraintSet::constrains(int t) const {
    for (const auto& [idx, pose] : entries)
        if (idx == t) return true;
    return false;
}

Tensor LatentState::packed() const {
    Tensor x({static_cast<int>(z0.size() + z.size())});
    for (std::int64_t i = 0; i < z0.size(); ++i) x[i] = z0[i];
    for (std::int64_t i = 0; i < z.size(); ++i) x[z0.size() + i] = z[i];
    return x;
}

LatentState LatentState::unpack(const Tensor& x, int m, int n) {
    if (x.size() != m + n) throw std::invalid_argument("latent state unpack size mismatch");
    LatentState s;
    s.z0 = Tensor({m});
    s.z = Tensor({n});
    for (int i = 0; i < m; ++i) s.z0[i] = x[i];
    for (int i = 0; i < n; ++i) s.z[i] = x[m + i];
    return s;
}

double contextual_loss(const LatentState& state, const ConstraintSet& constraints,
                       const InverterModels& models, int T) {
    constraints.validate(T, models.g0->J);
    return eval_objective(state, constraints, models, 0.0, T, nullptr).contextual;
}

double perceptual_loss(const LatentState& state, const ClassId& cls, const InverterModels& models,
                       int T) {
    PoseSequence seq = gps_forward(*models.gps, state.z, state.z0, cls, *models.g0, T);
    double p = std::clamp(dps_forward(*models.dps, seq, cls), kProbGuard, 1.0 - kProbGuard);
    return -std::log(p);
}

LatentState initialize(const ConstraintSet& constraints, const InverterModels& models,
                       const InversionConfig& cfg) {
    if (cfg.pool < 1) throw std::invalid_argument("initialize: pool size must be at least 1");
    constraints.validate(cfg.T, models.g0->J);
    Rng rng(cfg.seed);
    std::vector<LatentState> pool = draw_pool(models, cfg, rng);
    return pool[rank_pool(pool, constraints, models, cfg).front()];
}

CompletionResult complete(const ConstraintSet& constraints, const InverterModels& models,
                          const InversionConfig& cfg) {
    constraints.validate(cfg.T, models.g0->J);
    if (cfg.restarts < 1) throw std::invalid_argument("complete: needs at least one restart");

    const int m = models.gps->m;
    const int n = models.gps->n;
    Rng rng(cfg.seed);
    std::vector<LatentState> pool = draw_pool(models, cfg, rng);
    std::vector<std::size_t> order = rank_pool(pool, constraints, models, cfg);

    BoundBox bounds = latent_bounds(m, n, cfg.z_bound);
    Objective objective = [&](const Tensor& x, Tensor& grad) {
        LatentState s = LatentState::unpack(x, m, n);
        ObjectiveParts parts = eval_objective(s, constraints, models, cfg.alpha, cfg.T, &grad);
        return parts.total;
    };

    CompletionResult out;
    double best = std::numeric_limits<double>::infinity();
    const int K = std::min<int>(cfg.restarts, static_cast<int>(pool.size()));
    for (int k = 0; k < K; ++k) {
        const LatentState& start = pool[order[static_cast<std::size_t>(k)]];
        LbfgsbResult res = lbfgsb_minimize(objective, start.packed(), bounds, cfg.lbfgsb);
        LatentState opt = LatentState::unpack(res.x, m, n);
        double ctx = contextual_loss(opt, constraints, models, cfg.T);
        out.restart_objectives.push_back(res.f);
        out.restart_contextuals.push_back(ctx);
        out.restart_traces.push_back(res.accepted_objectives);
        bool made_progress = res.accepted_objectives.size() > 1 || res.status == LbfgsbStatus::Converged;
        if (made_progress) out.converged = true;
        if (res.f < best) {
            best = res.f;
            out.objective = res.f;
            out.contextual = ctx;
            out.latent = opt;
        }
    }

    PoseSequence generated =
        gps_forward(*models.gps, out.latent.z, out.latent.z0, constraints.cls, *models.g0, cfg.T);
    out.sequence = poisson_blend(generated, constraints);
    return out;
}

CompletionResult predict(const std::vector<PoseVector>& prefix, const ClassId& cls,
                         const InverterModels& models, const InversionConfig& cfg) {
    if (prefix.empty() || static_cast<int>(prefix.size()) >= cfg.T)
        throw std::invalid_argument("predict: prefix length must be in [1, T)");
    ConstraintSet constraints;
    constraints.cls = cls;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        constraints.entries.emplace_back(static_cast<int>(i), prefix[i]);
    return complete(constraints, models, cfg);
}

PoseSequence poisson_blend(const PoseSequence& generated, const ConstraintSet& constraints) {
    const int T = generated.length();
    const int D = static_cast<int>(generated.frames.front().coords.size());
    constraints.validate(T, generated.joints());

    std::vector<const PoseVector*> pinned(static_cast<std::size_t>(T), nullptr);
    for (const auto& [idx, pose] : constraints.entries) pinned[static_cast<std::size_t>(idx)] = &pose;

    PoseSequence out = generated;
    if (T == 1) {
        out.frames[0] = *pinned[0];
        return out;
    }

    std::vector<double> sub(static_cast<std::size_t>(T)), diag(static_cast<std::size_t>(T)),
        sup(static_cast<std::size_t>(T)), rhs(static_cast<std::size_t>(T)), x(static_cast<std::size_t>(T));

    for (int d = 0; d < D; ++d) {
        auto g = [&](int t) { return generated.frames[static_cast<std::size_t>(t)].coords[static_cast<std::size_t>(d)]; };
        for (int t = 0; t < T; ++t) {
            if (pinned[static_cast<std::size_t>(t)]) {
                sub[static_cast<std::size_t>(t)] = 0;
                diag[static_cast<std::size_t>(t)] = 1;
                sup[static_cast<std::size_t>(t)] = 0;
                rhs[static_cast<std::size_t>(t)] = pinned[static_cast<std::size_t>(t)]->coords[static_cast<std::size_t>(d)];
            } else if (t == 0) {
                diag[0] = 1;
                sup[0] = -1;
                sub[0] = 0;
                rhs[0] = g(0) - g(1);
            } else if (t == T - 1) {
                sub[static_cast<std::size_t>(t)] = -1;
                diag[static_cast<std::size_t>(t)] = 1;
                sup[static_cast<std::size_t>(t)] = 0;
                rhs[static_cast<std::size_t>(t)] = g(t) - g(t - 1);
            } else {
                sub[static_cast<std::size_t>(t)] = -1;
                diag[static_cast<std::size_t>(t)] = 2;
                sup[static_cast<std::size_t>(t)] = -1;
                rhs[static_cast<std::size_t>(t)] = 2 * g(t) - g(t - 1) - g(t + 1);
            }
        }
        // Thomas algorithm.
        std::vector<double> cp(static_cast<std::size_t>(T)), dp(static_cast<std::size_t>(T));
        cp[0] = sup[0] / diag[0];
        dp[0] = rhs[0] / diag[0];
        for (int t = 1; t < T; ++t) {
            double w = diag[static_cast<std::size_t>(t)] - sub[static_cast<std::size_t>(t)] * cp[static_cast<std::size_t>(t) - 1];
            cp[static_cast<std::size_t>(t)] = sup[static_cast<std::size_t>(t)] / w;
            dp[static_cast<std::size_t>(t)] =
                (rhs[static_cast<std::size_t>(t)] - sub[static_cast<std::size_t>(t)] * dp[static_cast<std::size_t>(t) - 1]) / w;
        }
        x[static_cast<std::size_t>(T) - 1] = dp[static_cast<std::size_t>(T) - 1];
        for (int t = T - 2; t >= 0; --t)
            x[static_cast<std::size_t>(t)] = dp[static_cast<std::size_t>(t)] - cp[static_cast<std::size_t>(t)] * x[static_cast<std::size_t>(t) + 1];

        for (int t = 0; t < T; ++t)
            out.frames[static_cast<std::size_t>(t)].coords[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(t)];
    }

    // Pinned frames are the inputs, bit for bit.
    for (int t = 0; t < T; ++t)
        if (pinned[static_cast<std::size_t>(t)]) out.frames[static_cast<std::size_t>(t)] = *pinned[static_cast<std::size_t>(t)];
    return out;
}

double poisson_blend_residual(const PoseSequence& generated, const PoseSequence& blended,
                              const ConstraintSet& constraints) {
    const int T = generated.length();
    const int D = static_cast<int>(generated.frames.front().coords.size());
    std::vector<char> pinned(static_cast<std::size_t>(T), 0);
    for (const auto& [idx, pose] : constraints.entries) pinned[static_cast<std::size_t>(idx)] = 1;

    double worst = 0.0;
    for (int d = 0; d < D; ++d) {
        auto g = [&](int t) { return generated.frames[static_cast<std::size_t>(t)].coords[static_cast<std::size_t>(d)]; };
        auto b = [&](int t) { return blended.frames[static_cast<std::size_t>(t)].coords[static_cast<std::size_t>(d)]; };
        for (int t = 0; t < T; ++t) {
            double r = 0.0;
            if (pinned[static_cast<std::size_t>(t)]) {
                for (const auto& [idx, pose] : constraints.entries)
                    if (idx == t) r = b(t) - pose.coords[static_cast<std::size_t>(d)];
            } else if (t == 0) {
                r = (b(0) - b(1)) - (g(0) - g(1));
            } else if (t == T - 1) {
                r = (b(t) - b(t - 1)) - (g(t) - g(t - 1));
            } else {
                r = (2 * b(t) - b(t - 1) - b(t + 1)) - (2 * g(t) - g(t - 1) - g(t + 1));
            }
            worst = std::max(worst, std::abs(r));
        }
    }
    return worst;
}

}  // namespace poseforge
