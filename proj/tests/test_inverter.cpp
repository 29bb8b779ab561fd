#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "poseforge/inverter.hpp"

using namespace poseforge;

namespace {

struct TinyModels {
    SinglePoseGenerator g0;
    SequenceGenerator gps;
    SequenceDiscriminator dps;

    TinyModels() {
        Rng a(21), b(22), c(23);
        g0 = SinglePoseGenerator::init(3, 2, 2, {12}, a);
        gps = SequenceGenerator::init(6, 3, 12, 2, b);
        dps = SequenceDiscriminator::init(2, 2, 12, c);
    }
    InverterModels view() const { return {&g0, &gps, &dps}; }
};

PoseSequence line_sequence(std::vector<double> values) {
    PoseSequence s;
    for (double v : values) s.frames.push_back(PoseVector(std::vector<double>{v, 0.0}));
    return s;
}

ConstraintSet pin(const PoseSequence& seq, std::vector<int> idx, ClassId cls = {0, 1}) {
    ConstraintSet cs;
    cs.cls = cls;
    for (int i : idx) cs.entries.emplace_back(i, seq.frames[static_cast<std::size_t>(i)]);
    return cs;
}

}  // namespace

TEST_CASE("contextual_loss: exact match, simple value, unconstrained invariance") {
    TinyModels tm;
    InversionConfig cfg;
    cfg.T = 6;
    cfg.seed = 2;

    Rng rng(31);
    LatentState s;
    s.z0 = rng.uniform_tensor({3}, -1.0, 1.0);
    s.z = rng.normal_tensor({6});

    PoseSequence gen = gps_forward(tm.gps, s.z, s.z0, ClassId{0, 2}, tm.g0, cfg.T);

    ConstraintSet exact = pin(gen, {0, 5}, ClassId{0, 2});
    CHECK(contextual_loss(s, exact, tm.view(), cfg.T) == doctest::Approx(0.0).epsilon(1e-12));

    // Single constrained frame offset by known amounts: L1 sums them.
    ConstraintSet off;
    off.cls = ClassId{0, 2};
    PoseVector target = gen.frames[2];
    target.coords[0] += 1.0;
    target.coords[1] -= 2.0;
    off.entries.emplace_back(2, target);
    CHECK(contextual_loss(s, off, tm.view(), cfg.T) == doctest::Approx(3.0).epsilon(1e-9));

    // Changing an unconstrained frame's target changes nothing: the loss only
    // reads constrained indices.
    double before = contextual_loss(s, exact, tm.view(), cfg.T);
    ConstraintSet same = exact;
    CHECK(contextual_loss(s, same, tm.view(), cfg.T) == doctest::Approx(before));
}

TEST_CASE("perceptual_loss: closed-form values through a rigged discriminator") {
    TinyModels tm;
    // Zero head -> D = 0.5 everywhere -> loss log 2.
    for (std::int64_t i = 0; i < tm.dps.params[6].size(); ++i) tm.dps.params[6][i] = 0.0;
    tm.dps.params[7][0] = 0.0;
    Rng rng(33);
    LatentState s;
    s.z0 = rng.uniform_tensor({3}, -1.0, 1.0);
    s.z = rng.normal_tensor({6});
    CHECK(perceptual_loss(s, ClassId{0, 2}, tm.view(), 5) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // Head bias -> D = sigmoid(bias); -log sigmoid(bias) follows.
    tm.dps.params[7][0] = 3.0;
    double p = 1.0 / (1.0 + std::exp(-3.0));
    CHECK(perceptual_loss(s, ClassId{0, 2}, tm.view(), 5) == doctest::Approx(-std::log(p)).epsilon(1e-9));
}

TEST_CASE("constraint validation") {
    ConstraintSet cs;
    cs.cls = ClassId{0, 1};
    CHECK_THROWS(cs.validate(4, 2));  // empty
    cs.entries.emplace_back(5, PoseVector(2));
    CHECK_THROWS(cs.validate(4, 2));  // out of range
    cs.entries.clear();
    cs.entries.emplace_back(1, PoseVector(2));
    cs.entries.emplace_back(1, PoseVector(2));
    CHECK_THROWS(cs.validate(4, 2));  // duplicate
    cs.entries.clear();
    cs.entries.emplace_back(0, PoseVector(2));
    cs.entries.emplace_back(3, PoseVector(2));
    CHECK_NOTHROW(cs.validate(4, 2));
}

TEST_CASE("initialize: pool argmin contract and planted optimum") {
    TinyModels tm;
    InversionConfig cfg;
    cfg.T = 5;
    cfg.alpha = 0.0;
    cfg.pool = 40;
    cfg.seed = 909;

    // Plant: constraints generated from a pool member, found by brute force.
    // draw_pool consumes the rng exactly like initialize does.
    Rng rng(cfg.seed);
    std::vector<LatentState> pool;
    for (int i = 0; i < cfg.pool; ++i) {
        LatentState s;
        s.z0 = rng.uniform_tensor({3}, -1.0, 1.0);
        s.z = rng.normal_tensor({6});
        for (std::int64_t j = 0; j < s.z.size(); ++j) s.z[j] = std::clamp(s.z[j], -cfg.z_bound, cfg.z_bound);
        pool.push_back(std::move(s));
    }
    const LatentState& planted = pool[17];
    PoseSequence target = gps_forward(tm.gps, planted.z, planted.z0, ClassId{1, 2}, tm.g0, cfg.T);
    ConstraintSet cs = pin(target, {0, 2, 4}, ClassId{1, 2});

    LatentState found = initialize(cs, tm.view(), cfg);
    CHECK(contextual_loss(found, cs, tm.view(), cfg.T) == doctest::Approx(0.0).epsilon(1e-10));

    // Argmin contract: the returned objective is minimal over the pool.
    double found_obj = contextual_loss(found, cs, tm.view(), cfg.T);
    for (const LatentState& s : pool)
        CHECK(found_obj <= contextual_loss(s, cs, tm.view(), cfg.T) + 1e-12);

    // Pool of one returns that sample.
    InversionConfig one = cfg;
    one.pool = 1;
    Rng r2(one.seed);
    LatentState only;
    only.z0 = r2.uniform_tensor({3}, -1.0, 1.0);
    only.z = r2.normal_tensor({6});
    for (std::int64_t j = 0; j < only.z.size(); ++j) only.z[j] = std::clamp(only.z[j], -one.z_bound, one.z_bound);
    LatentState got = initialize(cs, tm.view(), one);
    CHECK(got.z0 == only.z0);
    CHECK(got.z == only.z);
}

TEST_CASE("poisson_blend: identity when constraints already hold") {
    PoseSequence gen = line_sequence({0.0, 0.5, 1.0, 1.5});
    ConstraintSet cs = pin(gen, {0, 3});
    PoseSequence out = poisson_blend(gen, cs);
    for (int t = 0; t < 4; ++t)
        CHECK(out.frames[static_cast<std::size_t>(t)].coords[0] ==
              doctest::Approx(gen.frames[static_cast<std::size_t>(t)].coords[0]).epsilon(1e-14));
    CHECK(poisson_blend_residual(gen, out, cs) < 1e-12);
}

TEST_CASE("poisson_blend: single constraint shifts the whole sequence") {
    PoseSequence gen = line_sequence({0.0, 0.4, 1.0, 0.3, -0.2, 0.6});
    ConstraintSet cs;
    cs.cls = ClassId{0, 1};
    PoseVector pinned = gen.frames[0];
    pinned.coords[0] += 0.25;
    cs.entries.emplace_back(0, pinned);
    PoseSequence out = poisson_blend(gen, cs);
    for (int t = 0; t < gen.length(); ++t)
        CHECK(std::abs(out.frames[static_cast<std::size_t>(t)].coords[0] -
                       (gen.frames[static_cast<std::size_t>(t)].coords[0] + 0.25)) < 1e-12);
}

TEST_CASE("poisson_blend: T=3 worked example solves the 1-variable quadratic") {
    PoseSequence gen = line_sequence({0.0, 1.0, 2.0});
    ConstraintSet cs;
    cs.cls = ClassId{0, 1};
    cs.entries.emplace_back(0, PoseVector(std::vector<double>{0.0, 0.0}));
    cs.entries.emplace_back(2, PoseVector(std::vector<double>{0.0, 0.0}));
    PoseSequence out = poisson_blend(gen, cs);
    CHECK(out.frames[0].coords[0] == 0.0);
    CHECK(out.frames[1].coords[0] == 0.0);
    CHECK(out.frames[2].coords[0] == 0.0);
}

TEST_CASE("poisson_blend: constrained frames are bit-equal and residual is tiny") {
    Rng rng(5);
    PoseSequence gen;
    for (int t = 0; t < 9; ++t) {
        PoseVector f(2);
        f.coords = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        gen.frames.push_back(f);
    }
    ConstraintSet cs;
    cs.cls = ClassId{0, 1};
    for (int idx : {1, 4, 8}) {
        PoseVector p(2);
        p.coords = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        cs.entries.emplace_back(idx, p);
    }
    PoseSequence out = poisson_blend(gen, cs);
    for (const auto& [idx, pose] : cs.entries)
        CHECK(out.frames[static_cast<std::size_t>(idx)].coords == pose.coords);
    CHECK(poisson_blend_residual(gen, out, cs) < 1e-9);
}

TEST_CASE("poisson_blend: translation property") {
    PoseSequence gen = line_sequence({0.2, -0.1, 0.7, 0.9, 0.4});
    ConstraintSet cs;
    cs.cls = ClassId{0, 1};
    cs.entries.emplace_back(1, PoseVector(std::vector<double>{0.5, 0.0}));
    cs.entries.emplace_back(3, PoseVector(std::vector<double>{-0.2, 0.0}));
    PoseSequence base = poisson_blend(gen, cs);

    const double delta = 0.77;
    PoseSequence gen_shift = gen;
    for (PoseVector& f : gen_shift.frames) f.coords[0] += delta;
    ConstraintSet cs_shift = cs;
    for (auto& [idx, pose] : cs_shift.entries) pose.coords[0] += delta;
    PoseSequence shifted = poisson_blend(gen_shift, cs_shift);
    for (int t = 0; t < gen.length(); ++t)
        CHECK(shifted.frames[static_cast<std::size_t>(t)].coords[0] ==
              doctest::Approx(base.frames[static_cast<std::size_t>(t)].coords[0] + delta).epsilon(1e-12));
}

TEST_CASE("complete: planted constraints recovered on tiny models") {
    TinyModels tm;
    InversionConfig cfg;
    cfg.T = 6;
    cfg.alpha = 0.0;
    cfg.pool = 48;
    cfg.restarts = 2;
    cfg.seed = 4242;
    cfg.lbfgsb.max_iters = 150;
    cfg.lbfgsb.grad_tol = 1e-8;

    Rng rng(55);
    LatentState planted;
    planted.z0 = rng.uniform_tensor({3}, -1.0, 1.0);
    planted.z = rng.normal_tensor({6});
    for (std::int64_t j = 0; j < planted.z.size(); ++j)
        planted.z[j] = std::clamp(planted.z[j], -cfg.z_bound, cfg.z_bound);
    PoseSequence target = gps_forward(tm.gps, planted.z, planted.z0, ClassId{0, 2}, tm.g0, cfg.T);
    ConstraintSet cs = pin(target, {0, 5}, ClassId{0, 2});

    CompletionResult res = complete(cs, tm.view(), cfg);
    CHECK(res.sequence.length() == cfg.T);
    // Constrained frames are returned bit-for-bit.
    CHECK(res.sequence.frames[0].coords == cs.entries[0].second.coords);
    CHECK(res.sequence.frames[5].coords == cs.entries[1].second.coords);
    // Tiny models are easy to invert; expect a close contextual fit.
    const double per_coord = res.contextual / (2.0 * 2 * tm.g0.J);
    CHECK(per_coord < 0.05);
    // Objective trace non-increasing in every restart.
    for (const auto& trace : res.restart_traces)
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
    // alpha = 0: objective equals contextual loss at the optimum.
    CHECK(res.objective == doctest::Approx(res.contextual).epsilon(1e-9));
}

TEST_CASE("complete: determinism in seed and inputs") {
    TinyModels tm;
    InversionConfig cfg;
    cfg.T = 5;
    cfg.pool = 16;
    cfg.restarts = 2;
    cfg.seed = 31337;
    cfg.lbfgsb.max_iters = 40;

    Rng rng(66);
    LatentState planted;
    planted.z0 = rng.uniform_tensor({3}, -1.0, 1.0);
    planted.z = rng.normal_tensor({6});
    PoseSequence target = gps_forward(tm.gps, planted.z, planted.z0, ClassId{1, 2}, tm.g0, cfg.T);
    ConstraintSet cs = pin(target, {0, 4}, ClassId{1, 2});

    CompletionResult a = complete(cs, tm.view(), cfg);
    CompletionResult b = complete(cs, tm.view(), cfg);
    CHECK(a.sequence == b.sequence);
    CHECK(a.objective == b.objective);
}

TEST_CASE("predict: prefix constraint construction and delegation") {
    TinyModels tm;
    InversionConfig cfg;
    cfg.T = 6;
    cfg.pool = 8;
    cfg.restarts = 1;
    cfg.seed = 11;
    cfg.lbfgsb.max_iters = 20;

    Rng rng(77);
    LatentState planted;
    planted.z0 = rng.uniform_tensor({3}, -1.0, 1.0);
    planted.z = rng.normal_tensor({6});
    PoseSequence target = gps_forward(tm.gps, planted.z, planted.z0, ClassId{0, 2}, tm.g0, cfg.T);

    std::vector<PoseVector> prefix(target.frames.begin(), target.frames.begin() + 4);
    CompletionResult res = predict(prefix, ClassId{0, 2}, tm.view(), cfg);
    CHECK(res.sequence.length() == cfg.T);
    for (int t = 0; t < 4; ++t) CHECK(res.sequence.frames[static_cast<std::size_t>(t)].coords == prefix[static_cast<std::size_t>(t)].coords);

    // t = T-1 leaves one free frame and keeps the prefix exact.
    std::vector<PoseVector> long_prefix(target.frames.begin(), target.frames.begin() + 5);
    CompletionResult res2 = predict(long_prefix, ClassId{0, 2}, tm.view(), cfg);
    for (int t = 0; t < 5; ++t)
        CHECK(res2.sequence.frames[static_cast<std::size_t>(t)].coords == long_prefix[static_cast<std::size_t>(t)].coords);

    CHECK_THROWS(predict(std::vector<PoseVector>(target.frames.begin(), target.frames.end()),
                         ClassId{0, 2}, tm.view(), cfg));  // t >= T
    CHECK_THROWS(predict({}, ClassId{0, 2}, tm.view(), cfg));
}
