#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "poseforge/heatmap.hpp"
#include "poseforge/render.hpp"
#include "poseforge/skeleton.hpp"

using namespace poseforge;

namespace {

PoseVector upright_pose() {
    PoseVector p(7);
    p.set(0, 0.0, 0.0);    // hip
    p.set(1, 0.0, -1.0);   // neck
    p.set(2, 0.0, -0.85);  // head
    p.set(3, -0.55, -0.55);
    p.set(4, 0.55, -0.55);
    p.set(5, -0.22, 0.75);
    p.set(6, 0.22, 0.75);
    return p;
}

PoseVector translate_scale(const PoseVector& p, double tx, double ty, double s) {
    PoseVector out(p.joints());
    for (int j = 0; j < p.joints(); ++j) out.set(j, p.x(j) * s + tx, p.y(j) * s + ty);
    return out;
}

}  // namespace

TEST_CASE("skeleton: default spec is a valid tree") {
    SkeletonSpec s = SkeletonSpec::default7();
    CHECK_NOTHROW(s.validate());
    CHECK(s.joint_count == 7);
    CHECK(s.bones.size() == 6);
}

TEST_CASE("skeleton: broken topologies are rejected") {
    SkeletonSpec s = SkeletonSpec::default7();
    s.bones.pop_back();
    CHECK_THROWS(s.validate());
    SkeletonSpec s2 = SkeletonSpec::default7();
    s2.bones[0] = {2, 2};  // disconnects joint 1's subtree from the hip
    CHECK_THROWS(s2.validate());
}

TEST_CASE("normalize_pose: hip lands at the origin") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector p = translate_scale(upright_pose(), 5.0, 7.0, 1.0);
    PoseVector n = normalize_pose(p, spec);
    CHECK(n.x(0) == doctest::Approx(0.0));
    CHECK(n.y(0) == doctest::Approx(0.0));
}

TEST_CASE("normalize_pose: reference bone of length 2 halves hip-relative coordinates") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector p = translate_scale(upright_pose(), 0.0, 0.0, 2.0);
    PoseVector n = normalize_pose(p, spec);
    PoseVector base = upright_pose();
    for (int j = 0; j < 7; ++j) {
        CHECK(n.x(j) == doctest::Approx(base.x(j)).epsilon(1e-12));
        CHECK(n.y(j) == doctest::Approx(base.y(j)).epsilon(1e-12));
    }
}

TEST_CASE("normalize_pose: idempotent") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector p = translate_scale(upright_pose(), -3.0, 2.0, 0.7);
    PoseVector once = normalize_pose(p, spec);
    PoseVector twice = normalize_pose(once, spec);
    for (std::size_t i = 0; i < once.coords.size(); ++i)
        CHECK(std::abs(once.coords[i] - twice.coords[i]) < 1e-12);
}

TEST_CASE("normalize_pose: invariant under input translation and scale") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector a = normalize_pose(translate_scale(upright_pose(), 1.0, -2.0, 3.0), spec);
    PoseVector b = normalize_pose(translate_scale(upright_pose(), -4.0, 0.5, 0.25), spec);
    for (std::size_t i = 0; i < a.coords.size(); ++i) CHECK(std::abs(a.coords[i] - b.coords[i]) < 1e-12);
}

TEST_CASE("normalize_pose: zero-length reference bone is an error") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector p = upright_pose();
    p.set(1, 0.0, 0.0);  // neck on the hip
    CHECK_THROWS(normalize_pose(p, spec));
}

TEST_CASE("heatmap_encode: closed-form values at sigma multiples") {
    // One joint at the center of an odd-sized map so it sits on a pixel center.
    PoseVector p(1);
    p.set(0, 0.0, 0.0);
    const int w = 9, h = 9;
    const double sigma = 2.0;
    HeatMapStack s = heatmap_encode(p, sigma, w, h);
    auto at = [&](int r, int c) { return s.maps[static_cast<std::int64_t>(r) * w + c]; };
    CHECK(at(4, 4) == doctest::Approx(1.0));                       // p == l_j
    CHECK(at(4, 6) == doctest::Approx(std::exp(-1.0)));            // distance sigma
    CHECK(at(4, 8) == doctest::Approx(std::exp(-4.0)));            // distance 2 sigma
    CHECK(at(0, 4) == doctest::Approx(std::exp(-16.0 / 4.0)));     // distance 4 = 2 sigma
}

TEST_CASE("heatmap_encode: values in (0,1], argmax at the nearest pixel") {
    PoseVector p(2);
    p.set(0, 0.3, -0.4);
    p.set(1, -0.9, 0.9);
    const int w = 16, h = 16;
    HeatMapStack s = heatmap_encode(p, default_heatmap_sigma(w), w, h);
    for (int j = 0; j < 2; ++j) {
        double lx = (p.x(j) + 1.0) * 0.5 * w;
        double ly = (p.y(j) + 1.0) * 0.5 * h;
        int best = -1;
        double best_v = -1.0;
        for (int i = 0; i < w * h; ++i) {
            double v = s.maps[static_cast<std::int64_t>(j) * w * h + i];
            CHECK(v >= 0.0);  // exp underflows to 0 at extreme distances
            CHECK(v <= 1.0);
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        int br = best / w, bc = best % w;
        // The argmax pixel center must be the one nearest the joint.
        double d_best = std::hypot(bc + 0.5 - lx, br + 0.5 - ly);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                CHECK(d_best <= std::hypot(c + 0.5 - lx, r + 0.5 - ly) + 1e-12);
    }
}

TEST_CASE("heatmap_encode: parameter validation") {
    PoseVector p(1);
    CHECK_THROWS(heatmap_encode(p, 0.0, 8, 8));
    CHECK_THROWS(heatmap_encode(p, 1.0, 0, 8));
}

TEST_CASE("render: single joint disc at the center, dark corners") {
    SkeletonSpec spec;
    spec.joint_count = 2;
    spec.joint_names = {"a", "b"};
    spec.bones = {{0, 1}};
    spec.hip_index = 0;
    spec.reference_bone = {0, 1};

    PoseVector p(2);
    p.set(0, 0.0, 0.0);
    p.set(1, 0.0, 0.0);  // both joints at the center: a bright disc, no visible bone
    Tensor img = render_stick_figure(p, spec, 33, 33, {1.6, 1.8});
    auto at = [&](int ch, int r, int c) { return img[(static_cast<std::int64_t>(ch) * 33 + r) * 33 + c]; };
    CHECK(at(0, 16, 16) == doctest::Approx(1.0));
    CHECK(at(0, 0, 0) == 0.0);
    CHECK(at(1, 0, 32) == 0.0);
    CHECK(at(2, 32, 0) == 0.0);
}

TEST_CASE("render: pose far outside the frame leaves the image black") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector p = upright_pose();
    for (double& c : p.coords) c += 50.0;
    Tensor img = render_stick_figure(p, spec, 32, 32);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(img[i] == 0.0);
}

TEST_CASE("render: deterministic") {
    SkeletonSpec spec = SkeletonSpec::default7();
    Tensor a = render_stick_figure(upright_pose(), spec, 32, 32);
    Tensor b = render_stick_figure(upright_pose(), spec, 32, 32);
    CHECK(a == b);
}

TEST_CASE("render: rejects non-finite poses") {
    SkeletonSpec spec = SkeletonSpec::default7();
    PoseVector p = upright_pose();
    p.coords[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS(render_stick_figure(p, spec, 32, 32));
}

TEST_CASE("class one-hot") {
    ClassId c{2, 5};
    Tensor oh = c.one_hot();
    CHECK(oh.size() == 5);
    double sum = 0;
    for (int i = 0; i < 5; ++i) sum += oh[i];
    CHECK(sum == 1.0);
    CHECK(oh[2] == 1.0);
    CHECK_THROWS(ClassId{7, 5}.one_hot());
}
