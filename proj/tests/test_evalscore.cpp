#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "poseforge/evalscore.hpp"

using namespace poseforge;

namespace {

Dataset small_dataset(int per_class = 8, std::uint64_t seed = 41) {
    SkeletonSpec skel = SkeletonSpec::default7();
    return generate_dataset(default_class_specs(skel), skel, per_class, 16, seed);
}

ClassifierTrainConfig fast_cfg() {
    ClassifierTrainConfig cfg;
    cfg.epochs = 25;
    return cfg;
}

}  // namespace

TEST_CASE("inception_score: uniform distributions give 1") {
    std::vector<Tensor> dists(12, Tensor::full({4}, 0.25));
    auto [mean, stdev] = inception_score(dists, 3);
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stdev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("inception_score: distinct one-hots reach C") {
    std::vector<Tensor> dists;
    dists.push_back(Tensor({2}, {1.0, 0.0}));
    dists.push_back(Tensor({2}, {0.0, 1.0}));
    auto [mean, stdev] = inception_score(dists, 1);
    CHECK(mean == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(stdev == 0.0);
}

TEST_CASE("inception_score: matches the brute-force oracle") {
    std::vector<Tensor> dists;
    dists.push_back(Tensor({2}, {0.9, 0.1}));
    dists.push_back(Tensor({2}, {0.6, 0.4}));
    auto [mean, stdev] = inception_score(dists, 1);
    CHECK(mean == doctest::Approx(oracles::brute_force_is(dists)).epsilon(1e-9));

    Rng rng(13);
    std::vector<Tensor> random_dists;
    for (int i = 0; i < 37; ++i) {
        Tensor d({5});
        double s = 0;
        for (int c = 0; c < 5; ++c) {
            d[c] = rng.uniform(0.01, 1.0);
            s += d[c];
        }
        for (int c = 0; c < 5; ++c) d[c] /= s;
        random_dists.push_back(std::move(d));
    }
    auto [m1, s1] = inception_score(random_dists, 1);
    CHECK(m1 == doctest::Approx(oracles::brute_force_is(random_dists)).epsilon(1e-9));
}

TEST_CASE("inception_score: permutation invariance within one split") {
    Rng rng(17);
    std::vector<Tensor> dists;
    for (int i = 0; i < 20; ++i) {
        Tensor d({3});
        double s = 0;
        for (int c = 0; c < 3; ++c) {
            d[c] = rng.uniform(0.05, 1.0);
            s += d[c];
        }
        for (int c = 0; c < 3; ++c) d[c] /= s;
        dists.push_back(std::move(d));
    }
    auto [a, sa] = inception_score(dists, 1);
    std::reverse(dists.begin(), dists.end());
    auto [b, sb] = inception_score(dists, 1);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("inception_score: validation") {
    CHECK_THROWS(inception_score({}, 1));
    std::vector<Tensor> bad{Tensor({2}, {0.5, 0.2})};
    CHECK_THROWS(inception_score(bad, 1));
    std::vector<Tensor> neg{Tensor({2}, {-0.1, 1.1})};
    CHECK_THROWS(inception_score(neg, 1));
    std::vector<Tensor> ok{Tensor({2}, {0.5, 0.5})};
    CHECK_THROWS(inception_score(ok, 0));
}

TEST_CASE("train_classifier: validation and determinism") {
    Dataset ds = small_dataset(4);
    ClassifierTrainConfig cfg = fast_cfg();
    cfg.epochs = 3;
    ActionClassifier a = train_classifier(ds, 5, cfg);
    ActionClassifier b = train_classifier(ds, 5, cfg);
    CHECK(a.pose_stream.params == b.pose_stream.params);
    CHECK(a.motion_stream.params == b.motion_stream.params);

    Dataset no_test = ds;
    for (auto& s : no_test.split) s = Split::Train;
    CHECK_THROWS(train_classifier(no_test, 1, cfg));

    // Single-class dataset rejected as degenerate.
    SkeletonSpec skel = SkeletonSpec::default7();
    auto one_spec = std::vector<MotionClassSpec>{default_class_specs(skel)[0]};
    Dataset single = generate_dataset(one_spec, skel, 4, 8, 3);
    CHECK_THROWS(train_classifier(single, 1, cfg));
}

TEST_CASE("train_classifier: learns the synthetic classes") {
    Dataset ds = small_dataset(10, 43);
    ActionClassifier clf = train_classifier(ds, 7, {});  // default epochs
    CHECK(video_accuracy(clf, ds.test_view()) >= 0.9);
}

TEST_CASE("class distributions are valid and the per-timestep curve has length T") {
    Dataset ds = small_dataset(6, 44);
    ClassifierTrainConfig cfg = fast_cfg();
    cfg.epochs = 5;
    ActionClassifier clf = train_classifier(ds, 9, cfg);

    Tensor fd = frame_class_dist(clf, ds.sequences[0].frames[0]);
    Tensor vd = video_class_dist(clf, ds.sequences[0]);
    double s1 = 0, s2 = 0;
    for (std::int64_t i = 0; i < fd.size(); ++i) s1 += fd[i];
    for (std::int64_t i = 0; i < vd.size(); ++i) s2 += vd[i];
    CHECK(std::abs(s1 - 1.0) < 1e-9);
    CHECK(std::abs(s2 - 1.0) < 1e-9);

    ScoreReport rep = score_sequences(ds.test_view(), clf, 3);
    CHECK(static_cast<int>(rep.per_timestep.size()) == 16);
    CHECK(rep.frame_is_mean >= 1.0 - 1e-6);
    CHECK(rep.frame_is_mean <= 5.0 + 1e-6);
    CHECK(rep.video_is_mean >= 1.0 - 1e-6);
    CHECK(rep.video_is_mean <= 5.0 + 1e-6);
}

TEST_CASE("identical constant sequences score exactly 1") {
    Dataset ds = small_dataset(6, 45);
    ClassifierTrainConfig cfg = fast_cfg();
    cfg.epochs = 3;
    ActionClassifier clf = train_classifier(ds, 11, cfg);

    PoseSequence constant;
    constant.label = ClassId{0, 5};
    PoseVector f(7);
    for (int j = 0; j < 7; ++j) f.set(j, 0.1 * j - 0.3, 0.2);
    for (int t = 0; t < 16; ++t) constant.frames.push_back(f);
    std::vector<PoseSequence> same(10, constant);

    ScoreReport rep = score_sequences(same, clf, 1);
    CHECK(rep.frame_is_mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.video_is_mean == doctest::Approx(1.0).epsilon(1e-9));
}
