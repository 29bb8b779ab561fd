#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "poseforge/checkpoint.hpp"
#include "poseforge/image_io.hpp"
#include "poseforge/render.hpp"
#include "poseforge/runconfig.hpp"

using namespace poseforge;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/pf_io_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("checkpoint: pose-gan round trip is byte-identical") {
    Rng rng(3);
    SinglePoseGenerator g0 = SinglePoseGenerator::init(8, 5, 7, {32, 32}, rng);
    PoseCritic d0 = PoseCritic::init(5, 7, {32, 32}, rng);

    TempFile a("pose_a.ckpt"), b("pose_b.ckpt");
    save_pose_gan(a.path, g0, d0);
    auto [g2, d2] = load_pose_gan(a.path);
    CHECK(g2.mlp.params == g0.mlp.params);
    CHECK(d2.mlp.params == d0.mlp.params);
    CHECK(g2.m == 8);
    CHECK(g2.C == 5);
    CHECK(g2.J == 7);
    save_pose_gan(b.path, g2, d2);
    CHECK(slurp(a.path) == slurp(b.path));
}

TEST_CASE("checkpoint: seq-gan, s2i, classifier round trips") {
    Rng rng(4);
    SequenceGenerator gps = SequenceGenerator::init(12, 8, 16, 5, rng);
    SequenceDiscriminator dps = SequenceDiscriminator::init(7, 5, 16, rng);
    TempFile sq("seq.ckpt");
    save_seq_gan(sq.path, gps, dps);
    auto [gps2, dps2] = load_seq_gan(sq.path);
    CHECK(gps2.params == gps.params);
    CHECK(dps2.params == dps.params);

    TransformerF f = TransformerF::init(7, 32, 32, rng);
    TempFile s2("s2i.ckpt");
    save_skel2img(s2.path, f);
    TransformerF f2 = load_skel2img(s2.path);
    CHECK(f2.params == f.params);
    CHECK(f2.width == 32);

    ActionClassifier clf;
    clf.J = 7;
    clf.C = 5;
    clf.pose_stream = Mlp::init({14, 64, 5}, rng);
    clf.motion_stream = Mlp::init({14, 64, 5}, rng);
    TempFile cl("clf.ckpt");
    save_classifier(cl.path, clf);
    ActionClassifier clf2 = load_classifier(cl.path);
    CHECK(clf2.pose_stream.params == clf.pose_stream.params);
    CHECK(clf2.motion_stream.params == clf.motion_stream.params);
}

TEST_CASE("checkpoint: corruption, truncation and kind mismatch rejected") {
    Rng rng(5);
    SinglePoseGenerator g0 = SinglePoseGenerator::init(4, 2, 3, {8}, rng);
    PoseCritic d0 = PoseCritic::init(2, 3, {8}, rng);
    TempFile a("bad.ckpt");
    save_pose_gan(a.path, g0, d0);

    // Flip one payload byte: checksum must catch it.
    auto bytes = slurp(a.path);
    bytes[bytes.size() / 2] ^= 0x40;
    {
        std::ofstream out(a.path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_pose_gan(a.path), CheckpointError);

    // Truncations rejected.
    save_pose_gan(a.path, g0, d0);
    bytes = slurp(a.path);
    bytes.resize(bytes.size() / 2);
    {
        std::ofstream out(a.path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_pose_gan(a.path), CheckpointError);

    // Wrong kind rejected.
    save_pose_gan(a.path, g0, d0);
    CHECK_THROWS_AS(load_seq_gan(a.path), CheckpointError);

    CHECK_THROWS_AS(load_pose_gan("/tmp/pf_io_does_not_exist.ckpt"), CheckpointError);
}

TEST_CASE("png and gif writers are deterministic") {
    SkeletonSpec skel = SkeletonSpec::default7();
    PoseVector p(7);
    p.set(0, 0.0, 0.0);
    p.set(1, 0.0, -0.9);
    p.set(2, 0.0, -0.75);
    p.set(3, -0.5, -0.5);
    p.set(4, 0.5, -0.5);
    p.set(5, -0.2, 0.7);
    p.set(6, 0.2, 0.7);
    Tensor img = render_stick_figure(p, skel, 32, 32);

    TempFile a("img_a.png"), b("img_b.png");
    write_png(a.path, img);
    write_png(b.path, img);
    auto pa = slurp(a.path);
    CHECK(pa == slurp(b.path));
    // PNG signature.
    CHECK(pa[0] == 137);
    CHECK(pa[1] == 'P');

    TempFile g1("anim_a.gif"), g2("anim_b.gif");
    PoseVector p2 = p;
    p2.set(3, -0.3, -0.7);
    std::vector<Tensor> frames{img, render_stick_figure(p2, skel, 32, 32)};
    write_gif(g1.path, frames, 8);
    write_gif(g2.path, frames, 8);
    auto ga = slurp(g1.path);
    CHECK(ga == slurp(g2.path));
    CHECK(ga[0] == 'G');
    CHECK(ga[1] == 'I');
    CHECK(ga[2] == 'F');
    CHECK(ga.back() == 0x3b);
}

TEST_CASE("runconfig: defaults validate; bad configs rejected") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    TempFile f("cfg.json");
    {
        std::ofstream out(f.path);
        out << R"({"dims": {"J": 7, "m": 4, "T": 8}, "seed": 42, "pose_gan": {"epochs": 2}})";
    }
    RunConfig loaded = RunConfig::load(f.path);
    CHECK(loaded.m == 4);
    CHECK(loaded.T == 8);
    CHECK(loaded.seed == 42);
    CHECK(loaded.pose.epochs == 2);
    CHECK(loaded.pose.gp_weight == 10.0);

    {
        std::ofstream out(f.path);
        out << R"({"dims": {"J": 0}})";
    }
    CHECK_THROWS_AS(RunConfig::load(f.path), ConfigError);
    {
        std::ofstream out(f.path);
        out << R"({"dims": {"w": 24, "h": 24}})";
    }
    CHECK_THROWS_AS(RunConfig::load(f.path), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/tmp/pf_io_missing.json"), ConfigError);
}
