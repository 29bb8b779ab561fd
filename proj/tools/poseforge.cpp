#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "poseforge/checkpoint.hpp"
#include "poseforge/image_io.hpp"
#include "poseforge/inverter.hpp"
#include "poseforge/render.hpp"
#include "poseforge/runconfig.hpp"

namespace pf = poseforge;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

pf::RunConfig resolve_config(const CommonOpts& opts) {
    pf::RunConfig cfg = opts.config_path.empty() ? pf::RunConfig{} : pf::RunConfig::load(opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
    } else if (const char* env = std::getenv("POSEFORGE_SEED")) {
        cfg.seed = std::strtoull(env, nullptr, 10);
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration");
    cmd->add_option("--seed", opts.seed, "RNG seed (overrides config and POSEFORGE_SEED)");
}

void write_history(const std::vector<pf::StepRecord>& history, const std::string& path) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!path.empty()) {
        file.open(path);
        if (!file) throw std::runtime_error("cannot open history file " + path);
        out = &file;
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
        nlohmann::json rec;
        rec["step"] = i;
        rec["kind"] = history[i].kind == pf::StepRecord::Kind::Critic ? "critic" : "generator";
        rec["loss"] = history[i].loss;
        (*out) << rec.dump() << "\n";
    }
}

std::vector<std::pair<pf::PoseVector, pf::ClassId>> labeled_frames(const pf::Dataset& ds) {
    std::vector<std::pair<pf::PoseVector, pf::ClassId>> out;
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        if (ds.split[i] != pf::Split::Train) continue;
        for (const pf::PoseVector& f : ds.sequences[i].frames) out.emplace_back(f, ds.sequences[i].label);
    }
    return out;
}

void check_pose_dims(const pf::RunConfig& cfg, const pf::SinglePoseGenerator& g0) {
    cfg.expect(g0.J == cfg.J, "pose checkpoint J=" + std::to_string(g0.J) + " vs config J=" + std::to_string(cfg.J));
    cfg.expect(g0.m == cfg.m, "pose checkpoint m=" + std::to_string(g0.m) + " vs config m=" + std::to_string(cfg.m));
    cfg.expect(g0.C == cfg.C, "pose checkpoint C=" + std::to_string(g0.C) + " vs config C=" + std::to_string(cfg.C));
}

void check_seq_dims(const pf::RunConfig& cfg, const pf::SequenceGenerator& gps) {
    cfg.expect(gps.m == cfg.m, "sequence checkpoint m mismatch");
    cfg.expect(gps.n == cfg.n, "sequence checkpoint n=" + std::to_string(gps.n) + " vs config n=" + std::to_string(cfg.n));
    cfg.expect(gps.C == cfg.C, "sequence checkpoint C mismatch");
}

pf::Dataset single_sequence_dataset(const pf::PoseSequence& seq, const std::vector<std::string>& classes) {
    pf::Dataset out;
    out.classes = classes;
    out.sequences.push_back(seq);
    out.split.push_back(pf::Split::Train);
    return out;
}

int parse_pin(const std::string& token, int T) {
    if (token == "last") return T - 1;
    try {
        std::size_t used = 0;
        int v = std::stoi(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (...) {
        throw pf::ConfigError("--pin expects a frame index or 'last', got '" + token + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poseforge: two-stage human-motion generation, prediction and completion"};
    app.require_subcommand(1);

    // gen-data
    CommonOpts gd_opts;
    std::string gd_out;
    int gd_per_class = -1, gd_length = -1;
    auto* gd = app.add_subcommand("gen-data", "generate the procedural motion dataset");
    add_common(gd, gd_opts);
    gd->add_option("--out", gd_out, "output sequence file")->required();
    gd->add_option("--per-class", gd_per_class, "sequences per class");
    gd->add_option("--length", gd_length, "frames per sequence");

    // train-pose
    CommonOpts tp_opts;
    std::string tp_data, tp_out, tp_history;
    int tp_epochs = -1, tp_batch = -1;
    auto* tp = app.add_subcommand("train-pose", "train the single-pose WGAN-GP");
    add_common(tp, tp_opts);
    tp->add_option("--data", tp_data, "training sequence file")->required();
    tp->add_option("--out", tp_out, "output checkpoint")->required();
    tp->add_option("--epochs", tp_epochs, "training epochs");
    tp->add_option("--batch", tp_batch, "batch size");
    tp->add_option("--history", tp_history, "write loss records here instead of stdout");

    // train-seq
    CommonOpts ts_opts;
    std::string ts_data, ts_pose, ts_out, ts_history;
    int ts_epochs = -1;
    auto* ts = app.add_subcommand("train-seq", "train the latent-shift sequence GAN");
    add_common(ts, ts_opts);
    ts->add_option("--data", ts_data, "training sequence file")->required();
    ts->add_option("--pose", ts_pose, "pose checkpoint")->required();
    ts->add_option("--out", ts_out, "output checkpoint")->required();
    ts->add_option("--epochs", ts_epochs, "training epochs");
    ts->add_option("--history", ts_history, "write loss records here instead of stdout");

    // train-s2i
    CommonOpts t2_opts;
    std::string t2_data, t2_out;
    int t2_pairs = 500, t2_epochs = -1;
    auto* t2 = app.add_subcommand("train-s2i", "train the skeleton-to-image transformer");
    add_common(t2, t2_opts);
    t2->add_option("--data", t2_data, "training sequence file")->required();
    t2->add_option("--out", t2_out, "output checkpoint")->required();
    t2->add_option("--pairs", t2_pairs, "training pairs to draw from the dataset");
    t2->add_option("--epochs", t2_epochs, "training epochs");

    // generate
    CommonOpts ge_opts;
    std::string ge_pose, ge_seq, ge_out, ge_class, ge_data;
    int ge_count = 16, ge_length = -1;
    auto* ge = app.add_subcommand("generate", "sample pose sequences from noise");
    add_common(ge, ge_opts);
    ge->add_option("--pose", ge_pose, "pose checkpoint")->required();
    ge->add_option("--seq", ge_seq, "sequence checkpoint")->required();
    ge->add_option("--out", ge_out, "output sequence file")->required();
    ge->add_option("--count", ge_count, "number of sequences");
    ge->add_option("--length", ge_length, "frames per sequence (defaults to config T)");
    ge->add_option("--class", ge_class, "generate only this class");
    ge->add_option("--data", ge_data, "sequence file supplying class names");

    // predict
    CommonOpts pr_opts;
    std::string pr_pose, pr_seq, pr_input, pr_out;
    int pr_index = 0, pr_frames = 4;
    auto* pr = app.add_subcommand("predict", "complete a sequence from its first frames");
    add_common(pr, pr_opts);
    pr->add_option("--pose", pr_pose, "pose checkpoint")->required();
    pr->add_option("--seq", pr_seq, "sequence checkpoint")->required();
    pr->add_option("--input", pr_input, "sequence file with the conditioning data")->required();
    pr->add_option("--index", pr_index, "sequence index within the input file");
    pr->add_option("--frames", pr_frames, "number of leading frames to constrain");
    pr->add_option("--out", pr_out, "output sequence file")->required();

    // complete
    CommonOpts co_opts;
    std::string co_pose, co_seq, co_input, co_out;
    int co_index = 0;
    std::vector<std::string> co_pins;
    auto* co = app.add_subcommand("complete", "complete a sequence from pinned frames");
    add_common(co, co_opts);
    co->add_option("--pose", co_pose, "pose checkpoint")->required();
    co->add_option("--seq", co_seq, "sequence checkpoint")->required();
    co->add_option("--input", co_input, "sequence file with the conditioning data")->required();
    co->add_option("--index", co_index, "sequence index within the input file");
    co->add_option("--pin", co_pins, "frame index or 'last'; repeatable")->required();
    co->add_option("--out", co_out, "output sequence file")->required();

    // score
    CommonOpts sc_opts;
    std::string sc_data, sc_input, sc_out, sc_clf_in, sc_clf_out;
    auto* sc = app.add_subcommand("score", "train the action classifier and report Inception Scores");
    add_common(sc, sc_opts);
    sc->add_option("--data", sc_data, "labeled dataset with train/test splits")->required();
    sc->add_option("--input", sc_input, "sequences to score (defaults to the test split)");
    sc->add_option("--out", sc_out, "write the report JSON here");
    sc->add_option("--classifier", sc_clf_in, "reuse a trained classifier checkpoint");
    sc->add_option("--save-classifier", sc_clf_out, "save the trained classifier");

    // render
    CommonOpts re_opts;
    std::string re_input, re_outdir, re_s2i;
    int re_index = 0, re_delay = 8;
    bool re_pixels = false;
    auto* re = app.add_subcommand("render", "rasterize a sequence to PNG frames and a GIF");
    add_common(re, re_opts);
    re->add_option("--input", re_input, "sequence file")->required();
    re->add_option("--index", re_index, "sequence index within the input file");
    re->add_option("--outdir", re_outdir, "output directory")->required();
    re->add_option("--s2i", re_s2i, "skeleton-to-image checkpoint");
    re->add_flag("--pixels", re_pixels, "also emit pixel-space frames (needs --s2i)");
    re->add_option("--gif-delay", re_delay, "GIF frame delay in 1/100 s");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gd->parsed()) {
            pf::RunConfig cfg = resolve_config(gd_opts);
            if (gd_per_class > 0) cfg.per_class = gd_per_class;
            if (gd_length > 0) cfg.T = gd_length;
            pf::SkeletonSpec skel = pf::SkeletonSpec::default7();
            auto specs = pf::default_class_specs(skel);
            cfg.expect(static_cast<int>(specs.size()) == cfg.C,
                       "default class set has " + std::to_string(specs.size()) + " classes");
            pf::Dataset ds = pf::generate_dataset(specs, skel, cfg.per_class, cfg.T, cfg.seed);
            pf::save_sequences(ds, gd_out);
            std::cout << "wrote " << ds.sequences.size() << " sequences to " << gd_out << "\n";
        } else if (tp->parsed()) {
            pf::RunConfig cfg = resolve_config(tp_opts);
            if (tp_epochs > 0) cfg.pose.epochs = tp_epochs;
            if (tp_batch > 0) cfg.pose.batch = tp_batch;
            pf::Dataset ds = pf::load_sequences(tp_data);
            auto data = labeled_frames(ds);
            cfg.expect(!data.empty(), "dataset has no training split");
            cfg.expect(data.front().first.joints() == cfg.J, "dataset J differs from config");
            cfg.expect(data.front().second.count == cfg.C, "dataset C differs from config");
            pf::PoseGanResult res = pf::train_single_pose(data, cfg.pose, cfg.seed, cfg.m);
            pf::save_pose_gan(tp_out, res.g0, res.d0);
            write_history(res.history, tp_history);
            std::cout << "wrote " << tp_out << "\n";
        } else if (ts->parsed()) {
            pf::RunConfig cfg = resolve_config(ts_opts);
            if (ts_epochs > 0) cfg.seq.epochs = ts_epochs;
            cfg.seq.noise_dim = cfg.n;
            auto [g0, d0] = pf::load_pose_gan(ts_pose);
            check_pose_dims(cfg, g0);
            pf::Dataset ds = pf::load_sequences(ts_data);
            auto train = ds.train_view();
            cfg.expect(!train.empty(), "dataset has no training split");
            cfg.expect(train.front().length() == cfg.T, "dataset T differs from config");
            pf::SeqGanResult res = pf::train_sequence(train, g0, cfg.seq, cfg.seed);
            pf::save_seq_gan(ts_out, res.gps, res.dps);
            write_history(res.history, ts_history);
            std::cout << "wrote " << ts_out << "\n";
        } else if (t2->parsed()) {
            pf::RunConfig cfg = resolve_config(t2_opts);
            if (t2_epochs > 0) cfg.s2i.epochs = t2_epochs;
            pf::Dataset ds = pf::load_sequences(t2_data);
            auto train = ds.train_view();
            cfg.expect(!train.empty(), "dataset has no training split");
            pf::SkeletonSpec skel = pf::SkeletonSpec::default7();
            cfg.expect(train.front().joints() == skel.joint_count, "dataset J differs from skeleton");
            pf::StickStyle style = pf::StickStyle::scaled_for(cfg.width);
            std::vector<pf::S2iPair> pairs;
            for (std::size_t i = 0; pairs.size() < static_cast<std::size_t>(t2_pairs); ++i) {
                const pf::PoseSequence& s = train[i % train.size()];
                int t = static_cast<int>((i / train.size()) % static_cast<std::size_t>(s.length()));
                pf::Tensor ref = pf::render_stick_figure(s.frames.front(), skel, cfg.width, cfg.height, style);
                pf::Tensor truth = pf::render_stick_figure(s.frames[static_cast<std::size_t>(t)], skel,
                                                           cfg.width, cfg.height, style);
                pairs.push_back({s.frames[static_cast<std::size_t>(t)], std::move(ref), std::move(truth)});
            }
            pf::S2iResult res = pf::train_s2i(pairs, cfg.s2i, cfg.seed);
            pf::save_skel2img(t2_out, res.f);
            for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
                std::cout << "epoch " << e << " bce " << res.epoch_loss[e].first << " fm "
                          << res.epoch_loss[e].second << "\n";
            std::cout << "wrote " << t2_out << "\n";
        } else if (ge->parsed()) {
            pf::RunConfig cfg = resolve_config(ge_opts);
            auto [g0, d0] = pf::load_pose_gan(ge_pose);
            check_pose_dims(cfg, g0);
            auto [gps, dps] = pf::load_seq_gan(ge_seq);
            check_seq_dims(cfg, gps);
            int T = ge_length > 0 ? ge_length : cfg.T;

            std::vector<std::string> classes;
            if (!ge_data.empty()) {
                classes = pf::load_sequences(ge_data).classes;
            } else {
                for (int c = 0; c < cfg.C; ++c) classes.push_back("class-" + std::to_string(c));
            }
            cfg.expect(static_cast<int>(classes.size()) == cfg.C, "class vocabulary size differs from config");

            int fixed_class = -1;
            if (!ge_class.empty()) {
                for (std::size_t c = 0; c < classes.size(); ++c)
                    if (classes[c] == ge_class) fixed_class = static_cast<int>(c);
                cfg.expect(fixed_class >= 0, "unknown class '" + ge_class + "'");
            }

            pf::Rng rng(cfg.seed);
            pf::Dataset out;
            out.classes = classes;
            for (int i = 0; i < ge_count; ++i) {
                pf::ClassId cls{fixed_class >= 0 ? fixed_class : i % cfg.C, cfg.C};
                pf::Tensor z = rng.normal_tensor({gps.n});
                pf::Tensor z0 = rng.uniform_tensor({gps.m}, -1.0, 1.0);
                out.sequences.push_back(pf::gps_forward(gps, z, z0, cls, g0, T));
                out.split.push_back(pf::Split::Train);
            }
            pf::save_sequences(out, ge_out);
            std::cout << "wrote " << ge_count << " sequences to " << ge_out << "\n";
        } else if (pr->parsed() || co->parsed()) {
            bool is_predict = pr->parsed();
            CommonOpts& opts = is_predict ? pr_opts : co_opts;
            pf::RunConfig cfg = resolve_config(opts);
            auto [g0, d0] = pf::load_pose_gan(is_predict ? pr_pose : co_pose);
            check_pose_dims(cfg, g0);
            auto [gps, dps] = pf::load_seq_gan(is_predict ? pr_seq : co_seq);
            check_seq_dims(cfg, gps);

            pf::Dataset in = pf::load_sequences(is_predict ? pr_input : co_input);
            int index = is_predict ? pr_index : co_index;
            cfg.expect(index >= 0 && index < static_cast<int>(in.sequences.size()),
                       "sequence index out of range");
            const pf::PoseSequence& seq = in.sequences[static_cast<std::size_t>(index)];
            cfg.expect(seq.joints() == cfg.J, "input sequence J differs from config");

            cfg.inversion.T = cfg.T;
            cfg.inversion.seed = cfg.seed;
            pf::InverterModels models{&g0, &gps, &dps};

            pf::CompletionResult res;
            if (is_predict) {
                cfg.expect(pr_frames >= 1 && pr_frames < cfg.T, "--frames must be in [1, T)");
                cfg.expect(pr_frames <= seq.length(), "input sequence shorter than --frames");
                std::vector<pf::PoseVector> prefix(seq.frames.begin(), seq.frames.begin() + pr_frames);
                res = pf::predict(prefix, seq.label, models, cfg.inversion);
            } else {
                pf::ConstraintSet constraints;
                constraints.cls = seq.label;
                std::vector<int> pins;
                for (const std::string& p : co_pins) pins.push_back(parse_pin(p, cfg.T));
                std::sort(pins.begin(), pins.end());
                pins.erase(std::unique(pins.begin(), pins.end()), pins.end());
                for (int p : pins) {
                    cfg.expect(p >= 0 && p < cfg.T, "--pin index out of range");
                    cfg.expect(p < seq.length(), "input sequence has no frame " + std::to_string(p));
                    constraints.entries.emplace_back(p, seq.frames[static_cast<std::size_t>(p)]);
                }
                res = pf::complete(constraints, models, cfg.inversion);
            }

            pf::Dataset out = single_sequence_dataset(res.sequence, in.classes);
            pf::save_sequences(out, is_predict ? pr_out : co_out);
            std::cout << (res.converged ? "converged" : "non-convergent (best effort)")
                      << " objective " << res.objective << " contextual " << res.contextual << "\n";
        } else if (sc->parsed()) {
            pf::RunConfig cfg = resolve_config(sc_opts);
            pf::Dataset ds = pf::load_sequences(sc_data);
            pf::ensure_both_splits(ds);
            pf::ActionClassifier clf;
            if (!sc_clf_in.empty()) {
                clf = pf::load_classifier(sc_clf_in);
                cfg.expect(clf.J == cfg.J && clf.C == static_cast<int>(ds.classes.size()),
                           "classifier checkpoint dims differ");
            } else {
                clf = pf::train_classifier(ds, cfg.seed, cfg.classifier);
            }
            if (!sc_clf_out.empty()) pf::save_classifier(sc_clf_out, clf);

            double acc = pf::video_accuracy(clf, ds.test_view());
            std::vector<pf::PoseSequence> subject =
                sc_input.empty() ? ds.test_view() : pf::load_sequences(sc_input).sequences;
            pf::ScoreReport report = pf::score_sequences(subject, clf, cfg.splits);

            nlohmann::json j;
            j["held_out_accuracy"] = acc;
            j["frame_is"] = {{"mean", report.frame_is_mean}, {"std", report.frame_is_std}};
            j["video_is"] = {{"mean", report.video_is_mean}, {"std", report.video_is_std}};
            j["per_timestep"] = report.per_timestep;
            std::string text = j.dump(2);
            if (!sc_out.empty()) {
                std::ofstream f(sc_out);
                if (!f) throw std::runtime_error("cannot open " + sc_out);
                f << text << "\n";
            }
            std::cout << text << "\n";
        } else if (re->parsed()) {
            pf::RunConfig cfg = resolve_config(re_opts);
            pf::Dataset in = pf::load_sequences(re_input);
            cfg.expect(re_index >= 0 && re_index < static_cast<int>(in.sequences.size()),
                       "sequence index out of range");
            const pf::PoseSequence& seq = in.sequences[static_cast<std::size_t>(re_index)];
            pf::SkeletonSpec skel = pf::SkeletonSpec::default7();
            cfg.expect(seq.joints() == skel.joint_count, "sequence J differs from skeleton");
            if (re_pixels && re_s2i.empty())
                throw pf::ConfigError("--pixels requires an --s2i checkpoint");

            fs::create_directories(re_outdir);
            pf::StickStyle style = pf::StickStyle::scaled_for(cfg.width);
            std::vector<pf::Tensor> sticks;
            for (int t = 0; t < seq.length(); ++t) {
                sticks.push_back(pf::render_stick_figure(seq.frames[static_cast<std::size_t>(t)], skel,
                                                         cfg.width, cfg.height, style));
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%03d.png", t);
                pf::write_png((fs::path(re_outdir) / name).string(), sticks.back());
            }
            pf::write_gif((fs::path(re_outdir) / "anim.gif").string(), sticks, re_delay);

            if (re_pixels) {
                pf::TransformerF f = pf::load_skel2img(re_s2i);
                cfg.expect(f.J == cfg.J && f.width == cfg.width, "s2i checkpoint dims differ");
                pf::Tensor ref = sticks.front();
                double sigma = cfg.s2i.sigma > 0 ? cfg.s2i.sigma : pf::default_heatmap_sigma(cfg.width);
                for (int t = 0; t < seq.length(); ++t) {
                    pf::HeatMapStack heat =
                        pf::heatmap_encode(seq.frames[static_cast<std::size_t>(t)], sigma, cfg.width, cfg.height);
                    pf::Tensor img = pf::f_forward(heat, ref, f);
                    char name[32];
                    std::snprintf(name, sizeof(name), "pixel_%03d.png", t);
                    pf::write_png((fs::path(re_outdir) / name).string(), img);
                }
            }
            std::cout << "wrote " << seq.length() << " frames to " << re_outdir << "\n";
        }
    } catch (const pf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pf::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
