#include "poseforge/runconfig.hpp"

#include <json.hpp>

#include <fstream>

namespace poseforge {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

void load_adam(const nlohmann::json& j, AdamHyper& h) {
    maybe(j, "lr", h.lr);
    maybe(j, "beta1", h.beta1);
    maybe(j, "beta2", h.beta2);
    maybe(j, "eps", h.eps);
    maybe(j, "decay_factor", h.decay_factor);
    maybe(j, "decay_epoch", h.decay_epoch);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }

    RunConfig cfg;
    if (j.contains("dims")) {
        const auto& d = j["dims"];
        maybe(d, "J", cfg.J);
        maybe(d, "m", cfg.m);
        maybe(d, "n", cfg.n);
        maybe(d, "T", cfg.T);
        maybe(d, "C", cfg.C);
        maybe(d, "w", cfg.width);
        maybe(d, "h", cfg.height);
    }
    maybe(j, "seed", cfg.seed);
    maybe(j, "per_class", cfg.per_class);
    maybe(j, "splits", cfg.splits);

    if (j.contains("pose_gan")) {
        const auto& p = j["pose_gan"];
        maybe(p, "gp_weight", cfg.pose.gp_weight);
        maybe(p, "critic_iters_per_gen", cfg.pose.critic_iters_per_gen);
        maybe(p, "batch", cfg.pose.batch);
        maybe(p, "epochs", cfg.pose.epochs);
        maybe(p, "hidden", cfg.pose.hidden);
        if (p.contains("adam")) load_adam(p["adam"], cfg.pose.adam);
    }
    if (j.contains("seq_gan")) {
        const auto& p = j["seq_gan"];
        maybe(p, "l2_shift_weight", cfg.seq.l2_shift_weight);
        maybe(p, "latent_clamp", cfg.seq.latent_clamp);
        maybe(p, "batch", cfg.seq.batch);
        maybe(p, "epochs", cfg.seq.epochs);
        maybe(p, "gen_steps_per_disc", cfg.seq.gen_steps_per_disc);
        maybe(p, "hidden", cfg.seq.hidden);
        if (p.contains("adam")) load_adam(p["adam"], cfg.seq.adam);
    }
    if (j.contains("skel2img")) {
        const auto& p = j["skel2img"];
        maybe(p, "lambda", cfg.s2i.lambda);
        maybe(p, "batch", cfg.s2i.batch);
        maybe(p, "epochs", cfg.s2i.epochs);
        maybe(p, "sigma", cfg.s2i.sigma);
        maybe(p, "phi_seed", cfg.s2i.phi_seed);
        if (p.contains("adam")) load_adam(p["adam"], cfg.s2i.adam);
    }
    if (j.contains("inversion")) {
        const auto& p = j["inversion"];
        maybe(p, "alpha", cfg.inversion.alpha);
        maybe(p, "restarts", cfg.inversion.restarts);
        maybe(p, "pool", cfg.inversion.pool);
        maybe(p, "z_bound", cfg.inversion.z_bound);
        maybe(p, "max_iters", cfg.inversion.lbfgsb.max_iters);
        maybe(p, "grad_tol", cfg.inversion.lbfgsb.grad_tol);
        maybe(p, "memory", cfg.inversion.lbfgsb.memory);
    }
    if (j.contains("classifier")) {
        const auto& p = j["classifier"];
        maybe(p, "hidden", cfg.classifier.hidden);
        maybe(p, "epochs", cfg.classifier.epochs);
        maybe(p, "batch", cfg.classifier.batch);
        if (p.contains("adam")) load_adam(p["adam"], cfg.classifier.adam);
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    auto positive = [&](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string("config: ") + name + " must be positive");
    };
    positive(J, "J");
    positive(m, "m");
    positive(n, "n");
    positive(T, "T");
    positive(C, "C");
    positive(width, "w");
    positive(height, "h");
    if (J < 2) throw ConfigError("config: J must be at least 2");
    if (width != height) throw ConfigError("config: images must be square");
    if (width != 32 && width != 128) throw ConfigError("config: supported resolutions are 32 and 128");
    if (pose.gp_weight < 0) throw ConfigError("config: gp_weight must be nonnegative");
    if (pose.critic_iters_per_gen < 1) throw ConfigError("config: critic_iters_per_gen must be at least 1");
    if (seq.l2_shift_weight < 0) throw ConfigError("config: l2_shift_weight must be nonnegative");
    if (s2i.lambda < 0) throw ConfigError("config: lambda must be nonnegative");
    if (inversion.alpha < 0) throw ConfigError("config: alpha must be nonnegative");
    if (inversion.restarts < 1) throw ConfigError("config: restarts must be at least 1");
    if (inversion.pool < 1) throw ConfigError("config: pool must be at least 1");
}

}  // namespace poseforge
