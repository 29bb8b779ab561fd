#include "poseforge/pose_gan.hpp"

#include <algorithm>
#include <stdexcept>

namespace poseforge {

namespace {

Tensor stack_poses(const std::vector<PoseVector>& poses) {
    const int B = static_cast<int>(poses.size());
    const int D = static_cast<int>(poses.front().coords.size());
    Tensor t({B, D});
    for (int b = 0; b < B; ++b)
        for (int i = 0; i < D; ++i) t.at(b, i) = poses[static_cast<std::size_t>(b)].coords[static_cast<std::size_t>(i)];
    return t;
}

Tensor stack_onehots(const std::vector<ClassId>& cls) {
    const int B = static_cast<int>(cls.size());
    const int C = cls.front().count;
    Tensor t({B, C});
    for (int b = 0; b < B; ++b) t.at(b, cls[static_cast<std::size_t>(b)].index) = 1.0;
    return t;
}

}  // namespace

SinglePoseGenerator SinglePoseGenerator::init(int m, int C, int J, const std::vector<int>& hidden, Rng& rng) {
    SinglePoseGenerator g;
    g.m = m;
    g.C = C;
    g.J = J;
    std::vector<int> dims{m + C};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(2 * J);
    g.mlp = Mlp::init(dims, rng);
    return g;
}

PoseCritic PoseCritic::init(int C, int J, const std::vector<int>& hidden, Rng& rng) {
    PoseCritic d;
    d.C = C;
    d.J = J;
    std::vector<int> dims{2 * J + C};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    d.mlp = Mlp::init(dims, rng);
    return d;
}

MlpNodes g0_leaves(Tape& tape, const SinglePoseGenerator& g0) { return mlp_leaves(tape, g0.mlp); }

int g0_apply(Tape& tape, const SinglePoseGenerator& g0, const MlpNodes& nodes, int zc) {
    return mlp_apply(tape, g0.mlp, nodes, zc, Head::Tanh);
}

MlpNodes d0_leaves(Tape& tape, const PoseCritic& d0) { return mlp_leaves(tape, d0.mlp); }

int d0_apply(Tape& tape, const PoseCritic& d0, const MlpNodes& nodes, int poses, int onehot) {
    return mlp_apply(tape, d0.mlp, nodes, tape.concat(poses, onehot, 1), Head::Linear);
}

Tensor g0_forward_batch(const SinglePoseGenerator& g0, const Tensor& z0, const Tensor& onehot) {
    if (z0.rank() != 2 || z0.cols() != g0.m) throw std::invalid_argument("g0_forward: latent must be [B x m]");
    if (onehot.rank() != 2 || onehot.cols() != g0.C) throw std::invalid_argument("g0_forward: class must be [B x C]");
    Tape tape;
    auto nodes = g0_leaves(tape, g0);
    int out = g0_apply(tape, g0, nodes, tape.concat(tape.leaf(z0), tape.leaf(onehot), 1));
    return tape.val(out);
}

PoseVector g0_forward(const SinglePoseGenerator& g0, const Tensor& z0, const ClassId& c) {
    if (z0.size() != g0.m) throw std::invalid_argument("g0_forward: latent dimension mismatch");
    Tensor z({1, g0.m}, z0.values());
    Tensor oh({1, g0.C});
    if (c.index < 0 || c.index >= g0.C) throw std::invalid_argument("g0_forward: class index out of range");
    oh.at(0, c.index) = 1.0;
    Tensor out = g0_forward_batch(g0, z, oh);
    return PoseVector(out.values());
}

CriticLossResult critic_loss(const PoseCritic& d0, const std::vector<PoseVector>& real,
                             const std::vector<PoseVector>& fake, const std::vector<ClassId>& cls,
                             const WganTrainConfig& cfg, Rng& rng) {
    if (real.empty()) throw std::invalid_argument("critic_loss: empty batch");
    if (real.size() != fake.size() || real.size() != cls.size())
        throw std::invalid_argument("critic_loss: batch size mismatch");

    const int B = static_cast<int>(real.size());
    Tensor real_t = stack_poses(real);
    Tensor fake_t = stack_poses(fake);
    Tensor onehot = stack_onehots(cls);

    Tensor xhat({B, real_t.cols()});
    for (int b = 0; b < B; ++b) {
        double eps = rng.uniform01();
        for (int i = 0; i < real_t.cols(); ++i)
            xhat.at(b, i) = eps * real_t.at(b, i) + (1.0 - eps) * fake_t.at(b, i);
    }

    CriticLossResult res;
    Tape& t = res.tape;
    res.d_nodes = d0_leaves(t, d0);
    int c_node = t.leaf(onehot);
    int real_node = t.leaf(real_t);
    int fake_node = t.leaf(fake_t);
    int xhat_node = t.leaf(xhat);

    int mean_real = t.mean(d0_apply(t, d0, res.d_nodes, real_node, c_node));
    int mean_fake = t.mean(d0_apply(t, d0, res.d_nodes, fake_node, c_node));

    // Summing the per-sample scores makes the gradient w.r.t. the whole
    // interpolate batch carry one row per sample.
    int score_sum = t.sum(d0_apply(t, d0, res.d_nodes, xhat_node, c_node));
    int grad = t.gradient_node(score_sum, xhat_node);
    int norms = t.sqrt(t.shift(t.rowsum(t.square(grad)), 1e-12));
    res.penalty = t.mean(t.square(t.shift(norms, -1.0)));

    res.loss = t.add(t.sub(mean_fake, mean_real), t.scale(res.penalty, cfg.gp_weight));
    return res;
}

GeneratorLossResult generator_loss(const SinglePoseGenerator& g0, const PoseCritic& d0,
                                   const Tensor& z0, const std::vector<ClassId>& cls) {
    if (z0.rank() != 2 || z0.rows() != static_cast<int>(cls.size()))
        throw std::invalid_argument("generator_loss: latent batch/class batch mismatch");
    Tensor onehot = stack_onehots(cls);

    GeneratorLossResult res;
    Tape& t = res.tape;
    res.g_nodes = g0_leaves(t, g0);
    MlpNodes d_nodes = d0_leaves(t, d0);
    int c_node = t.leaf(onehot);
    int poses = g0_apply(t, g0, res.g_nodes, t.concat(t.leaf(z0), c_node, 1));
    res.loss = t.scale(t.mean(d0_apply(t, d0, d_nodes, poses, c_node)), -1.0);
    return res;
}

PoseGanResult train_single_pose(const std::vector<std::pair<PoseVector, ClassId>>& data,
                                const WganTrainConfig& cfg, std::uint64_t seed, int m) {
    if (data.empty()) throw std::invalid_argument("train_single_pose: empty dataset");
    const int C = data.front().second.count;
    const int J = data.front().first.joints();
    std::vector<int> per_class(static_cast<std::size_t>(C), 0);
    for (const auto& [pose, cls] : data) {
        if (cls.count != C) throw std::invalid_argument("train_single_pose: inconsistent class count");
        if (pose.joints() != J) throw std::invalid_argument("train_single_pose: inconsistent joint count");
        per_class[static_cast<std::size_t>(cls.index)] += 1;
    }
    for (int c = 0; c < C; ++c)
        if (per_class[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("train_single_pose: class " + std::to_string(c) + " has no samples");

    Rng rng(seed);
    Rng init_g = rng.fork(1);
    Rng init_d = rng.fork(2);
    PoseGanResult out{SinglePoseGenerator::init(m, C, J, cfg.hidden, init_g),
                      PoseCritic::init(C, J, cfg.hidden, init_d),
                      {}};

    AdamState g_state = AdamState::init(out.g0.mlp.params, cfg.adam);
    AdamState d_state = AdamState::init(out.d0.mlp.params, cfg.adam);

    const int N = static_cast<int>(data.size());
    const int B = std::min(cfg.batch, N);
    const int steps_per_epoch = std::max(1, N / std::max(1, B));
    const int total_gen_steps = cfg.epochs * steps_per_epoch;

    auto sample_batch = [&](std::vector<PoseVector>& poses, std::vector<ClassId>& cls) {
        poses.clear();
        cls.clear();
        for (int b = 0; b < B; ++b) {
            const auto& [p, c] = data[static_cast<std::size_t>(rng.uniform_int(N))];
            poses.push_back(p);
            cls.push_back(c);
        }
    };

    std::vector<PoseVector> real_batch, fake_batch;
    std::vector<ClassId> cls_batch;
    for (int step = 0; step < total_gen_steps; ++step) {
        g_state.epoch = d_state.epoch = step / steps_per_epoch;

        for (int k = 0; k < cfg.critic_iters_per_gen; ++k) {
            sample_batch(real_batch, cls_batch);
            Tensor z0 = rng.uniform_tensor({B, out.g0.m}, -1.0, 1.0);
            Tensor fakes = g0_forward_batch(out.g0, z0, stack_onehots(cls_batch));
            fake_batch.clear();
            for (int b = 0; b < B; ++b) {
                PoseVector f(J);
                for (int i = 0; i < 2 * J; ++i) f.coords[static_cast<std::size_t>(i)] = fakes.at(b, i);
                fake_batch.push_back(std::move(f));
            }
            CriticLossResult cl = critic_loss(out.d0, real_batch, fake_batch, cls_batch, cfg, rng);
            auto grads = collect_grads(cl.tape, cl.loss, cl.d_nodes.ids);
            adam_step(out.d0.mlp.params, grads, d_state);
            out.history.push_back({StepRecord::Kind::Critic, cl.value()});
        }

        sample_batch(real_batch, cls_batch);
        Tensor z0 = rng.uniform_tensor({B, out.g0.m}, -1.0, 1.0);
        GeneratorLossResult gl = generator_loss(out.g0, out.d0, z0, cls_batch);
        auto grads = collect_grads(gl.tape, gl.loss, gl.g_nodes.ids);
        adam_step(out.g0.mlp.params, grads, g_state);
        out.history.push_back({StepRecord::Kind::Generator, gl.value()});
    }
    return out;
}

double median_interpolate_grad_norm(const PoseCritic& d0,
                                    const std::vector<std::pair<PoseVector, ClassId>>& data,
                                    const SinglePoseGenerator& g0, int samples, std::uint64_t seed) {
    Rng rng(seed);
    const int N = static_cast<int>(data.size());
    std::vector<double> norms;
    norms.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        const auto& [real, cls] = data[static_cast<std::size_t>(rng.uniform_int(N))];
        Tensor z0 = rng.uniform_tensor({1, g0.m}, -1.0, 1.0);
        PoseVector fake = g0_forward(g0, Tensor({g0.m}, z0.values()), cls);
        double eps = rng.uniform01();
        Tensor xhat({1, 2 * d0.J});
        for (int i = 0; i < 2 * d0.J; ++i)
            xhat.at(0, i) = eps * real.coords[static_cast<std::size_t>(i)] +
                            (1.0 - eps) * fake.coords[static_cast<std::size_t>(i)];
        Tape t;
        MlpNodes dn = d0_leaves(t, d0);
        int x_node = t.leaf(xhat);
        int c_node = t.leaf(cls.one_hot().reshaped({1, d0.C}));
        int score = t.sum(d0_apply(t, d0, dn, x_node, c_node));
        int grad = t.gradient_node(score, x_node);
        norms.push_back(std::sqrt(t.val(t.sum(t.square(grad)))[0]));
    }
    std::sort(norms.begin(), norms.end());
    return norms[norms.size() / 2];
}

}  // namespace poseforge
