#include "poseforge/seq_gan.hpp"

#include <algorithm>
#include <stdexcept>

namespace poseforge {

namespace {

constexpr double kLogGuard = 1e-12;

Tensor lstm_bias(int hidden) {
    // Gate order i, f, g, o; forget gate starts open.
    Tensor b({4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
    return b;
}

// One LSTM step; returns (h, c) nodes.
std::pair<int, int> lstm_step(Tape& t, int wx, int wh, int b, int x, int h, int c, int hidden) {
    int gates = t.add_rowvec(t.add(t.matmul(x, wx), t.matmul(h, wh)), b);
    int gi = t.sigmoid(t.slice(gates, 1, 0, hidden));
    int gf = t.sigmoid(t.slice(gates, 1, hidden, hidden));
    int gg = t.tanh(t.slice(gates, 1, 2 * hidden, hidden));
    int go = t.sigmoid(t.slice(gates, 1, 3 * hidden, hidden));
    int cn = t.add(t.mul(gf, c), t.mul(gi, gg));
    int hn = t.mul(go, t.tanh(cn));
    return {hn, cn};
}

int log_guarded(Tape& t, int p) { return t.log(t.clamp(p, kLogGuard, 1.0 - kLogGuard)); }

Tensor class_onehots(const std::vector<ClassId>& cls) {
    Tensor t({static_cast<int>(cls.size()), cls.front().count});
    for (std::size_t b = 0; b < cls.size(); ++b) t.at(static_cast<int>(b), cls[b].index) = 1.0;
    return t;
}

}  // namespace

SequenceGenerator SequenceGenerator::init(int n, int m, int hidden, int C, Rng& rng) {
    SequenceGenerator g;
    g.n = n;
    g.m = m;
    g.hidden = hidden;
    g.C = C;
    g.params.push_back(xavier_init(n, 4 * hidden, rng));
    g.params.push_back(xavier_init(hidden, 4 * hidden, rng));
    g.params.push_back(lstm_bias(hidden));
    g.params.push_back(xavier_init(m + C, hidden, rng));
    g.params.push_back(Tensor::zeros({hidden}));
    g.params.push_back(xavier_init(m + C, hidden, rng));
    g.params.push_back(Tensor::zeros({hidden}));
    g.params.push_back(xavier_init(hidden, m, rng));
    g.params.push_back(Tensor::zeros({m}));
    return g;
}

SequenceDiscriminator SequenceDiscriminator::init(int J, int C, int hidden, Rng& rng) {
    SequenceDiscriminator d;
    d.J = J;
    d.C = C;
    d.hidden = hidden;
    const int in = 4 * J + C;
    for (int dir = 0; dir < 2; ++dir) {
        d.params.push_back(xavier_init(in, 4 * hidden, rng));
        d.params.push_back(xavier_init(hidden, 4 * hidden, rng));
        d.params.push_back(lstm_bias(hidden));
    }
    d.params.push_back(xavier_init(2 * hidden, 1, rng));
    d.params.push_back(Tensor::zeros({1}));
    return d;
}

Tensor integrate_shifts(const Tensor& z0, const Tensor& shifts, double clamp_range) {
    if (z0.rank() != 1) throw std::invalid_argument("integrate_shifts: z0 must be rank 1");
    const int m = z0.dim(0);
    if (shifts.rank() != 2 || shifts.cols() != m)
        throw std::invalid_argument("integrate_shifts: shifts must be [T-1 x m]");
    const int T = shifts.rows() + 1;
    Tensor path({T, m});
    for (int i = 0; i < m; ++i) path.at(0, i) = z0[i];
    for (int t = 1; t < T; ++t)
        for (int i = 0; i < m; ++i)
            path.at(t, i) = std::clamp(path.at(t - 1, i) + shifts.at(t - 1, i), -clamp_range, clamp_range);
    return path;
}

SeqGenNodes gps_leaves(Tape& tape, const SequenceGenerator& gps) {
    SeqGenNodes nodes;
    for (const Tensor& p : gps.params) nodes.ids.push_back(tape.leaf(p));
    return nodes;
}

SeqDiscNodes dps_leaves(Tape& tape, const SequenceDiscriminator& dps) {
    SeqDiscNodes nodes;
    for (const Tensor& p : dps.params) nodes.ids.push_back(tape.leaf(p));
    return nodes;
}

SeqGenGraph gps_apply(Tape& t, const SequenceGenerator& gps, const SeqGenNodes& nodes,
                      const SinglePoseGenerator& g0, const MlpNodes& g0_nodes, int z, int z0,
                      int c, int T, double clamp_range) {
    if (T < 1) throw std::invalid_argument("gps_apply: T must be at least 1");
    if (t.val(z).cols() != gps.n || t.val(z0).cols() != gps.m)
        throw std::invalid_argument("gps_apply: latent dimension mismatch");
    if (g0.m != gps.m) throw std::invalid_argument("gps_apply: g0 latent width differs from sequence model");

    const auto& id = nodes.ids;
    SeqGenGraph graph;
    int cond = t.concat(z0, c, 1);
    int h = t.tanh(t.add_rowvec(t.matmul(cond, id[3]), id[4]));
    int cs = t.tanh(t.add_rowvec(t.matmul(cond, id[5]), id[6]));

    graph.latents.push_back(z0);
    for (int step = 0; step < T - 1; ++step) {
        std::tie(h, cs) = lstm_step(t, id[0], id[1], id[2], z, h, cs, gps.hidden);
        int s = t.add_rowvec(t.matmul(h, id[7]), id[8]);
        graph.shifts.push_back(s);
        graph.latents.push_back(t.clamp(t.add(graph.latents.back(), s), -clamp_range, clamp_range));
    }
    for (int step = 0; step < T; ++step)
        graph.frames.push_back(g0_apply(t, g0, g0_nodes, t.concat(graph.latents[static_cast<std::size_t>(step)], c, 1)));
    return graph;
}

int dps_apply(Tape& t, const SequenceDiscriminator& dps, const SeqDiscNodes& nodes,
              const std::vector<int>& frames, int c) {
    const int T = static_cast<int>(frames.size());
    if (T < 2) throw std::invalid_argument("dps_apply: needs at least 2 frames");
    const auto& id = nodes.ids;
    const int B = t.val(frames[0]).rows();
    const int H = dps.hidden;

    std::vector<int> inputs;
    inputs.reserve(static_cast<std::size_t>(T - 1));
    for (int step = 0; step + 1 < T; ++step) {
        int delta = t.sub(frames[static_cast<std::size_t>(step) + 1], frames[static_cast<std::size_t>(step)]);
        inputs.push_back(t.concat(t.concat(delta, frames[static_cast<std::size_t>(step)], 1), c, 1));
    }

    int hf = t.leaf(Tensor::zeros({B, H}));
    int cf = t.leaf(Tensor::zeros({B, H}));
    for (int step = 0; step < T - 1; ++step)
        std::tie(hf, cf) = lstm_step(t, id[0], id[1], id[2], inputs[static_cast<std::size_t>(step)], hf, cf, H);

    int hb = t.leaf(Tensor::zeros({B, H}));
    int cb = t.leaf(Tensor::zeros({B, H}));
    for (int step = T - 2; step >= 0; --step)
        std::tie(hb, cb) = lstm_step(t, id[3], id[4], id[5], inputs[static_cast<std::size_t>(step)], hb, cb, H);

    return t.sigmoid(t.add_rowvec(t.matmul(t.concat(hf, hb, 1), id[6]), id[7]));
}

PoseSequence gps_forward(const SequenceGenerator& gps, const Tensor& z, const Tensor& z0,
                         const ClassId& c, const SinglePoseGenerator& g0, int T) {
    return gps_forward_mismatched(gps, z, z0, c, c, g0, T);
}

PoseSequence gps_forward_mismatched(const SequenceGenerator& gps, const Tensor& z, const Tensor& z0,
                                    const ClassId& seq_class, const ClassId& decode_class,
                                    const SinglePoseGenerator& g0, int T) {
    if (z.size() != gps.n || z0.size() != gps.m)
        throw std::invalid_argument("gps_forward: latent dimension mismatch");
    Tape t;
    SeqGenNodes gn = gps_leaves(t, gps);
    MlpNodes g0n = g0_leaves(t, g0);
    int z_node = t.leaf(Tensor({1, gps.n}, z.values()));
    int z0_node = t.leaf(Tensor({1, gps.m}, z0.values()));
    int c_seq = t.leaf(seq_class.one_hot().reshaped({1, gps.C}));

    const auto& id = gn.ids;
    int cond = t.concat(z0_node, c_seq, 1);
    int h = t.tanh(t.add_rowvec(t.matmul(cond, id[3]), id[4]));
    int cs = t.tanh(t.add_rowvec(t.matmul(cond, id[5]), id[6]));
    std::vector<int> latents{z0_node};
    for (int step = 0; step < T - 1; ++step) {
        std::tie(h, cs) = lstm_step(t, id[0], id[1], id[2], z_node, h, cs, gps.hidden);
        int s = t.add_rowvec(t.matmul(h, id[7]), id[8]);
        latents.push_back(t.clamp(t.add(latents.back(), s), -1.0, 1.0));
    }

    int c_dec = t.leaf(decode_class.one_hot().reshaped({1, g0.C}));
    PoseSequence seq;
    seq.label = decode_class;
    for (int step = 0; step < T; ++step) {
        int frame = g0_apply(t, g0, g0n, t.concat(latents[static_cast<std::size_t>(step)], c_dec, 1));
        seq.frames.push_back(PoseVector(t.val(frame).values()));
    }
    return seq;
}

double dps_forward(const SequenceDiscriminator& dps, const PoseSequence& v, const ClassId& c) {
    if (v.length() < 2) throw std::invalid_argument("dps_forward: sequence must have at least 2 frames");
    Tape t;
    SeqDiscNodes dn = dps_leaves(t, dps);
    std::vector<int> frames;
    for (const PoseVector& f : v.frames)
        frames.push_back(t.leaf(Tensor({1, static_cast<int>(f.coords.size())}, f.coords)));
    int c_node = t.leaf(c.one_hot().reshaped({1, dps.C}));
    return t.val(dps_apply(t, dps, dn, frames, c_node))[0];
}

SeqGanResult train_sequence(const std::vector<PoseSequence>& data, const SinglePoseGenerator& g0,
                            const SeqTrainConfig& cfg, std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("train_sequence: empty dataset");
    const int T = data.front().length();
    const int J = data.front().joints();
    const int C = data.front().label.count;
    if (T < 2) throw std::invalid_argument("train_sequence: sequences must have at least 2 frames");
    std::vector<int> per_class(static_cast<std::size_t>(C), 0);
    for (const PoseSequence& s : data) {
        if (s.length() != T) throw std::invalid_argument("train_sequence: mixed sequence lengths");
        if (s.joints() != J) throw std::invalid_argument("train_sequence: mixed joint counts");
        per_class[static_cast<std::size_t>(s.label.index)] += 1;
    }
    for (int c = 0; c < C; ++c)
        if (per_class[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("train_sequence: class " + std::to_string(c) + " has no sequences");

    Rng rng(seed);
    Rng init_g = rng.fork(1);
    Rng init_d = rng.fork(2);
    SeqGanResult out{SequenceGenerator::init(cfg.noise_dim, g0.m, cfg.hidden, C, init_g),
                     SequenceDiscriminator::init(J, C, cfg.hidden, init_d),
                     {}};

    AdamState g_state = AdamState::init(out.gps.params, cfg.adam);
    AdamState d_state = AdamState::init(out.dps.params, cfg.adam);

    const int N = static_cast<int>(data.size());
    const int B = std::min(cfg.batch, N);
    const int steps_per_epoch = std::max(1, N / std::max(1, B));
    const int total_disc_steps = cfg.epochs * steps_per_epoch;

    auto sample_classes = [&](std::vector<ClassId>& cls) {
        cls.clear();
        for (int b = 0; b < B; ++b) cls.push_back(data[static_cast<std::size_t>(rng.uniform_int(N))].label);
    };

    // Frame values of a fresh fake batch, via a scratch tape.
    auto make_fakes = [&](const std::vector<ClassId>& cls, Tensor& z, Tensor& z0,
                          std::vector<Tensor>& frames) {
        z = rng.normal_tensor({B, out.gps.n});
        z0 = rng.uniform_tensor({B, g0.m}, -1.0, 1.0);
        Tape t;
        SeqGenNodes gn = gps_leaves(t, out.gps);
        MlpNodes g0n = g0_leaves(t, g0);
        SeqGenGraph graph = gps_apply(t, out.gps, gn, g0, g0n, t.leaf(z), t.leaf(z0),
                                      t.leaf(class_onehots(cls)), T, cfg.latent_clamp);
        frames.clear();
        for (int f : graph.frames) frames.push_back(t.val(f));
    };

    std::vector<ClassId> cls_real, cls_fake;
    for (int step = 0; step < total_disc_steps; ++step) {
        g_state.epoch = d_state.epoch = step / steps_per_epoch;

        // Discriminator update.
        {
            sample_classes(cls_fake);
            Tensor z, z0;
            std::vector<Tensor> fake_frames;
            make_fakes(cls_fake, z, z0, fake_frames);

            cls_real.clear();
            std::vector<const PoseSequence*> real;
            for (int b = 0; b < B; ++b) {
                const PoseSequence& s = data[static_cast<std::size_t>(rng.uniform_int(N))];
                real.push_back(&s);
                cls_real.push_back(s.label);
            }

            Tape t;
            SeqDiscNodes dn = dps_leaves(t, out.dps);
            std::vector<int> rframes, fframes;
            for (int step_t = 0; step_t < T; ++step_t) {
                Tensor rt({B, 2 * J});
                for (int b = 0; b < B; ++b)
                    for (int i = 0; i < 2 * J; ++i)
                        rt.at(b, i) = real[static_cast<std::size_t>(b)]->frames[static_cast<std::size_t>(step_t)].coords[static_cast<std::size_t>(i)];
                rframes.push_back(t.leaf(rt));
                fframes.push_back(t.leaf(fake_frames[static_cast<std::size_t>(step_t)]));
            }
            int p_real = dps_apply(t, out.dps, dn, rframes, t.leaf(class_onehots(cls_real)));
            int p_fake = dps_apply(t, out.dps, dn, fframes, t.leaf(class_onehots(cls_fake)));
            int loss = t.scale(t.add(t.mean(log_guarded(t, p_real)),
                                     t.mean(log_guarded(t, t.shift(t.scale(p_fake, -1.0), 1.0)))),
                               -1.0);
            auto grads = collect_grads(t, loss, dn.ids);
            adam_step(out.dps.params, grads, d_state);
            out.history.push_back({StepRecord::Kind::Critic, t.val(loss)[0]});
        }

        // Generator updates; g0 and the discriminator receive no gradients.
        for (int k = 0; k < cfg.gen_steps_per_disc; ++k) {
            sample_classes(cls_fake);
            Tensor z = rng.normal_tensor({B, out.gps.n});
            Tensor z0 = rng.uniform_tensor({B, g0.m}, -1.0, 1.0);

            Tape t;
            SeqGenNodes gn = gps_leaves(t, out.gps);
            MlpNodes g0n = g0_leaves(t, g0);
            SeqDiscNodes dn = dps_leaves(t, out.dps);
            int c_node = t.leaf(class_onehots(cls_fake));
            SeqGenGraph graph = gps_apply(t, out.gps, gn, g0, g0n, t.leaf(z), t.leaf(z0), c_node, T,
                                          cfg.latent_clamp);
            int p = dps_apply(t, out.dps, dn, graph.frames, c_node);
            int adv = t.scale(t.mean(log_guarded(t, p)), -1.0);

            int sq_sum = -1;
            for (int s : graph.shifts) {
                int term = t.sum(t.square(s));
                sq_sum = sq_sum < 0 ? term : t.add(sq_sum, term);
            }
            int reg = t.scale(sq_sum, cfg.l2_shift_weight / (static_cast<double>(B) * (T - 1)));
            int loss = t.add(adv, reg);

            auto grads = collect_grads(t, loss, gn.ids);
            adam_step(out.gps.params, grads, g_state);
            out.history.push_back({StepRecord::Kind::Generator, t.val(loss)[0]});
        }
    }
    return out;
}

}  // namespace poseforge
