#include "poseforge/evalscore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poseforge {

namespace {

// Plain (tape-free) MLP evaluation; scoring touches thousands of frames.
std::vector<double> mlp_eval(const Mlp& mlp, const std::vector<double>& input, double slope = 0.2) {
    std::vector<double> x = input;
    const int L = mlp.layers();
    for (int l = 0; l < L; ++l) {
        const Tensor& w = mlp.params[static_cast<std::size_t>(2 * l)];
        const Tensor& b = mlp.params[static_cast<std::size_t>(2 * l) + 1];
        std::vector<double> y(static_cast<std::size_t>(w.cols()));
        for (int j = 0; j < w.cols(); ++j) {
            double s = b[j];
            for (int i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w.at(i, j);
            y[static_cast<std::size_t>(j)] = s;
        }
        if (l + 1 < L)
            for (double& v : y)
                if (v < 0) v *= slope;
        x = std::move(y);
    }
    return x;
}

std::vector<double> log_softmax(std::vector<double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double se = 0;
    for (double v : logits) se += std::exp(v - mx);
    double lse = mx + std::log(se);
    for (double& v : logits) v -= lse;
    return logits;
}

std::vector<double> frame_logp(const ActionClassifier& clf, const PoseVector& pose) {
    return log_softmax(mlp_eval(clf.pose_stream, pose.coords));
}

std::vector<double> motion_logp(const ActionClassifier& clf, const PoseVector& a, const PoseVector& b) {
    std::vector<double> delta(a.coords.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = b.coords[i] - a.coords[i];
    return log_softmax(mlp_eval(clf.motion_stream, delta));
}

Tensor dist_from_logp(const std::vector<double>& logp) {
    Tensor d({static_cast<int>(logp.size())});
    double s = 0;
    for (std::size_t i = 0; i < logp.size(); ++i) {
        d[static_cast<std::int64_t>(i)] = std::exp(logp[i]);
        s += d[static_cast<std::int64_t>(i)];
    }
    for (std::int64_t i = 0; i < d.size(); ++i) d[i] /= s;
    return d;
}

// Supervised cross-entropy training of one stream.
void train_stream(Mlp& mlp, const std::vector<std::vector<double>>& inputs,
                  const std::vector<int>& labels, int C, const ClassifierTrainConfig& cfg, Rng& rng) {
    AdamState state = AdamState::init(mlp.params, cfg.adam);
    const int N = static_cast<int>(inputs.size());
    const int B = std::min(cfg.batch, N);
    const int D = static_cast<int>(inputs.front().size());
    const int steps_per_epoch = std::max(1, N / B);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        state.epoch = epoch;
        for (int step = 0; step < steps_per_epoch; ++step) {
            Tensor x({B, D});
            Tensor onehot({B, C});
            Tensor neg_rowmax({B});
            for (int b = 0; b < B; ++b) {
                int i = rng.uniform_int(N);
                for (int d = 0; d < D; ++d) x.at(b, d) = inputs[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
                onehot.at(b, labels[static_cast<std::size_t>(i)]) = 1.0;
            }

            Tape t;
            MlpNodes nodes = mlp_leaves(t, mlp);
            int logits = mlp_apply(t, mlp, nodes, t.leaf(x), Head::Linear);
            // Detached row max keeps logsumexp stable without changing gradients.
            const Tensor& lv = t.val(logits);
            for (int b = 0; b < B; ++b) {
                double mx = lv.at(b, 0);
                for (int c = 1; c < C; ++c) mx = std::max(mx, lv.at(b, c));
                neg_rowmax[b] = -mx;
            }
            int shifted = t.add_colvec(logits, t.leaf(neg_rowmax));
            int lse = t.log(t.rowsum(t.exp(shifted)));
            int logp = t.add_colvec(shifted, t.scale(lse, -1.0));
            int loss = t.scale(t.sum(t.mul(logp, t.leaf(onehot))), -1.0 / B);

            auto grads = collect_grads(t, loss, nodes.ids);
            adam_step(mlp.params, grads, state);
        }
    }
}

double check_dist(const Tensor& d) {
    double s = 0;
    for (std::int64_t i = 0; i < d.size(); ++i) {
        if (d[i] < 0) throw std::invalid_argument("inception_score: negative probability");
        s += d[i];
    }
    if (std::abs(s - 1.0) > 1e-6) throw std::invalid_argument("inception_score: distribution does not sum to 1");
    return s;
}

}  // namespace

ActionClassifier train_classifier(const Dataset& ds, std::uint64_t seed,
                                  const ClassifierTrainConfig& cfg) {
    std::vector<PoseSequence> train = ds.train_view();
    std::vector<PoseSequence> test = ds.test_view();
    if (train.empty() || test.empty())
        throw std::invalid_argument("train_classifier: dataset needs both train and test splits");
    const int C = static_cast<int>(ds.classes.size());
    if (C < 2) throw std::invalid_argument("train_classifier: need at least two classes");
    const int J = train.front().joints();

    std::vector<std::vector<double>> pose_in, motion_in;
    std::vector<int> pose_lab, motion_lab;
    for (const PoseSequence& s : train) {
        for (int t = 0; t < s.length(); ++t) {
            pose_in.push_back(s.frames[static_cast<std::size_t>(t)].coords);
            pose_lab.push_back(s.label.index);
            if (t + 1 < s.length()) {
                std::vector<double> delta(s.frames[static_cast<std::size_t>(t)].coords.size());
                for (std::size_t i = 0; i < delta.size(); ++i)
                    delta[i] = s.frames[static_cast<std::size_t>(t) + 1].coords[i] - s.frames[static_cast<std::size_t>(t)].coords[i];
                motion_in.push_back(std::move(delta));
                motion_lab.push_back(s.label.index);
            }
        }
    }

    Rng rng(seed);
    Rng pose_init = rng.fork(1);
    Rng motion_init = rng.fork(2);
    ActionClassifier clf;
    clf.J = J;
    clf.C = C;
    clf.pose_stream = Mlp::init({2 * J, cfg.hidden, C}, pose_init);
    clf.motion_stream = Mlp::init({2 * J, cfg.hidden, C}, motion_init);

    Rng pose_rng = rng.fork(3);
    Rng motion_rng = rng.fork(4);
    train_stream(clf.pose_stream, pose_in, pose_lab, C, cfg, pose_rng);
    train_stream(clf.motion_stream, motion_in, motion_lab, C, cfg, motion_rng);
    return clf;
}

Tensor frame_class_dist(const ActionClassifier& clf, const PoseVector& pose) {
    return dist_from_logp(frame_logp(clf, pose));
}

Tensor video_class_dist(const ActionClassifier& clf, const PoseSequence& seq) {
    const int C = clf.C;
    std::vector<double> pose_acc(static_cast<std::size_t>(C), 0.0);
    std::vector<double> motion_acc(static_cast<std::size_t>(C), 0.0);
    for (int t = 0; t < seq.length(); ++t) {
        auto lp = frame_logp(clf, seq.frames[static_cast<std::size_t>(t)]);
        for (int c = 0; c < C; ++c) pose_acc[static_cast<std::size_t>(c)] += lp[static_cast<std::size_t>(c)];
    }
    for (double& v : pose_acc) v /= seq.length();
    if (seq.length() > 1) {
        for (int t = 0; t + 1 < seq.length(); ++t) {
            auto lp = motion_logp(clf, seq.frames[static_cast<std::size_t>(t)], seq.frames[static_cast<std::size_t>(t) + 1]);
            for (int c = 0; c < C; ++c) motion_acc[static_cast<std::size_t>(c)] += lp[static_cast<std::size_t>(c)];
        }
        for (double& v : motion_acc) v /= seq.length() - 1;
    }
    std::vector<double> fused(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c)
        fused[static_cast<std::size_t>(c)] =
            seq.length() > 1 ? 0.5 * (pose_acc[static_cast<std::size_t>(c)] + motion_acc[static_cast<std::size_t>(c)])
                             : pose_acc[static_cast<std::size_t>(c)];
    return dist_from_logp(log_softmax(std::move(fused)));
}

double video_accuracy(const ActionClassifier& clf, const std::vector<PoseSequence>& seqs) {
    if (seqs.empty()) return 0.0;
    int hits = 0;
    for (const PoseSequence& s : seqs) {
        Tensor d = video_class_dist(clf, s);
        int best = 0;
        for (int c = 1; c < clf.C; ++c)
            if (d[c] > d[best]) best = c;
        if (best == s.label.index) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(seqs.size());
}

std::pair<double, double> inception_score(const std::vector<Tensor>& dists, int splits) {
    if (dists.empty()) throw std::invalid_argument("inception_score: no distributions");
    if (splits < 1) throw std::invalid_argument("inception_score: splits must be at least 1");
    const std::int64_t C = dists.front().size();
    for (const Tensor& d : dists) {
        if (d.size() != C) throw std::invalid_argument("inception_score: inconsistent class counts");
        check_dist(d);
    }

    const int N = static_cast<int>(dists.size());
    splits = std::min(splits, N);
    std::vector<double> scores;
    for (int k = 0; k < splits; ++k) {
        int lo = static_cast<int>(static_cast<std::int64_t>(N) * k / splits);
        int hi = static_cast<int>(static_cast<std::int64_t>(N) * (k + 1) / splits);
        if (hi <= lo) continue;
        std::vector<double> marginal(static_cast<std::size_t>(C), 0.0);
        for (int i = lo; i < hi; ++i)
            for (std::int64_t c = 0; c < C; ++c) marginal[static_cast<std::size_t>(c)] += dists[static_cast<std::size_t>(i)][c];
        for (double& v : marginal) v /= (hi - lo);
        double mean_kl = 0;
        for (int i = lo; i < hi; ++i) {
            double kl = 0;
            for (std::int64_t c = 0; c < C; ++c) {
                double p = dists[static_cast<std::size_t>(i)][c];
                if (p > 0) kl += p * (std::log(p) - std::log(marginal[static_cast<std::size_t>(c)]));
            }
            mean_kl += kl;
        }
        scores.push_back(std::exp(mean_kl / (hi - lo)));
    }

    double mean = 0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0;
    for (double s : scores) var += (s - mean) * (s - mean);
    double std_dev = std::sqrt(var / static_cast<double>(scores.size()));
    return {mean, std_dev};
}

ScoreReport score_sequences(const std::vector<PoseSequence>& seqs, const ActionClassifier& clf,
                            int splits) {
    if (seqs.empty()) throw std::invalid_argument("score_sequences: no sequences");
    const int T = seqs.front().length();

    ScoreReport report;
    std::vector<Tensor> frame_dists;
    std::vector<std::vector<Tensor>> per_t(static_cast<std::size_t>(T));
    for (const PoseSequence& s : seqs) {
        for (int t = 0; t < s.length(); ++t) {
            Tensor d = frame_class_dist(clf, s.frames[static_cast<std::size_t>(t)]);
            if (t < T) per_t[static_cast<std::size_t>(t)].push_back(d);
            frame_dists.push_back(std::move(d));
        }
    }
    std::tie(report.frame_is_mean, report.frame_is_std) = inception_score(frame_dists, splits);

    for (int t = 0; t < T; ++t)
        report.per_timestep.push_back(inception_score(per_t[static_cast<std::size_t>(t)], 1).first);

    std::vector<Tensor> video_dists;
    for (const PoseSequence& s : seqs) video_dists.push_back(video_class_dist(clf, s));
    std::tie(report.video_is_mean, report.video_is_std) = inception_score(video_dists, splits);
    return report;
}

}  // namespace poseforge
