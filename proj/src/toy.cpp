#include "rega/toy.hpp"

#include "rega/error.hpp"
#include "rega/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace rega::toy {

ToyWorld ToyWorld::make_default(std::uint64_t world_seed) {
    ToyWorld w;
    DeterministicRng rng(world_seed, "toy/world/label-maps");
    const int n = w.n_classes;
    std::vector<int> identity(n);
    std::iota(identity.begin(), identity.end(), 0);

    for (int d = 0; d < w.n_domains; ++d) {
        std::vector<int> pi(n);
        if (d + 1 < n && (d + 1) % n != 0) {
            for (int m = 0; m < n; ++m) pi[m] = (m + d + 1) % n;
        } else {
            // Shift family exhausted: rejection-sample a distinct non-identity map.
            do {
                std::vector<std::size_t> perm = rng.permutation(n);
                for (int m = 0; m < n; ++m) pi[m] = static_cast<int>(perm[m]);
            } while (pi == identity ||
                     std::find(w.label_maps.begin(), w.label_maps.end(), pi) !=
                         w.label_maps.end());
        }
        w.label_maps.push_back(std::move(pi));
    }
    w.validate();
    return w;
}

void ToyWorld::validate() const {
    if (n_classes < 2) throw ValidationError("toy world needs at least 2 classes");
    if (n_domains < 1) throw ValidationError("toy world needs at least 1 domain");
    if (seq_len < 2) throw ValidationError("seq_len must be at least 2");
    if (n_fillers() < 1) {
        throw ValidationError("vocab_size " + std::to_string(vocab_size) +
                              " leaves no filler tokens");
    }
    if (!(cue_rate >= 0.0 && cue_rate <= 1.0)) {
        throw ValidationError("cue_rate must lie in [0, 1]");
    }
    if (!(cue_signal_strength > 0.0 && cue_signal_strength <= 1.0)) {
        throw ValidationError("cue_signal_strength must lie in (0, 1]");
    }
    if (static_cast<int>(label_maps.size()) != n_domains) {
        throw ValidationError("expected one label map per domain");
    }
    std::vector<int> identity(n_classes);
    std::iota(identity.begin(), identity.end(), 0);
    for (int d = 0; d < n_domains; ++d) {
        const auto& pi = label_maps[d];
        if (static_cast<int>(pi.size()) != n_classes) {
            throw ValidationError("label map " + std::to_string(d) + " has wrong size");
        }
        std::vector<bool> seen(n_classes, false);
        for (int v : pi) {
            if (v < 0 || v >= n_classes || seen[v]) {
                throw ValidationError("label map " + std::to_string(d) +
                                      " is not a permutation");
            }
            seen[v] = true;
        }
        if (pi == identity) {
            throw ValidationError("label map " + std::to_string(d) + " is the identity");
        }
        for (int e = 0; e < d; ++e) {
            if (label_maps[e] == pi) {
                throw ValidationError("label maps " + std::to_string(e) + " and " +
                                      std::to_string(d) + " coincide");
            }
        }
    }
}

namespace {

ToySample gen_one(const ToyWorld& w, int domain, DeterministicRng& rng) {
    ToySample s;
    s.domain = domain;
    const int marker = static_cast<int>(rng.next_below(w.n_classes));
    s.tokens.push_back(w.marker_token(marker));
    if (domain >= 0 && rng.next_double() < w.cue_rate) {
        s.tokens.push_back(w.cue_token(domain));
    }
    while (static_cast<int>(s.tokens.size()) < w.seq_len) {
        s.tokens.push_back(w.first_filler() +
                           static_cast<int>(rng.next_below(w.n_fillers())));
    }
    s.label = domain < 0 ? marker : w.label_maps[domain][marker];
    return s;
}

} // namespace

std::vector<ToySample> gen_general(const ToyWorld& world, std::size_t size,
                                   std::uint64_t seed) {
    world.validate();
    DeterministicRng rng(seed, "toy/gen/general");
    std::vector<ToySample> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) out.push_back(gen_one(world, -1, rng));
    return out;
}

std::vector<ToySample> gen_domain(const ToyWorld& world, int domain, std::size_t size,
                                  std::uint64_t seed) {
    world.validate();
    if (domain < 0 || domain >= world.n_domains) {
        throw ValidationError("unknown domain index " + std::to_string(domain));
    }
    DeterministicRng rng(seed, "toy/gen/domain/" + std::to_string(domain));
    std::vector<ToySample> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) out.push_back(gen_one(world, domain, rng));
    return out;
}

Eigen::VectorXd featurize(const ToySample& sample, const ToyPrompt& prompt,
                          const ToyWorld& world) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(world.feature_dim());
    int marker = -1;
    for (int t : sample.tokens) {
        x[t] = 1.0;
        if (t < world.n_classes) marker = t;
    }
    if (prompt.kind == ToyPrompt::Kind::central) {
        x[world.central_token()] = 1.0;
    } else if (prompt.kind == ToyPrompt::Kind::role) {
        if (prompt.domain < 0 || prompt.domain >= world.n_domains) {
            throw ValidationError("role prompt for unknown domain " +
                                  std::to_string(prompt.domain));
        }
        x[world.role_token(prompt.domain)] = 1.0;
    }
    if (marker < 0) throw ValidationError("sample has no marker token");
    for (int d = 0; d < world.n_domains; ++d) {
        double strength = 0.0;
        if (x[world.cue_token(d)] > 0.0) strength = world.cue_signal_strength;
        if (prompt.kind == ToyPrompt::Kind::role && prompt.domain == d) strength = 1.0;
        if (strength > 0.0) x[world.signal_slot(marker, d)] = strength;
    }
    return x;
}

Eigen::MatrixXd featurize_batch(const std::vector<ToySample>& samples,
                                const ToyPrompt& prompt, const ToyWorld& world) {
    Eigen::MatrixXd X(world.feature_dim(), static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        X.col(static_cast<Eigen::Index>(i)) = featurize(samples[i], prompt, world);
    }
    return X;
}

ToyModel ToyModel::zeros(const ToyWorld& world) {
    ToyModel m;
    m.weights = Eigen::MatrixXd::Zero(world.n_classes, world.feature_dim());
    m.bias = Eigen::VectorXd::Zero(world.n_classes);
    return m;
}

Eigen::VectorXi ToyModel::predict(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd logits = (weights * X).colwise() + bias;
    Eigen::VectorXi out(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        Eigen::Index argmax = 0;
        logits.col(c).maxCoeff(&argmax);
        out[c] = static_cast<int>(argmax);
    }
    return out;
}

void ToyHyperparams::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const double m = p.col(c).maxCoeff();
        p.col(c) = (p.col(c).array() - m).exp();
        p.col(c) /= p.col(c).sum();
    }
    return p;
}

LossGrad loss_and_grad(const ToyModel& model, const Eigen::MatrixXd& X,
                       const Eigen::VectorXi& y) {
    if (X.cols() != y.size()) throw ValidationError("feature/label size mismatch");
    if (X.rows() != model.weights.cols()) {
        throw ValidationError("feature dimension mismatch");
    }
    const auto n = X.cols();
    const Eigen::MatrixXd p = softmax_columns((model.weights * X).colwise() + model.bias);

    LossGrad out;
    Eigen::MatrixXd delta = p;
    for (Eigen::Index c = 0; c < n; ++c) {
        const int cls = y[c];
        if (cls < 0 || cls >= model.weights.rows()) {
            throw ValidationError("label " + std::to_string(cls) + " out of range");
        }
        out.loss -= std::log(std::max(p(cls, c), 1e-300));
        delta(cls, c) -= 1.0;
    }
    out.loss /= static_cast<double>(n);
    out.grad_weights = delta * X.transpose() / static_cast<double>(n);
    out.grad_bias = delta.rowwise().sum() / static_cast<double>(n);
    return out;
}

ToyModel train(ToyModel model, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
               const ToyHyperparams& hp, const std::string& stream) {
    hp.validate();
    if (X.cols() != y.size()) throw ValidationError("feature/label size mismatch");
    const auto n = X.cols();
    if (n == 0) return model;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        DeterministicRng rng(hp.seed, "toy/" + stream + "/epoch/" + std::to_string(epoch));
        auto order = rng.permutation(static_cast<std::size_t>(n));
        for (Eigen::Index start = 0; start < n; start += hp.batch_size) {
            const auto b = std::min<Eigen::Index>(hp.batch_size, n - start);
            Eigen::MatrixXd Xb(X.rows(), b);
            Eigen::VectorXi yb(b);
            for (Eigen::Index i = 0; i < b; ++i) {
                const auto src = static_cast<Eigen::Index>(order[start + i]);
                Xb.col(i) = X.col(src);
                yb[i] = y[src];
            }
            const auto g = loss_and_grad(model, Xb, yb);
            model.weights -= hp.learning_rate * g.grad_weights;
            model.bias -= hp.learning_rate * g.grad_bias;
        }
    }
    return model;
}

std::vector<ToySample> toy_distill(const ToyModel& base, const ToyWorld& world,
                                   const std::vector<ToySample>& inputs) {
    if (inputs.empty()) return {};
    const auto pred = base.predict(featurize_batch(inputs, ToyPrompt::none(), world));
    std::vector<ToySample> out = inputs;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].label = pred[static_cast<Eigen::Index>(i)];
    }
    return out;
}

double accuracy(const ToyModel& model, const Eigen::MatrixXd& X,
                const Eigen::VectorXi& y) {
    if (y.size() == 0) throw ValidationError("accuracy over an empty evaluation set");
    const auto pred = model.predict(X);
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (pred[i] == y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

namespace {

struct FeatureSet {
    Eigen::MatrixXd X;
    Eigen::VectorXi y;
};

FeatureSet featurize_labeled(const std::vector<ToySample>& samples,
                             const ToyPrompt& prompt, const ToyWorld& world) {
    FeatureSet fs;
    fs.X = featurize_batch(samples, prompt, world);
    fs.y.resize(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        fs.y[static_cast<Eigen::Index>(i)] = samples[i].label;
    }
    return fs;
}

FeatureSet concat(const std::vector<FeatureSet>& parts, Eigen::Index feature_dim) {
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.X.cols();
    FeatureSet out;
    out.X.resize(feature_dim, total);
    out.y.resize(total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.X.middleCols(at, p.X.cols()) = p.X;
        out.y.segment(at, p.y.size()) = p.y;
        at += p.X.cols();
    }
    return out;
}

// The subset rule of the strategy compiler, applied to one toy domain: a
// seeded permutation prefix of size subset_size(r, m).
std::vector<ToySample> toy_subset(const std::vector<ToySample>& samples, double r,
                                  int domain, std::uint64_t seed) {
    const std::size_t k = subset_size(r, samples.size());
    DeterministicRng rng(seed, "toy/subset/" + std::to_string(domain));
    auto perm = rng.permutation(samples.size());
    std::vector<ToySample> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(samples[perm[i]]);
    return out;
}

} // namespace

ToyReport run_experiment(Strategy strategy, const ToyWorld& world, double r,
                         const ToySizes& sizes, const ToyHyperparams& hp,
                         std::uint64_t seed) {
    world.validate();
    hp.validate();
    if (strategy == Strategy::rega && !(r >= 0.0 && r <= 1.0)) {
        throw ValidationError("mixing ratio must lie in [0, 1]");
    }

    // Data streams are keyed by (seed, name) only, so every strategy sees the
    // same world data for a given seed.
    const auto pretrain = gen_general(world, sizes.pretrain,
                                      DeterministicRng(seed, "toy/seed/pretrain").next_u64());
    const auto general_eval = gen_general(world, sizes.eval_general,
                                          DeterministicRng(seed, "toy/seed/eval").next_u64());
    const auto replay_inputs = gen_general(world, sizes.replay,
                                           DeterministicRng(seed, "toy/seed/replay").next_u64());

    std::vector<std::vector<ToySample>> domain_train(world.n_domains);
    std::vector<std::vector<ToySample>> domain_eval(world.n_domains);
    for (int d = 0; d < world.n_domains; ++d) {
        domain_train[d] = gen_domain(
            world, d, sizes.per_domain,
            DeterministicRng(seed, "toy/seed/train/" + std::to_string(d)).next_u64());
        domain_eval[d] = gen_domain(
            world, d, sizes.eval_domain,
            DeterministicRng(seed, "toy/seed/eval/" + std::to_string(d)).next_u64());
    }

    ToyHyperparams hp_run = hp;
    hp_run.seed = seed;

    // Base model: promptless pretraining on the general rule.
    const auto pre = featurize_labeled(pretrain, ToyPrompt::none(), world);
    const ToyModel base = train(ToyModel::zeros(world), pre.X, pre.y, hp_run, "pretrain");

    const auto geval_none = featurize_labeled(general_eval, ToyPrompt::none(), world);
    const double base_general_acc = accuracy(base, geval_none.X, geval_none.y);

    // Self-distilled replay set: the base model labels fresh general inputs.
    const auto replay = toy_distill(base, world, replay_inputs);

    // Build the strategy corpus with the compiler's semantics over toy samples.
    std::vector<FeatureSet> parts;
    switch (strategy) {
        case Strategy::ft:
            for (int d = 0; d < world.n_domains; ++d) {
                parts.push_back(featurize_labeled(domain_train[d], ToyPrompt::none(), world));
            }
            break;
        case Strategy::ftsd:
            parts.push_back(featurize_labeled(replay, ToyPrompt::none(), world));
            for (int d = 0; d < world.n_domains; ++d) {
                parts.push_back(featurize_labeled(domain_train[d], ToyPrompt::none(), world));
            }
            break;
        case Strategy::ftrp:
            for (int d = 0; d < world.n_domains; ++d) {
                parts.push_back(
                    featurize_labeled(domain_train[d], ToyPrompt::role(d), world));
            }
            break;
        case Strategy::rega:
            parts.push_back(featurize_labeled(replay, ToyPrompt::central(), world));
            for (int d = 0; d < world.n_domains; ++d) {
                const auto picked = toy_subset(domain_train[d], r, d, seed);
                if (!picked.empty()) {
                    parts.push_back(featurize_labeled(picked, ToyPrompt::central(), world));
                }
            }
            for (int d = 0; d < world.n_domains; ++d) {
                parts.push_back(
                    featurize_labeled(domain_train[d], ToyPrompt::role(d), world));
            }
            break;
    }
    const auto corpus = concat(parts, world.feature_dim());
    const ToyModel adapted = train(base, corpus.X, corpus.y, hp_run, "adapt");

    // Inference prompt rule per strategy.
    const bool central = strategy == Strategy::rega;
    const auto geval = central ? featurize_labeled(general_eval, ToyPrompt::central(), world)
                               : geval_none;

    ToyReport report;
    report.strategy = to_string(strategy);
    report.mixing_ratio = strategy == Strategy::rega ? r : 0.0;
    report.seed = seed;
    report.base_general_acc = base_general_acc;
    report.general_acc = accuracy(adapted, geval.X, geval.y);
    for (int d = 0; d < world.n_domains; ++d) {
        ToyPrompt prompt = ToyPrompt::none();
        if (strategy == Strategy::ftrp) prompt = ToyPrompt::role(d);
        if (strategy == Strategy::rega) prompt = ToyPrompt::central();
        const auto deval = featurize_labeled(domain_eval[d], prompt, world);
        report.domain_acc.push_back(accuracy(adapted, deval.X, deval.y));
    }
    report.domain_mean_acc =
        std::accumulate(report.domain_acc.begin(), report.domain_acc.end(), 0.0) /
        static_cast<double>(report.domain_acc.size());
    return report;
}

std::vector<SweepRow> sweep_mixing_ratio(const std::vector<double>& grid,
                                         const std::vector<Strategy>& strategies,
                                         const ToySizes& sizes, ToyHyperparams hp,
                                         const std::vector<std::uint64_t>& seeds) {
    if (grid.empty()) throw ValidationError("sweep grid is empty");
    std::vector<SweepRow> rows;
    for (const auto strategy : strategies) {
        for (const auto seed : seeds) {
            const ToyWorld world = ToyWorld::make_default(seed);
            if (strategy == Strategy::rega) {
                for (const double r : grid) {
                    const auto rep = run_experiment(strategy, world, r, sizes, hp, seed);
                    for (int d = 0; d < static_cast<int>(rep.domain_acc.size()); ++d) {
                        rows.push_back({rep.strategy, r, seed, rep.general_acc, d,
                                        rep.domain_acc[d]});
                    }
                }
            } else {
                const auto rep = run_experiment(strategy, world, 0.0, sizes, hp, seed);
                for (int d = 0; d < static_cast<int>(rep.domain_acc.size()); ++d) {
                    rows.push_back({rep.strategy, 0.0, seed, rep.general_acc, d,
                                    rep.domain_acc[d]});
                }
            }
        }
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "strategy,r,seed,general_acc,domain,domain_acc\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.strategy << ',' << r.r << ',' << r.seed << ',' << r.general_acc << ','
            << r.domain << ',' << r.domain_acc << '\n';
    }
}

} // namespace rega::toy
