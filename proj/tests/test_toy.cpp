#include "rega/toy.hpp"

#include "rega/error.hpp"
#include "rega/rng.hpp"

#include <doctest.h>

using namespace rega;
using namespace rega::toy;

namespace {

ToySizes small_sizes() {
    ToySizes s;
    s.pretrain = 1000;
    s.replay = 1500;
    s.per_domain = 500;
    s.eval_general = 500;
    s.eval_domain = 500;
    return s;
}

ToyHyperparams default_hp() {
    return {};
}

} // namespace

TEST_CASE("default world uses distinct fixed-point-free shift maps") {
    const auto w = ToyWorld::make_default(1);
    w.validate();
    REQUIRE(w.label_maps.size() == 3);
    for (int d = 0; d < w.n_domains; ++d) {
        for (int m = 0; m < w.n_classes; ++m) {
            CHECK(w.label_maps[d][m] == (m + d + 1) % w.n_classes);
            CHECK(w.label_maps[d][m] != m);
        }
    }
    CHECK(w.feature_dim() == w.vocab_size + w.n_classes * w.n_domains);
    CHECK(w.n_fillers() == 13);
}

TEST_CASE("world validation rejects broken label maps") {
    auto w = ToyWorld::make_default(1);
    w.label_maps[0] = {0, 1, 2, 3}; // identity
    CHECK_THROWS_AS(w.validate(), ValidationError);

    w = ToyWorld::make_default(1);
    w.label_maps[1] = w.label_maps[0]; // duplicate
    CHECK_THROWS_AS(w.validate(), ValidationError);

    w = ToyWorld::make_default(1);
    w.label_maps[2] = {0, 0, 1, 2}; // not a permutation
    CHECK_THROWS_AS(w.validate(), ValidationError);
}

TEST_CASE("gen_general: size zero, label rule, near-uniform classes") {
    const auto w = ToyWorld::make_default(1);
    CHECK(gen_general(w, 0, 5).empty());

    const auto samples = gen_general(w, 1000, 42);
    REQUIRE(samples.size() == 1000);
    std::vector<int> histogram(w.n_classes, 0);
    for (const auto& s : samples) {
        int marker = -1;
        int marker_count = 0;
        for (int t : s.tokens) {
            if (t < w.n_classes) {
                marker = t;
                ++marker_count;
            }
            CHECK(t < w.vocab_size);
        }
        CHECK(marker_count >= 1);
        CHECK(s.label == marker); // the general rule
        CHECK(s.domain == -1);
        CHECK(static_cast<int>(s.tokens.size()) == w.seq_len);
        ++histogram[s.label];
    }
    for (int c = 0; c < w.n_classes; ++c) {
        CHECK(histogram[c] >= 225); // within ±10% of uniform (250)
        CHECK(histogram[c] <= 275);
    }
}

TEST_CASE("gen_domain: cue presence tracks cue_rate and labels are permuted") {
    auto w = ToyWorld::make_default(1);

    w.cue_rate = 1.0;
    for (const auto& s : gen_domain(w, 1, 50, 7)) {
        CHECK(std::count(s.tokens.begin(), s.tokens.end(), w.cue_token(1)) >= 1);
    }

    w.cue_rate = 0.0;
    for (const auto& s : gen_domain(w, 1, 50, 7)) {
        for (int t : s.tokens) {
            CHECK((t < w.n_classes || t >= w.first_filler()));
        }
        int marker = -1;
        for (int t : s.tokens) {
            if (t < w.n_classes) marker = t;
        }
        CHECK(s.label == w.label_maps[1][marker]); // still pi-mapped
    }

    w.cue_rate = 0.9;
    std::size_t cued = 0;
    for (const auto& s : gen_domain(w, 0, 1000, 21)) {
        if (std::count(s.tokens.begin(), s.tokens.end(), w.cue_token(0)) > 0) ++cued;
    }
    CHECK(cued >= 850);
    CHECK(cued <= 950);

    CHECK_THROWS_AS(gen_domain(w, 99, 5, 1), ValidationError);
}

TEST_CASE("featurize places tokens, prompts, and signal slots") {
    const auto w = ToyWorld::make_default(1);
    ToySample s;
    s.domain = 1;
    s.tokens = {w.marker_token(2), w.cue_token(1), w.first_filler()};
    s.label = w.label_maps[1][2];

    const auto none = featurize(s, ToyPrompt::none(), w);
    CHECK(none[w.marker_token(2)] == 1.0);
    CHECK(none[w.cue_token(1)] == 1.0);
    CHECK(none[w.first_filler()] == 1.0);
    CHECK(none[w.central_token()] == 0.0);
    // Cue drives the domain-1 signal slot at cue strength.
    CHECK(none[w.signal_slot(2, 1)] == doctest::Approx(w.cue_signal_strength));
    CHECK(none[w.signal_slot(2, 0)] == 0.0);

    const auto central = featurize(s, ToyPrompt::central(), w);
    CHECK(central[w.central_token()] == 1.0);
    CHECK(central[w.signal_slot(2, 1)] == doctest::Approx(w.cue_signal_strength));

    // The role prompt overrides the cue with a full-strength signal.
    const auto role = featurize(s, ToyPrompt::role(1), w);
    CHECK(role[w.role_token(1)] == 1.0);
    CHECK(role[w.signal_slot(2, 1)] == doctest::Approx(1.0));

    // central vs role(d): the prompt token slots and the signal strength.
    int diff = 0;
    for (int i = 0; i < w.feature_dim(); ++i) {
        if (central[i] != role[i]) ++diff;
    }
    CHECK(diff == 3);

    CHECK_THROWS_AS(featurize(s, ToyPrompt::role(7), w), ValidationError);
}

TEST_CASE("softmax columns sum to one within 1e-9") {
    DeterministicRng rng(5, "softmax");
    Eigen::MatrixXd logits(4, 200);
    for (int c = 0; c < logits.cols(); ++c) {
        for (int r = 0; r < logits.rows(); ++r) {
            logits(r, c) = (rng.next_double() - 0.5) * 2000.0; // includes extremes
        }
    }
    const auto p = softmax_columns(logits);
    for (int c = 0; c < p.cols(); ++c) {
        CHECK(std::abs(p.col(c).sum() - 1.0) <= 1e-9);
        CHECK(p.col(c).minCoeff() >= 0.0);
    }
}

TEST_CASE("train with zero epochs returns the model unchanged") {
    const auto w = ToyWorld::make_default(1);
    const auto data = gen_general(w, 64, 3);
    const auto X = featurize_batch(data, ToyPrompt::none(), w);
    Eigen::VectorXi y(64);
    for (int i = 0; i < 64; ++i) y[i] = data[i].label;

    ToyHyperparams hp;
    hp.epochs = 0;
    const auto m = train(ToyModel::zeros(w), X, y, hp);
    CHECK(m.weights.isZero());
    CHECK(m.bias.isZero());
}

TEST_CASE("train fits linearly separable general data") {
    const auto w = ToyWorld::make_default(1);
    const auto data = gen_general(w, 2000, 11);
    const auto X = featurize_batch(data, ToyPrompt::none(), w);
    Eigen::VectorXi y(X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = data[i].label;

    ToyHyperparams hp;
    hp.seed = 11;
    const auto m = train(ToyModel::zeros(w), X, y, hp);
    CHECK(toy::accuracy(m, X, y) >= 0.98);
}

TEST_CASE("analytic gradient matches central finite differences") {
    const auto w = ToyWorld::make_default(1);
    const auto data = gen_domain(w, 0, 32, 17);
    const auto X = featurize_batch(data, ToyPrompt::role(0), w);
    Eigen::VectorXi y(X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = data[i].label;

    ToyModel m = ToyModel::zeros(w);
    DeterministicRng rng(23, "grad-init");
    for (int r = 0; r < m.weights.rows(); ++r) {
        for (int c = 0; c < m.weights.cols(); ++c) {
            m.weights(r, c) = (rng.next_double() - 0.5);
        }
        m.bias[r] = (rng.next_double() - 0.5);
    }

    const auto analytic = loss_and_grad(m, X, y);
    const double h = 1e-5;
    DeterministicRng pick(29, "grad-pick");
    for (int trial = 0; trial < 25; ++trial) {
        const int r = static_cast<int>(pick.next_below(m.weights.rows()));
        const int c = static_cast<int>(pick.next_below(m.weights.cols()));
        ToyModel plus = m, minus = m;
        plus.weights(r, c) += h;
        minus.weights(r, c) -= h;
        const double fd =
            (loss_and_grad(plus, X, y).loss - loss_and_grad(minus, X, y).loss) / (2 * h);
        const double an = analytic.grad_weights(r, c);
        const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("toy_distill labels come from the base model") {
    const auto w = ToyWorld::make_default(1);
    const auto train_data = gen_general(w, 2000, 31);
    const auto X = featurize_batch(train_data, ToyPrompt::none(), w);
    Eigen::VectorXi y(X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = train_data[i].label;
    ToyHyperparams hp;
    hp.seed = 31;
    const auto base = train(ToyModel::zeros(w), X, y, hp);

    const auto inputs = gen_general(w, 500, 37);
    const auto distilled = toy_distill(base, w, inputs);
    REQUIRE(distilled.size() == inputs.size());

    // Agreement with ground truth equals the base model's accuracy on the
    // same inputs, by construction.
    const auto Xi = featurize_batch(inputs, ToyPrompt::none(), w);
    Eigen::VectorXi yi(Xi.cols());
    for (Eigen::Index i = 0; i < yi.size(); ++i) yi[i] = inputs[i].label;
    const double base_acc = toy::accuracy(base, Xi, yi);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < distilled.size(); ++i) {
        if (distilled[i].label == inputs[i].label) ++agree;
    }
    CHECK(static_cast<double>(agree) / distilled.size() == doctest::Approx(base_acc));
}

TEST_CASE("FT on a cue-free conflicting world stays below the Bayes bound") {
    auto w = ToyWorld::make_default(1);
    w.cue_rate = 0.0; // no domain signal at all

    // Brute-force Bayes: the optimum predicts the most common label per
    // marker across domains; for shift maps every domain disagrees.
    double bayes = 0.0;
    for (int m = 0; m < w.n_classes; ++m) {
        std::vector<int> count(w.n_classes, 0);
        int best = 0;
        for (int d = 0; d < w.n_domains; ++d) {
            best = std::max(best, ++count[w.label_maps[d][m]]);
        }
        bayes += static_cast<double>(best);
    }
    bayes /= static_cast<double>(w.n_classes * w.n_domains);
    CHECK(bayes == doctest::Approx(1.0 / 3.0));

    const auto rep = run_experiment(Strategy::ft, w, 0.0, small_sizes(), default_hp(), 1);
    CHECK(rep.domain_mean_acc <= 0.60);
    CHECK(rep.domain_mean_acc <= bayes + 0.05);
}

TEST_CASE("FTRP restores separability on the same cue-free world") {
    auto w = ToyWorld::make_default(1);
    w.cue_rate = 0.0;
    const auto rep = run_experiment(Strategy::ftrp, w, 0.0, small_sizes(), default_hp(), 1);
    CHECK(rep.domain_mean_acc >= 0.95);
}

TEST_CASE("the pretrained base model is accurate on general data") {
    const auto w = ToyWorld::make_default(1);
    const auto rep = run_experiment(Strategy::ft, w, 0.0, small_sizes(), default_hp(), 1);
    CHECK(rep.base_general_acc >= 0.95);
}

TEST_CASE("rega with r=0 duplicates nothing and still runs") {
    const auto w = ToyWorld::make_default(2);
    const auto rep = run_experiment(Strategy::rega, w, 0.0, small_sizes(), default_hp(), 2);
    CHECK(rep.strategy == "rega");
    CHECK(rep.general_acc >= 0.0);
    CHECK(rep.domain_acc.size() == 3);
}

TEST_CASE("run_experiment is a pure function of its seeds") {
    const auto w = ToyWorld::make_default(3);
    const auto a = run_experiment(Strategy::rega, w, 0.1, small_sizes(), default_hp(), 3);
    const auto b = run_experiment(Strategy::rega, w, 0.1, small_sizes(), default_hp(), 3);
    CHECK(a.general_acc == b.general_acc);
    CHECK(a.base_general_acc == b.base_general_acc);
    CHECK(a.domain_acc == b.domain_acc);

    const auto c = run_experiment(Strategy::rega, w, 0.1, small_sizes(), default_hp(), 4);
    const bool differs = c.general_acc != a.general_acc || c.domain_acc != a.domain_acc;
    CHECK(differs);
}

TEST_CASE("sweep emits one row per (strategy-grid, seed, domain)") {
    ToySizes s;
    s.pretrain = 300;
    s.replay = 300;
    s.per_domain = 120;
    s.eval_general = 100;
    s.eval_domain = 100;
    const std::vector<double> grid = {0.0, 0.1, 0.5};
    const auto rows = sweep_mixing_ratio(grid, {Strategy::rega, Strategy::ft}, s,
                                         default_hp(), {1, 2});
    // rega: 3 grid points x 2 seeds x 3 domains; ft: 2 seeds x 3 domains.
    CHECK(rows.size() == 3 * 2 * 3 + 2 * 3);

    const auto again = sweep_mixing_ratio(grid, {Strategy::rega, Strategy::ft}, s,
                                          default_hp(), {1, 2});
    REQUIRE(rows.size() == again.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].general_acc == again[i].general_acc);
        CHECK(rows[i].domain_acc == again[i].domain_acc);
    }

    CHECK_THROWS_AS(
        sweep_mixing_ratio({}, {Strategy::rega}, s, default_hp(), {1}),
        ValidationError);
}
