#pragma once

#include "rega/strategy.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rega::toy {

// Synthetic multi-domain world. The vocabulary is laid out as
//   [markers | cue tokens | central token | role tokens | fillers].
// Every sample carries exactly one marker token; the general rule labels a
// sample by its marker class, and domain i relabels it through the non-trivial
// permutation label_maps[i]. Domain inputs carry their domain's cue token with
// probability cue_rate, so the domain is usually, but not always, readable off
// the input.
//
// Features are the binary token-presence vector extended with one
// marker-conditioning block per domain: block (m, d) activates when the
// sample's marker is m and a domain-d signal is present. An explicit role
// prompt is a full-strength signal (1.0); an in-input cue is a weaker one
// (cue_signal_strength). Role prompts and cues share these slots, which is
// what lets skills learned under a role prompt transfer to cue-bearing inputs
// under the central prompt.
struct ToyWorld {
    int vocab_size = 24;
    int n_classes = 4;
    int n_domains = 3;
    int seq_len = 8;
    double cue_rate = 0.9;
    double cue_signal_strength = 0.7;
    std::vector<std::vector<int>> label_maps; // per domain, size n_classes

    int marker_token(int cls) const { return cls; }
    int cue_token(int domain) const { return n_classes + domain; }
    int central_token() const { return n_classes + n_domains; }
    int role_token(int domain) const { return n_classes + n_domains + 1 + domain; }
    int first_filler() const { return n_classes + 2 * n_domains + 1; }
    int n_fillers() const { return vocab_size - first_filler(); }
    int feature_dim() const { return vocab_size + n_classes * n_domains; }
    int signal_slot(int marker, int domain) const {
        return vocab_size + marker * n_domains + domain;
    }

    // Default label maps are the cyclic shifts by 1..n_domains — pairwise
    // distinct, fixed-point free, maximally conflicting. When n_domains
    // exceeds the shift family, the remaining maps are drawn as seeded
    // distinct non-identity permutations.
    static ToyWorld make_default(std::uint64_t world_seed);

    void validate() const;
};

struct ToySample {
    std::vector<int> tokens;
    int label = 0;
    int domain = -1; // -1 = general
};

// Prompt context a sample is featurized under.
struct ToyPrompt {
    enum class Kind { none, central, role };
    Kind kind = Kind::none;
    int domain = -1;

    static ToyPrompt none() { return {Kind::none, -1}; }
    static ToyPrompt central() { return {Kind::central, -1}; }
    static ToyPrompt role(int d) { return {Kind::role, d}; }
};

std::vector<ToySample> gen_general(const ToyWorld& world, std::size_t size,
                                   std::uint64_t seed);
std::vector<ToySample> gen_domain(const ToyWorld& world, int domain, std::size_t size,
                                  std::uint64_t seed);

Eigen::VectorXd featurize(const ToySample& sample, const ToyPrompt& prompt,
                          const ToyWorld& world);
// Feature matrix with one column per sample.
Eigen::MatrixXd featurize_batch(const std::vector<ToySample>& samples,
                                const ToyPrompt& prompt, const ToyWorld& world);

// Multinomial logistic model: prediction = argmax(weights * x + bias).
struct ToyModel {
    Eigen::MatrixXd weights; // n_classes x feature_dim
    Eigen::VectorXd bias;    // n_classes

    static ToyModel zeros(const ToyWorld& world);
    Eigen::VectorXi predict(const Eigen::MatrixXd& X) const;
};

struct ToyHyperparams {
    double learning_rate = 0.1;
    int batch_size = 16;
    int epochs = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

// Column-wise softmax with max subtraction.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

// Mean cross-entropy over the batch plus its analytic gradient; the bridge
// the finite-difference check runs against.
struct LossGrad {
    double loss = 0.0;
    Eigen::MatrixXd grad_weights;
    Eigen::VectorXd grad_bias;
};
LossGrad loss_and_grad(const ToyModel& model, const Eigen::MatrixXd& X,
                       const Eigen::VectorXi& y);

// Minibatch SGD on softmax cross-entropy; the shuffle is keyed by
// (hp.seed, stream, epoch) so identical inputs reproduce byte-identical
// trajectories.
ToyModel train(ToyModel model, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
               const ToyHyperparams& hp, const std::string& stream = "train");

// Labels fresh inputs with the base model's own predictions (promptless).
std::vector<ToySample> toy_distill(const ToyModel& base, const ToyWorld& world,
                                   const std::vector<ToySample>& inputs);

double accuracy(const ToyModel& model, const Eigen::MatrixXd& X,
                const Eigen::VectorXi& y);

struct ToySizes {
    std::size_t pretrain = 2000;
    std::size_t replay = 3000;
    std::size_t per_domain = 1000;
    std::size_t eval_general = 1000;
    std::size_t eval_domain = 1000;
};

struct ToyReport {
    std::string strategy;
    double mixing_ratio = 0.0;
    std::uint64_t seed = 0;
    double base_general_acc = 0.0;
    double general_acc = 0.0;
    std::vector<double> domain_acc;
    double domain_mean_acc = 0.0;
};

// Pretrains the base on general data, builds the strategy corpus over toy
// samples with the compiler's semantics, adapts, and evaluates general and
// per-domain accuracy under the strategy's inference prompt rule. A pure
// function of (world, r, sizes, hp, seed).
ToyReport run_experiment(Strategy strategy, const ToyWorld& world, double r,
                         const ToySizes& sizes, const ToyHyperparams& hp,
                         std::uint64_t seed);

struct SweepRow {
    std::string strategy;
    double r = 0.0;
    std::uint64_t seed = 0;
    double general_acc = 0.0;
    int domain = 0;
    double domain_acc = 0.0;
};

// One experiment per (strategy, r, seed). Strategies that ignore r (everything
// but REGA) run once per seed and are reported with r = 0.
std::vector<SweepRow> sweep_mixing_ratio(const std::vector<double>& grid,
                                         const std::vector<Strategy>& strategies,
                                         const ToySizes& sizes, ToyHyperparams hp,
                                         const std::vector<std::uint64_t>& seeds);

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::filesystem::path& path);

} // namespace rega::toy
