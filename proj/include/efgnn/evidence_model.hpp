#pragma once

#include <cstdint>
#include <vector>

#include "efgnn/graph.hpp"
#include "efgnn/subjective_logic.hpp"

namespace efgnn {

/// Shared two-layer evidence head: rectified hidden layer, softplus output.
/// The same weights serve every hop's features (weight sharing across depths).
struct ModelParams {
    std::size_t in_dim = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;
    std::vector<double> w1;  // in_dim x hidden, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden x classes, row-major
    std::vector<double> b2;  // classes

    ModelParams() = default;
    ModelParams(std::size_t d, std::size_t h, std::size_t k);

    /// Fan-balanced uniform init, U(-g, g) with g = sqrt(6/(fan_in + fan_out));
    /// biases start at zero. Draw order: w1, then w2.
    static ModelParams glorot(std::size_t d, std::size_t h, std::size_t k, Rng& rng);

    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
    bool all_finite() const;
};

struct LossWeights {
    double lambda_kl = 0.0;
    double lambda_dis = 0.0;

    void validate() const;
};

/// Per-hop n x K evidence matrices for a configured hop set.
struct HopEvidenceSet {
    std::vector<int> hop_ids;
    std::vector<FeatureMatrix> evidence;

    std::size_t nodes() const { return evidence.empty() ? 0 : evidence.front().rows; }
    std::size_t classes() const { return evidence.empty() ? 0 : evidence.front().cols; }
};

/// Stochastic-pass configuration. Row-perturbation and dropout masks are
/// derived from (mask_seed, epoch, hop, row), so the draws are independent of
/// evaluation order and of which row subset a pass computes.
struct ForwardOptions {
    bool train_mode = false;
    double perturb_sigma = 0.0;
    double dropout_rate = 0.0;
    std::uint64_t mask_seed = 0;
    std::uint64_t epoch = 0;
};

/// Intermediates captured by a train-mode forward pass, consumed by backward().
/// Stored compactly: row r of each matrix belongs to node node_ids[r], so a
/// pass restricted to the labeled rows traces only those. hidden holds
/// pre-dropout activation values; backward replays the dropout draws from
/// `options`, so no mask is stored.
struct ForwardTrace {
    ForwardOptions options;
    std::vector<int> hop_ids;
    std::vector<std::size_t> node_ids;  // captured rows, ascending
    std::vector<FeatureMatrix> inputs;  // per hop: |node_ids| x d perturbed features
    std::vector<FeatureMatrix> hidden;  // per hop: |node_ids| x h pre-dropout activations
};

/// Joint per-node Dirichlet/opinion state after cumulative fusion.
struct FusedOutput {
    std::size_t nodes = 0;
    std::size_t classes = 0;
    FeatureMatrix alpha;              // n x K, alpha_k = 1 + sum_l e_k^l
    std::vector<double> strength;     // S = sum_k alpha_k
    FeatureMatrix belief;             // n x K, b_k = (alpha_k - 1)/S
    std::vector<double> uncertainty;  // u = K/S

    DirichletParams node_dirichlet(std::size_t i) const;
    Opinion node_opinion(std::size_t i) const;
    /// Expected class probabilities alpha/S for one node.
    std::vector<double> node_probability(std::size_t i) const;
};

/// ln(1 + exp(x)), overflow-safe on both tails.
double softplus(double x);

/// Rectified hidden activation. Units below threshold stay exactly dead, so
/// inputs that miss every learned pattern leave the output layer at its bias.
double hidden_activation(double z);

/// Derivative of hidden_activation expressed through its value.
double hidden_activation_grad(double value);

/// Runs the shared head over each configured hop's features. hop_set entries
/// index into features.hops. In train mode, node-level row perturbation and
/// element-wise dropout between the layers are active; in eval mode both are
/// disabled and the pass is deterministic. When `rows` is given, only those
/// node rows are computed (the rest stay zero); mask draws do not depend on
/// the subset. `trace` captures backward() inputs when non-null.
HopEvidenceSet forward_evidence(const ModelParams& params, const PropagatedFeatures& features,
                                const std::vector<int>& hop_set, const ForwardOptions& options,
                                ForwardTrace* trace = nullptr,
                                const std::vector<std::size_t>* rows = nullptr);

/// Cumulative fusion across hops (evidence sum), then the joint Dirichlet and
/// opinion per node. Identities u = K/S and u + sum(b) = 1 hold by construction.
FusedOutput fuse_forward(const HopEvidenceSet& evidence);

// --- per-node loss terms on a joint Dirichlet row (alpha, length k) ---

/// Cross-entropy under the Dirichlet: psi(S) - psi(alpha_t).
double loss_ece(const double* alpha, std::size_t k, int true_class);
double loss_ece(const DirichletParams& dir, int true_class);

/// Dissonance of the strength-normalized belief (alpha - 1)/S.
double loss_dissonance(const double* alpha, std::size_t k);
double loss_dissonance(const DirichletParams& dir);

/// KL(Dir(alpha~) || Dir(1)) with the true-class entry of alpha~ clamped to 1;
/// invariant to alpha_t by construction.
double loss_kl(const double* alpha, std::size_t k, int true_class);
double loss_kl(const DirichletParams& dir, int true_class);

/// Mean over labeled nodes of ece + lambda_dis * dis + lambda_kl * kl.
/// An all-zero mask yields 0.
double loss_total(const FusedOutput& fused, const std::vector<int>& labels,
                  const std::vector<std::uint8_t>& mask, const LossWeights& weights);

struct Gradients {
    std::vector<double> w1, b1, w2, b2;
    double loss = 0.0;
    std::size_t labeled = 0;

    explicit Gradients(const ModelParams& params);
};

/// Analytic gradients of loss_total with respect to every parameter tensor,
/// propagated through fusion, softplus, dropout, the rectifier, and the
/// perturbation scaling. Requires the train-mode forward state for the same
/// parameters. Unlabeled rows contribute nothing.
Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const HopEvidenceSet& evidence, const FusedOutput& fused,
                   const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                   const LossWeights& weights);

/// Train-mode forward + backward in one call (masks drawn from options).
Gradients compute_gradients(const ModelParams& params, const PropagatedFeatures& features,
                            const std::vector<int>& hop_set, const std::vector<int>& labels,
                            const std::vector<std::uint8_t>& mask, const LossWeights& weights,
                            const ForwardOptions& options,
                            const std::vector<std::size_t>* rows = nullptr);

}  // namespace efgnn
