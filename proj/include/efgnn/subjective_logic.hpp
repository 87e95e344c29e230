#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace efgnn {

/// Raised when both operands of binary fusion are dogmatic (u1 = u2 = 0);
/// the fusion denominator vanishes there and the result is undefined.
struct DogmaticFusionError : std::domain_error {
    DogmaticFusionError()
        : std::domain_error("fuse_opinions_binary: undefined for two dogmatic opinions") {}
};

/// Non-negative per-class evidence mass over K >= 2 classes.
struct Evidence {
    std::vector<double> e;

    Evidence() = default;
    explicit Evidence(std::vector<double> values);

    std::size_t classes() const { return e.size(); }
};

/// Dirichlet parameters alpha = evidence + 1 with cached strength S = sum(alpha).
struct DirichletParams {
    std::vector<double> alpha;
    double strength = 0.0;

    DirichletParams() = default;
    explicit DirichletParams(std::vector<double> a);

    std::size_t classes() const { return alpha.size(); }
};

/// Multinomial opinion (belief, uncertainty, base rate) with u + sum(b) = 1.
struct Opinion {
    std::vector<double> belief;
    double uncertainty = 1.0;
    std::vector<double> base_rate;

    std::size_t classes() const { return belief.size(); }

    /// Throws std::invalid_argument when the mass or base-rate constraints fail.
    void validate() const;
};

std::vector<double> uniform_base_rate(std::size_t k);

/// alpha_k = e_k + 1.
DirichletParams evidence_to_dirichlet(const Evidence& ev);

/// b_k = (alpha_k - 1)/S, u = K/S. The base rate must sum to 1.
Opinion dirichlet_to_opinion(const DirichletParams& dir, std::vector<double> base_rate);

/// Same, with the uniform base rate 1/K.
Opinion dirichlet_to_opinion(const DirichletParams& dir);

/// Expected class probabilities alpha_k / S.
std::vector<double> expected_probability(const DirichletParams& dir);

/// Projected probabilities b_k + a_k * u. Under the uniform base rate this
/// equals expected_probability of the corresponding Dirichlet exactly.
std::vector<double> projected_probability(const Opinion& op);

/// Cumulative fusion in evidence form: elementwise sum across the list.
/// The list must be non-empty with matching class counts.
Evidence fuse_evidence_cbf(const std::vector<Evidence>& members);

/// Cumulative fusion of two opinions sharing a base rate:
///   u = u1 u2 / (u1 + u2 - u1 u2),  b_k = (b1_k u2 + u1 b2_k) / (u1 + u2 - u1 u2).
/// Throws DogmaticFusionError when u1 = u2 = 0.
Opinion fuse_opinions_binary(const Opinion& w1, const Opinion& w2);

/// Dissonance of a belief-mass vector: the belief-weighted average balance
/// between conflicting masses,
///   Dis = sum_j b_j * [sum_{q != j} b_q Bal(b_q, b_j)] / [sum_{q != j} b_q],
/// with Bal(x, y) = 1 - |x - y|/(x + y) when x*y != 0 and 0 otherwise, and a
/// j-term contributing 0 when its denominator vanishes. Lies in [0, 1]; 0
/// whenever at most one class carries mass; 1 only for equal masses summing to 1.
double dissonance(const std::vector<double>& belief);

/// d dissonance / d belief_k. Subgradient 0 at the |b_q - b_j| kinks and at
/// zero masses (the training path keeps every mass strictly positive).
std::vector<double> dissonance_gradient(const std::vector<double>& belief);

}  // namespace efgnn
