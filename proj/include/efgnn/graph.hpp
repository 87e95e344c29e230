#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "efgnn/rng.hpp"

namespace efgnn {

/// Dense row-major matrix of 64-bit reals.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t n, std::size_t d, double fill = 0.0)
        : rows(n), cols(d), data(n * d, fill) {}

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool all_finite() const;
};

/// Symmetric-normalized, self-looped adjacency in compressed sparse row form.
/// Entry (i, j) holds 1/sqrt(deg_i * deg_j), where deg counts the self-loop,
/// so every stored value lies in (0, 1] and the diagonal is fully populated.
/// The (i, j) and (j, i) entries are bit-identical by construction.
struct SparseAdjacency {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;  // length n + 1, non-decreasing
    std::vector<std::size_t> col_idx;  // strictly increasing within each row
    std::vector<double> values;

    std::size_t nnz() const { return col_idx.size(); }

    /// Checks every structural invariant, throwing std::logic_error on violation.
    void validate() const;
};

/// Hop-indexed propagation outputs; hops[0] is the raw input matrix.
struct PropagatedFeatures {
    std::vector<FeatureMatrix> hops;

    std::size_t depth() const { return hops.empty() ? 0 : hops.size() - 1; }
};

/// Builds the normalized adjacency from an undirected edge list over n nodes.
/// Duplicate edges (in either orientation) collapse to one; self-loops are
/// added internally and need not appear in the input. Endpoints outside
/// [0, n) are input errors.
SparseAdjacency normalize_adjacency(const std::vector<std::pair<int, int>>& edges,
                                    std::size_t n);

/// Repeated sparse-dense products: hops[l] = adj * hops[l - 1] for l = 1..steps.
/// steps >= 1; adj.n must equal features.rows.
PropagatedFeatures propagate(const SparseAdjacency& adj, const FeatureMatrix& features,
                             int steps);

/// Process-wide count of propagate() invocations (training-loop instrumentation).
std::uint64_t propagate_call_count();

/// Node-level Bernoulli row dropout: each row is zeroed with probability sigma
/// and surviving rows are scaled by 1/(1 - sigma), so the expectation equals
/// the input. sigma in [0, 1). Exactly one draw per row, in row order.
FeatureMatrix perturb(const FeatureMatrix& features, double sigma, Rng& rng);

/// The keep decisions behind perturb(): one Bernoulli(1 - sigma) draw per row.
std::vector<std::uint8_t> perturb_keep_mask(std::size_t n, double sigma, Rng& rng);

}  // namespace efgnn
