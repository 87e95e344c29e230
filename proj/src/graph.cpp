#include "efgnn/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace efgnn {

namespace {

std::atomic<std::uint64_t> g_propagate_calls{0};

}  // namespace

bool FeatureMatrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void SparseAdjacency::validate() const {
    if (row_ptr.size() != n + 1) throw std::logic_error("adjacency: row_ptr length mismatch");
    if (row_ptr.front() != 0 || row_ptr.back() != col_idx.size())
        throw std::logic_error("adjacency: row_ptr endpoints mismatch");
    if (col_idx.size() != values.size())
        throw std::logic_error("adjacency: col/value length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (row_ptr[i] > row_ptr[i + 1]) throw std::logic_error("adjacency: row_ptr not monotone");
        bool diagonal_seen = false;
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            if (col_idx[p] >= n) throw std::logic_error("adjacency: column out of range");
            if (p > row_ptr[i] && col_idx[p - 1] >= col_idx[p])
                throw std::logic_error("adjacency: columns not strictly increasing");
            if (!(values[p] > 0.0 && values[p] <= 1.0))
                throw std::logic_error("adjacency: value outside (0, 1]");
            if (col_idx[p] == i) diagonal_seen = true;
        }
        if (!diagonal_seen) throw std::logic_error("adjacency: missing self-loop");
    }
    // Symmetry, bit-exact: every (i, j) must have a (j, i) twin with the same value.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            std::size_t j = col_idx[p];
            const std::size_t* begin = col_idx.data() + row_ptr[j];
            const std::size_t* end = col_idx.data() + row_ptr[j + 1];
            const std::size_t* hit = std::lower_bound(begin, end, i);
            if (hit == end || *hit != i) throw std::logic_error("adjacency: asymmetric pattern");
            if (values[row_ptr[j] + static_cast<std::size_t>(hit - begin)] != values[p])
                throw std::logic_error("adjacency: asymmetric values");
        }
    }
}

SparseAdjacency normalize_adjacency(const std::vector<std::pair<int, int>>& edges,
                                    std::size_t n) {
    if (n == 0) throw std::invalid_argument("normalize_adjacency: graph must have nodes");
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (const auto& [a, b] : edges) {
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n ||
            static_cast<std::size_t>(b) >= n) {
            throw std::invalid_argument("normalize_adjacency: edge endpoint out of range (" +
                                        std::to_string(a) + ", " + std::to_string(b) + ")");
        }
        if (a == b) continue;  // the self-loop is added below regardless
        nbrs[static_cast<std::size_t>(a)].push_back(static_cast<std::size_t>(b));
        nbrs[static_cast<std::size_t>(b)].push_back(static_cast<std::size_t>(a));
    }

    std::vector<double> degree(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& list = nbrs[i];
        list.push_back(i);
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        degree[i] = static_cast<double>(list.size());  // self-loop included
    }

    SparseAdjacency adj;
    adj.n = n;
    adj.row_ptr.resize(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) adj.row_ptr[i + 1] = adj.row_ptr[i] + nbrs[i].size();
    adj.col_idx.reserve(adj.row_ptr.back());
    adj.values.reserve(adj.row_ptr.back());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : nbrs[i]) {
            adj.col_idx.push_back(j);
            // deg_i * deg_j commutes exactly, so (i, j) and (j, i) get the same bits.
            adj.values.push_back(1.0 / std::sqrt(degree[i] * degree[j]));
        }
    }
    return adj;
}

PropagatedFeatures propagate(const SparseAdjacency& adj, const FeatureMatrix& features,
                             int steps) {
    if (steps < 1) throw std::invalid_argument("propagate: steps must be >= 1");
    if (adj.n != features.rows)
        throw std::invalid_argument("propagate: adjacency size " + std::to_string(adj.n) +
                                    " does not match feature rows " +
                                    std::to_string(features.rows));
    g_propagate_calls.fetch_add(1, std::memory_order_relaxed);

    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    PropagatedFeatures out;
    out.hops.reserve(static_cast<std::size_t>(steps) + 1);
    out.hops.push_back(features);
    for (int l = 1; l <= steps; ++l) {
        const FeatureMatrix& prev = out.hops.back();
        FeatureMatrix next(n, d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* dst = next.row(i);
            for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
                const double w = adj.values[p];
                const double* src = prev.row(adj.col_idx[p]);
                for (std::size_t f = 0; f < d; ++f) dst[f] += w * src[f];
            }
        }
        out.hops.push_back(std::move(next));
    }
    return out;
}

std::uint64_t propagate_call_count() { return g_propagate_calls.load(std::memory_order_relaxed); }

std::vector<std::uint8_t> perturb_keep_mask(std::size_t n, double sigma, Rng& rng) {
    if (!(sigma >= 0.0 && sigma < 1.0))
        throw std::invalid_argument("perturb: sigma must lie in [0, 1)");
    std::vector<std::uint8_t> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = rng.bernoulli(sigma) ? 0 : 1;
    return keep;
}

FeatureMatrix perturb(const FeatureMatrix& features, double sigma, Rng& rng) {
    const std::vector<std::uint8_t> keep = perturb_keep_mask(features.rows, sigma, rng);
    const double scale = 1.0 / (1.0 - sigma);
    FeatureMatrix out(features.rows, features.cols, 0.0);
    for (std::size_t i = 0; i < features.rows; ++i) {
        if (!keep[i]) continue;
        const double* src = features.row(i);
        double* dst = out.row(i);
        for (std::size_t f = 0; f < features.cols; ++f) dst[f] = src[f] * scale;
    }
    return out;
}

}  // namespace efgnn
