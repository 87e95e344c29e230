#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>
#include <vector>

#include "efgnn/graph.hpp"
#include "efgnn/rng.hpp"

using namespace efgnn;

namespace {

using Edges = std::vector<std::pair<int, int>>;

double entry(const SparseAdjacency& adj, std::size_t i, std::size_t j) {
    for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
        if (adj.col_idx[p] == j) return adj.values[p];
    }
    return 0.0;
}

Edges random_edges(std::size_t n, double p, Rng& rng) {
    Edges edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.bernoulli(p)) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return edges;
}

/// Dense reference for the normalized adjacency built from the same rules.
std::vector<std::vector<double>> dense_normalized(const Edges& edges, std::size_t n) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (auto [u, v] : edges) a[u][v] = a[v][u] = 1.0;
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (a[i][j] != 0.0) a[i][j] /= std::sqrt(deg[i] * deg[j]);
    return a;
}

}  // namespace

TEST_CASE("isolated node normalizes to identity") {
    SparseAdjacency adj = normalize_adjacency({}, 1);
    adj.validate();
    CHECK(adj.n == 1);
    CHECK(adj.nnz() == 1);
    CHECK(adj.values[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("single edge gives the constant half matrix") {
    SparseAdjacency adj = normalize_adjacency({{0, 1}}, 2);
    adj.validate();
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(entry(adj, i, j) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("triangle gives the constant third matrix") {
    SparseAdjacency adj = normalize_adjacency({{0, 1}, {1, 2}, {0, 2}}, 3);
    adj.validate();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(entry(adj, i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("duplicate edges in either orientation collapse") {
    SparseAdjacency once = normalize_adjacency({{0, 1}}, 2);
    SparseAdjacency dup = normalize_adjacency({{0, 1}, {1, 0}, {0, 1}}, 2);
    REQUIRE(dup.nnz() == once.nnz());
    CHECK(std::memcmp(dup.values.data(), once.values.data(),
                      once.nnz() * sizeof(double)) == 0);
}

TEST_CASE("stored symmetric entries are bit-identical") {
    Rng rng(21);
    Edges edges = random_edges(17, 0.3, rng);
    SparseAdjacency adj = normalize_adjacency(edges, 17);
    adj.validate();
    for (std::size_t i = 0; i < adj.n; ++i) {
        for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
            std::size_t j = adj.col_idx[p];
            double mirror = entry(adj, j, i);
            CHECK(std::memcmp(&mirror, &adj.values[p], sizeof(double)) == 0);
        }
    }
}

TEST_CASE("diagonal present and all values in (0, 1]") {
    Rng rng(22);
    Edges edges = random_edges(23, 0.2, rng);
    SparseAdjacency adj = normalize_adjacency(edges, 23);
    for (std::size_t i = 0; i < adj.n; ++i) CHECK(entry(adj, i, i) > 0.0);
    for (double v : adj.values) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("normalization rejects bad input") {
    CHECK_THROWS_AS(normalize_adjacency({{0, 5}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(normalize_adjacency({{-1, 0}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(normalize_adjacency({}, 0), std::invalid_argument);
}

TEST_CASE("complete graph preserves the all-ones column") {
    SparseAdjacency adj = normalize_adjacency({{0, 1}, {1, 2}, {0, 2}}, 3);
    FeatureMatrix ones(3, 1, 1.0);
    PropagatedFeatures out = propagate(adj, ones, 4);
    REQUIRE(out.hops.size() == 5);
    CHECK(out.depth() == 4);
    for (const FeatureMatrix& hop : out.hops)
        for (double v : hop.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two-node path mixes the identity features") {
    SparseAdjacency adj = normalize_adjacency({{0, 1}}, 2);
    FeatureMatrix x(2, 2);
    x.at(0, 0) = 1.0;
    x.at(1, 1) = 1.0;
    PropagatedFeatures out = propagate(adj, x, 1);
    CHECK(out.hops[0].data == x.data);
    for (double v : out.hops[1].data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sparse propagation matches the dense oracle") {
    Rng rng(23);
    for (std::size_t n : {5, 12, 32}) {
        Edges edges = random_edges(n, 0.25, rng);
        SparseAdjacency adj = normalize_adjacency(edges, n);
        auto dense = dense_normalized(edges, n);

        FeatureMatrix x(n, 3);
        for (double& v : x.data) v = rng.uniform(-2.0, 2.0);

        PropagatedFeatures sparse = propagate(adj, x, 3);

        std::vector<std::vector<double>> cur(n, std::vector<double>(3));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t f = 0; f < 3; ++f) cur[i][f] = x.at(i, f);
        for (int step = 1; step <= 3; ++step) {
            std::vector<std::vector<double>> next(n, std::vector<double>(3, 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t f = 0; f < 3; ++f) next[i][f] += dense[i][j] * cur[j][f];
            cur = std::move(next);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t f = 0; f < 3; ++f)
                    CHECK(std::abs(sparse.hops[static_cast<std::size_t>(step)].at(i, f) -
                                   cur[i][f]) < 1e-10);
        }
    }
}

TEST_CASE("regular graph preserves row sums") {
    // Ring on 8 nodes: every self-looped degree is 3, so each adjacency row
    // sums to exactly 1 and propagation is row-stochastic.
    Edges ring;
    for (int i = 0; i < 8; ++i) ring.emplace_back(i, (i + 1) % 8);
    SparseAdjacency adj = normalize_adjacency(ring, 8);

    Rng rng(24);
    FeatureMatrix x(8, 2);
    for (double& v : x.data) v = rng.uniform(0.0, 5.0);
    PropagatedFeatures out = propagate(adj, x, 6);
    for (std::size_t f = 0; f < 2; ++f) {
        double before = 0.0, after = 0.0;
        for (std::size_t i = 0; i < 8; ++i) {
            before += x.at(i, f);
            after += out.hops[6].at(i, f);
        }
        CHECK(std::abs(before - after) < 1e-10);
    }
}

TEST_CASE("propagation rejects bad shapes") {
    SparseAdjacency adj = normalize_adjacency({{0, 1}}, 2);
    FeatureMatrix wrong(3, 2);
    CHECK_THROWS_AS(propagate(adj, wrong, 1), std::invalid_argument);
    FeatureMatrix ok(2, 2);
    CHECK_THROWS_AS(propagate(adj, ok, 0), std::invalid_argument);
}

TEST_CASE("propagate call counter increments per invocation") {
    SparseAdjacency adj = normalize_adjacency({{0, 1}}, 2);
    FeatureMatrix x(2, 1, 1.0);
    std::uint64_t before = propagate_call_count();
    propagate(adj, x, 2);
    propagate(adj, x, 1);
    CHECK(propagate_call_count() == before + 2);
}

TEST_CASE("perturb with sigma zero is the identity") {
    Rng rng(25);
    FeatureMatrix x(4, 3);
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    Rng draws(7);
    FeatureMatrix out = perturb(x, 0.0, draws);
    CHECK(out.data == x.data);
}

TEST_CASE("perturb zeroes or rescales whole rows") {
    FeatureMatrix x(1, 4);
    for (std::size_t f = 0; f < 4; ++f) x.at(0, f) = 1.0 + static_cast<double>(f);
    bool saw_zero = false, saw_scaled = false;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        Rng rng(seed);
        FeatureMatrix out = perturb(x, 0.5, rng);
        bool zero = true, scaled = true;
        for (std::size_t f = 0; f < 4; ++f) {
            if (out.at(0, f) != 0.0) zero = false;
            if (std::abs(out.at(0, f) - 2.0 * x.at(0, f)) > 1e-12) scaled = false;
        }
        CHECK((zero || scaled));
        saw_zero |= zero;
        saw_scaled |= scaled;
    }
    CHECK(saw_zero);
    CHECK(saw_scaled);
}

TEST_CASE("perturb is unbiased in expectation") {
    FeatureMatrix x(5, 2);
    Rng init(26);
    for (double& v : x.data) v = init.uniform(0.5, 2.0);

    const int trials = 10000;
    const double sigma = 0.3;
    FeatureMatrix sum(5, 2, 0.0);
    Rng rng(27);
    for (int t = 0; t < trials; ++t) {
        FeatureMatrix draw = perturb(x, sigma, rng);
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += draw.data[i];
    }
    // Row survival is Bernoulli(1 - sigma) scaled by 1/(1 - sigma): the
    // per-entry standard error is |x| * sqrt(sigma / ((1 - sigma) * trials)).
    for (std::size_t i = 0; i < sum.data.size(); ++i) {
        double mean = sum.data[i] / trials;
        double se = std::abs(x.data[i]) * std::sqrt(sigma / (1.0 - sigma) / trials);
        CHECK(std::abs(mean - x.data[i]) < 3.0 * se);
    }
}

TEST_CASE("perturb repeats bit-identically under one seed") {
    FeatureMatrix x(6, 3);
    Rng init(28);
    for (double& v : x.data) v = init.normal();
    Rng a(99), b(99);
    FeatureMatrix first = perturb(x, 0.4, a);
    FeatureMatrix second = perturb(x, 0.4, b);
    CHECK(std::memcmp(first.data.data(), second.data.data(),
                      first.data.size() * sizeof(double)) == 0);
}

TEST_CASE("perturb keep mask mirrors the row decisions") {
    FeatureMatrix x(10, 2, 1.0);
    Rng a(31), b(31);
    FeatureMatrix out = perturb(x, 0.6, a);
    std::vector<std::uint8_t> mask = perturb_keep_mask(10, 0.6, b);
    for (std::size_t i = 0; i < 10; ++i) {
        bool kept = out.at(i, 0) != 0.0;
        CHECK(kept == (mask[i] != 0));
    }
}

TEST_CASE("perturb rejects sigma outside [0, 1)") {
    FeatureMatrix x(2, 2, 1.0);
    Rng rng(1);
    CHECK_THROWS_AS(perturb(x, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(perturb(x, -0.1, rng), std::invalid_argument);
}
