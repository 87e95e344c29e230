#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>
#include <vector>

#include "efgnn/data.hpp"
#include "efgnn/graph.hpp"
#include "efgnn/rng.hpp"

#include "test_util.hpp"

using namespace efgnn;
using efgnn_test::TempDir;
using efgnn_test::fixture;
using efgnn_test::slurp;
using efgnn_test::spit;

namespace {

std::size_t count(const std::vector<std::uint8_t>& mask) {
    std::size_t c = 0;
    for (std::uint8_t m : mask) c += m;
    return c;
}

bool same_bundle(const DatasetBundle& a, const DatasetBundle& b) {
    return a.features.rows == b.features.rows && a.features.cols == b.features.cols &&
           a.features.data == b.features.data && a.edges == b.edges && a.labels == b.labels &&
           a.train_mask == b.train_mask && a.val_mask == b.val_mask &&
           a.test_mask == b.test_mask && a.num_classes == b.num_classes;
}

/// Newman modularity of the planted partition on the bundle's edge list.
double modularity(const DatasetBundle& bundle) {
    const double m = static_cast<double>(bundle.edges.size());
    std::vector<double> degree(bundle.nodes(), 0.0);
    double within = 0.0;
    for (auto [u, v] : bundle.edges) {
        degree[static_cast<std::size_t>(u)] += 1.0;
        degree[static_cast<std::size_t>(v)] += 1.0;
        if (bundle.labels[static_cast<std::size_t>(u)] ==
            bundle.labels[static_cast<std::size_t>(v)])
            within += 1.0;
    }
    std::vector<double> class_degree(static_cast<std::size_t>(bundle.num_classes), 0.0);
    for (std::size_t i = 0; i < bundle.nodes(); ++i)
        class_degree[static_cast<std::size_t>(bundle.labels[i])] += degree[i];
    double q = within / m;
    for (double dc : class_degree) q -= (dc / (2.0 * m)) * (dc / (2.0 * m));
    return q;
}

}  // namespace

TEST_CASE("citation toy fixture") {
    DatasetBundle bundle = load_citation_raw(fixture("toy.content"), fixture("toy.cites"));
    CHECK(bundle.nodes() == 3);
    CHECK(bundle.features.cols == 2);
    CHECK(bundle.num_classes == 2);
    // One a-b edge after orientation-collapse; the self-citation is dropped.
    REQUIRE(bundle.edges.size() == 1);
    CHECK(bundle.edges[0] == std::pair<int, int>{0, 1});
    CHECK(bundle.dangling_edges == 0);
    // Labels factorize alphabetically: x -> 0, y -> 1.
    CHECK(bundle.labels == std::vector<int>{0, 1, 0});
    CHECK(bundle.features.at(2, 0) == 1.0);
    CHECK(bundle.features.at(2, 1) == 1.0);
    // All three nodes land in train under the first-20-per-class convention.
    CHECK(count(bundle.train_mask) == 3);
    CHECK(count(bundle.val_mask) == 0);
    CHECK(count(bundle.test_mask) == 0);
}

TEST_CASE("dangling citations are counted and skipped") {
    DatasetBundle bundle =
        load_citation_raw(fixture("toy.content"), fixture("toy_dangling.cites"));
    CHECK(bundle.dangling_edges == 1);
    CHECK(bundle.edges.size() == 1);
}

TEST_CASE("citation parse errors carry line numbers") {
    TempDir dir("citation_errors");

    spit(dir.file("short.content"), "a 1 0 x\nb 0 y\n");
    try {
        load_citation_raw(dir.file("short.content"), fixture("toy.cites"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }

    spit(dir.file("badfeat.content"), "a 1 0 x\nb 0 oops y\n");
    spit(dir.file("empty.cites"), "");
    try {
        load_citation_raw(dir.file("badfeat.content"), dir.file("empty.cites"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }

    spit(dir.file("dup.content"), "a 1 0 x\na 0 1 y\n");
    CHECK_THROWS_AS(load_citation_raw(dir.file("dup.content"), dir.file("empty.cites")),
                    ParseError);

    spit(dir.file("empty.content"), "\n\n");
    CHECK_THROWS_AS(load_citation_raw(dir.file("empty.content"), dir.file("empty.cites")),
                    ParseError);

    spit(dir.file("ok.content"), "a 1 0 x\nb 0 1 y\n");
    spit(dir.file("bad.cites"), "a b c\n");
    CHECK_THROWS_AS(load_citation_raw(dir.file("ok.content"), dir.file("bad.cites")),
                    ParseError);
}

TEST_CASE("explicit split file overrides the convention") {
    TempDir dir("split_file");
    spit(dir.file("splits.txt"), "# comment\ntrain 0\nval 1\ntest 2\n");
    DatasetBundle bundle =
        load_citation_raw(fixture("toy.content"), fixture("toy.cites"), dir.file("splits.txt"));
    CHECK(bundle.train_mask == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(bundle.val_mask == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(bundle.test_mask == std::vector<std::uint8_t>{0, 0, 1});

    spit(dir.file("overlap.txt"), "train 0-1\nval 1\n");
    CHECK_THROWS_AS(
        load_citation_raw(fixture("toy.content"), fixture("toy.cites"), dir.file("overlap.txt")),
        ParseError);
    spit(dir.file("oob.txt"), "train 0-5\n");
    CHECK_THROWS_AS(
        load_citation_raw(fixture("toy.content"), fixture("toy.cites"), dir.file("oob.txt")),
        ParseError);
}

TEST_CASE("generic round-trip is byte-stable") {
    SbmSpec spec;
    spec.nodes = 60;
    spec.feature_dim = 5;
    spec.train_per_class = 5;
    spec.val_per_class = 5;
    spec.seed = 3;
    DatasetBundle bundle = generate_sbm(spec);

    TempDir dir("generic_roundtrip");
    auto paths = [&](const std::string& tag) {
        return std::vector<std::string>{dir.file(tag + "_features.csv"),
                                        dir.file(tag + "_edges.tsv"),
                                        dir.file(tag + "_labels.csv"),
                                        dir.file(tag + "_splits.txt")};
    };
    auto a = paths("a");
    save_generic(bundle, a[0], a[1], a[2], a[3]);
    DatasetBundle loaded = load_generic(a[0], a[1], a[2], a[3]);
    CHECK(same_bundle(bundle, loaded));

    auto b = paths("b");
    save_generic(loaded, b[0], b[1], b[2], b[3]);
    for (std::size_t i = 0; i < 4; ++i) CHECK(slurp(a[i]) == slurp(b[i]));
}

TEST_CASE("generic loader rejects inconsistent inputs") {
    TempDir dir("generic_errors");
    spit(dir.file("features.csv"), "1.0,2.0\n3.0,4.0\n");
    spit(dir.file("edges.tsv"), "0\t1\n");
    spit(dir.file("labels.csv"), "0\n1\n");
    spit(dir.file("splits.txt"), "train 0-1\n");
    CHECK_NOTHROW(load_generic(dir.file("features.csv"), dir.file("edges.tsv"),
                               dir.file("labels.csv"), dir.file("splits.txt")));

    spit(dir.file("labels_short.csv"), "0\n");
    CHECK_THROWS_AS(load_generic(dir.file("features.csv"), dir.file("edges.tsv"),
                                 dir.file("labels_short.csv"), dir.file("splits.txt")),
                    ParseError);

    spit(dir.file("features_ragged.csv"), "1.0,2.0\n3.0\n");
    CHECK_THROWS_AS(load_generic(dir.file("features_ragged.csv"), dir.file("edges.tsv"),
                                 dir.file("labels.csv"), dir.file("splits.txt")),
                    ParseError);

    spit(dir.file("edges_bad.tsv"), "0\tx\n");
    CHECK_THROWS_AS(load_generic(dir.file("features.csv"), dir.file("edges_bad.tsv"),
                                 dir.file("labels.csv"), dir.file("splits.txt")),
                    ParseError);
}

TEST_CASE("the two loaders agree on the same graph") {
    TempDir dir("cross_loader");
    spit(dir.file("splits.txt"), "train 0-1\ntest 2\n");
    DatasetBundle citation =
        load_citation_raw(fixture("toy.content"), fixture("toy.cites"), dir.file("splits.txt"));

    spit(dir.file("features.csv"), "1,0\n0,1\n1,1\n");
    spit(dir.file("edges.tsv"), "0\t1\n");
    spit(dir.file("labels.csv"), "0\n1\n0\n");
    DatasetBundle generic = load_generic(dir.file("features.csv"), dir.file("edges.tsv"),
                                         dir.file("labels.csv"), dir.file("splits.txt"));
    CHECK(same_bundle(citation, generic));
}

TEST_CASE("block model with extreme probabilities gives two cliques") {
    SbmSpec spec;
    spec.nodes = 20;
    spec.classes = 2;
    spec.p_in = 1.0;
    spec.p_out = 0.0;
    spec.feature_dim = 3;
    spec.train_per_class = 3;
    spec.val_per_class = 3;
    DatasetBundle bundle = generate_sbm(spec);
    // Two 10-cliques: 2 * C(10, 2) edges, none crossing.
    CHECK(bundle.edges.size() == 90);
    for (auto [u, v] : bundle.edges)
        CHECK(bundle.labels[static_cast<std::size_t>(u)] ==
              bundle.labels[static_cast<std::size_t>(v)]);
}

TEST_CASE("block model is deterministic per seed") {
    SbmSpec spec;
    spec.nodes = 80;
    spec.feature_dim = 4;
    spec.train_per_class = 5;
    spec.val_per_class = 5;
    spec.seed = 11;
    DatasetBundle a = generate_sbm(spec);
    DatasetBundle b = generate_sbm(spec);
    CHECK(same_bundle(a, b));
    spec.seed = 12;
    DatasetBundle c = generate_sbm(spec);
    CHECK_FALSE(c.edges == a.edges);
}

TEST_CASE("benchmark-scale block model is strongly assortative") {
    SbmSpec spec;  // defaults: n=300, K=3, p_in=0.1, p_out=0.01
    DatasetBundle bundle = generate_sbm(spec);
    CHECK(bundle.nodes() == 300);
    CHECK(bundle.num_classes == 3);
    CHECK(modularity(bundle) > 0.3);
    // Contiguous balanced blocks with fixed split counts per class.
    for (int c = 0; c < 3; ++c) {
        std::size_t train = 0, val = 0, test = 0;
        for (std::size_t i = 0; i < 300; ++i) {
            if (bundle.labels[i] != c) continue;
            train += bundle.train_mask[i];
            val += bundle.val_mask[i];
            test += bundle.test_mask[i];
        }
        CHECK(train == 20);
        CHECK(val == 30);
        CHECK(test == 50);
    }
}

TEST_CASE("block model validates its parameters") {
    SbmSpec spec;
    spec.p_out = 0.5;
    spec.p_in = 0.2;
    CHECK_THROWS_AS(generate_sbm(spec), std::invalid_argument);
    SbmSpec tiny;
    tiny.nodes = 2;
    tiny.classes = 3;
    CHECK_THROWS_AS(generate_sbm(tiny), std::invalid_argument);
    SbmSpec overfull;
    overfull.nodes = 30;
    overfull.classes = 3;  // 10-node blocks cannot give 20 + 30 split nodes
    CHECK_THROWS_AS(generate_sbm(overfull), std::invalid_argument);
}

TEST_CASE("noise injection is seeded and calibrated") {
    FeatureMatrix x(250, 400);
    Rng rng(31);
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

    FeatureMatrix same = inject_ood_noise(x, 0.0, 9);
    CHECK(same.data == x.data);

    const double eta = 0.7;
    FeatureMatrix a = inject_ood_noise(x, eta, 9);
    FeatureMatrix b = inject_ood_noise(x, eta, 9);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
    FeatureMatrix c = inject_ood_noise(x, eta, 10);
    CHECK_FALSE(c.data == a.data);

    // 1e5 entries: the sample variance of the added noise sits within 5% of
    // eta^2 (chi-square spread at this count is ~0.45%, so 5% is generous).
    double mean = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) mean += a.data[i] - x.data[i];
    mean /= static_cast<double>(x.data.size());
    double var = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        double d = a.data[i] - x.data[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(x.data.size() - 1);
    CHECK(std::abs(var - eta * eta) < 0.05 * eta * eta);
    CHECK(std::abs(mean) < 3.0 * eta / std::sqrt(static_cast<double>(x.data.size())));
}

TEST_CASE("row normalization scales by the L1 norm and skips zero rows") {
    FeatureMatrix x(3, 3);
    x.at(0, 0) = 2.0;
    x.at(0, 1) = -2.0;
    x.at(0, 2) = 4.0;
    x.at(2, 0) = 5.0;
    row_normalize(x);
    CHECK(x.at(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(x.at(0, 1) == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(x.at(0, 2) == doctest::Approx(0.5).epsilon(1e-15));
    for (std::size_t f = 0; f < 3; ++f) CHECK(x.at(1, f) == 0.0);
    CHECK(x.at(2, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bundle validation catches structural damage") {
    SbmSpec spec;
    spec.nodes = 30;
    spec.feature_dim = 2;
    spec.train_per_class = 2;
    spec.val_per_class = 2;
    DatasetBundle bundle = generate_sbm(spec);
    CHECK_NOTHROW(bundle.validate());

    DatasetBundle overlap = bundle;
    overlap.val_mask[0] = 1;
    overlap.train_mask[0] = 1;
    CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);

    DatasetBundle bad_label = bundle;
    bad_label.labels[0] = 7;
    CHECK_THROWS_AS(bad_label.validate(), std::invalid_argument);

    DatasetBundle unsorted = bundle;
    REQUIRE(unsorted.edges.size() >= 2);
    std::swap(unsorted.edges[0], unsorted.edges[1]);
    CHECK_THROWS_AS(unsorted.validate(), std::invalid_argument);

    DatasetBundle self_loop = bundle;
    self_loop.edges[0] = {2, 2};
    CHECK_THROWS_AS(self_loop.validate(), std::invalid_argument);
}
