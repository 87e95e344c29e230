#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "efgnn/graph.hpp"

namespace efgnn {

struct ParseError : std::runtime_error {
    std::size_t line;  // 1-based; 0 when not line-specific

    explicit ParseError(const std::string& message, std::size_t line_number = 0)
        : std::runtime_error(line_number == 0
                                 ? message
                                 : message + " (line " + std::to_string(line_number) + ")"),
          line(line_number) {}
};

/// A loaded dataset: features, undirected edge list, integer labels, and
/// train/val/test masks. Edges are stored (u < v), sorted, deduplicated, with
/// no self-loops. Labels cover 0..num_classes-1 with every class present.
struct DatasetBundle {
    FeatureMatrix features;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> labels;
    std::vector<std::uint8_t> train_mask, val_mask, test_mask;
    int num_classes = 0;
    std::size_t dangling_edges = 0;  // citation links with an unknown endpoint, skipped

    std::size_t nodes() const { return labels.size(); }
    void validate() const;
};

/// Planted-partition graph with class-mean features.
struct SbmSpec {
    int nodes = 300;
    int classes = 3;
    double p_in = 0.1;
    double p_out = 0.01;
    int feature_dim = 16;
    // Default separation/noise keeps a features-only classifier around 0.75
    // test accuracy, matching the raw-feature skill of real citation graphs;
    // hop-0 evidence is then informative rather than adversarial.
    double separation = 2.0;
    double noise = 1.0;
    int train_per_class = 20;
    int val_per_class = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Loads the whitespace-delimited citation format: each .content line is
/// "<id> <feat...> <label>", each .cites line "<citing> <cited>". String
/// labels are factorized in alphabetical order. Links touching unknown ids
/// are counted in dangling_edges and skipped; self-citations are dropped.
/// Without an explicit split file, the convention is: first 20 labeled nodes
/// per class -> train, the next 500 nodes -> val, the last 1000 nodes -> test.
DatasetBundle load_citation_raw(const std::string& content_path, const std::string& cites_path,
                                const std::string& split_path = {});

/// Loads the generic container: features.csv (one comma-separated row per
/// node), edges.tsv (two tab-separated endpoints per line), labels.csv (one
/// integer per node), and a splits file of "<split> <a>-<b>[,<ranges>]" lines.
DatasetBundle load_generic(const std::string& features_csv, const std::string& edges_tsv,
                           const std::string& labels_csv, const std::string& splits_path);

/// Writes the canonical generic container; load_generic(save_generic(x)) is
/// byte-stable (doubles serialize with 17 significant digits).
void save_generic(const DatasetBundle& bundle, const std::string& features_csv,
                  const std::string& edges_tsv, const std::string& labels_csv,
                  const std::string& splits_path);

/// Seeded stochastic block model: contiguous balanced blocks, Bernoulli(p_in)
/// edges within a block and Bernoulli(p_out) across, features drawn as
/// class mean + noise * N(0,1). Splits take the first train_per_class then
/// val_per_class nodes of each block; the remainder is test.
DatasetBundle generate_sbm(const SbmSpec& spec);

/// X + eta * N(0,1) elementwise, seeded; eta = 0 returns the input unchanged.
FeatureMatrix inject_ood_noise(const FeatureMatrix& features, double eta, std::uint64_t seed);

/// In-place L1 row normalization; all-zero rows are left untouched.
void row_normalize(FeatureMatrix& features);

}  // namespace efgnn
