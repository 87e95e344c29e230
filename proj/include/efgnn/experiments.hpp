#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "efgnn/data.hpp"
#include "efgnn/report.hpp"
#include "efgnn/training.hpp"

namespace efgnn {

/// Histogram resolution shared by the density-style reports.
inline constexpr std::size_t kDensityBins = 20;

/// Thresholds 0.05, 0.10, ..., 1.00.
std::vector<double> default_threshold_grid();

struct TrainRunResult {
    TrainResult outcome;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double test_mean_uncertainty = 0.0;
    ReportRecord report;
};

/// Trains on the bundle and produces the history + final-metrics report.
TrainRunResult run_train(const DatasetBundle& dataset, const TrainConfig& config);

struct UncertaintyCurvePoint {
    double threshold = 0.0;
    std::size_t retained = 0;
    double retained_fraction = 0.0;
    double accuracy = 0.0;  // NaN when retained == 0
};

struct UncertaintyCurveResult {
    std::vector<UncertaintyCurvePoint> points;  // ascending by threshold
    ReportRecord report;
};

/// Accuracy over test nodes whose fused uncertainty is at most tau, for each
/// threshold. Thresholds must lie in (0, 1]; they are reported sorted.
UncertaintyCurveResult run_uncertainty_curve(const TrainedModel& model,
                                             const DatasetBundle& dataset,
                                             std::vector<double> thresholds);

struct OodResult {
    double mean_clean = 0.0;
    double mean_polluted = 0.0;
    std::vector<std::size_t> clean_bins;     // kDensityBins counts over test nodes
    std::vector<std::size_t> polluted_bins;  // same binning, polluted features
    ReportRecord report;
};

/// Compares fused uncertainty on clean test features against features
/// polluted with scaled Gaussian noise before propagation.
OodResult run_ood_compare(const TrainedModel& model, const DatasetBundle& dataset, double eta,
                          std::uint64_t seed);

struct HopAblationResult {
    double fused_accuracy = 0.0;
    std::vector<double> single_hop_accuracy;  // index = hop, 0..propagation_steps
    ReportRecord report;                      // exactly propagation_steps + 2 rows
};

/// Trains the full-fusion model plus every single-hop restriction {0}..{T}
/// and reports one test-accuracy row each.
HopAblationResult run_hop_ablation(const DatasetBundle& dataset, const TrainConfig& config);

struct StdDensityResult {
    double fused_mean_std = 0.0;
    std::vector<std::pair<int, double>> mean_std_by_depth;
    ReportRecord report;
};

/// Class-probability spread analysis: the fused model's per-node standard
/// deviation of the expected class-probability vector, the same statistic for
/// each depth-restricted variant, binned densities for all of them, and
/// per-class per-hop true-class-probability means from the fused model.
StdDensityResult run_std_density(const DatasetBundle& dataset, const TrainConfig& config,
                                 const std::vector<int>& depths);

struct GridRunResult {
    GridResult grid;
    ReportRecord report;
};

/// Exhaustive sweep over the search space; the report carries per-cell metric
/// rows plus a lambda heat-map row for every (lambda_kl, lambda_dis) pair.
GridRunResult run_grid(const DatasetBundle& dataset, const SearchSpace& space,
                       int trials_per_config);

/// Wide one-row-per-cell table of the sweep (hyperparameters + metrics),
/// deterministic and timestamp-free.
std::string render_grid_table(const GridResult& grid);

}  // namespace efgnn
