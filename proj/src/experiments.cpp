#include "efgnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "efgnn/evidence_model.hpp"
#include "efgnn/text.hpp"

namespace efgnn {

namespace {

// Sweep coordinates are labels rather than data; six significant digits keep
// them readable while staying deterministic.
std::string format_coord(double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

struct MaskedStats {
    std::size_t count = 0;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_uncertainty = std::numeric_limits<double>::quiet_NaN();
};

MaskedStats masked_stats(const EvalResult& eval, const std::vector<int>& labels,
                         const std::vector<std::uint8_t>& mask) {
    MaskedStats stats;
    std::size_t hits = 0;
    double u_sum = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++stats.count;
        u_sum += eval.uncertainty[i];
        if (eval.predictions[i] == labels[i]) ++hits;
    }
    if (stats.count) {
        stats.accuracy = static_cast<double>(hits) / static_cast<double>(stats.count);
        stats.mean_uncertainty = u_sum / static_cast<double>(stats.count);
    }
    return stats;
}

std::vector<std::size_t> bin_unit_interval(const std::vector<double>& values,
                                           const std::vector<std::uint8_t>& mask) {
    std::vector<std::size_t> bins(kDensityBins, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!mask[i]) continue;
        const double v = std::clamp(values[i], 0.0, 1.0);
        std::size_t b = static_cast<std::size_t>(v * static_cast<double>(kDensityBins));
        if (b >= kDensityBins) b = kDensityBins - 1;
        ++bins[b];
    }
    return bins;
}

void add_density_rows(ReportRecord& report, const char* name, const std::string& split,
                      const std::vector<std::size_t>& bins) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
        const double center = (static_cast<double>(b) + 0.5) / static_cast<double>(bins.size());
        report.add(name, split, format_coord(center), static_cast<double>(bins[b]));
    }
}

// Population standard deviation of one expected-probability vector. The mass
// must already sum to one; a violation indicates broken fusion upstream.
double probability_std(const double* p, std::size_t k) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += p[c];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::logic_error("probability vector does not sum to 1");
    const double mean = sum / static_cast<double>(k);
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double d = p[c] - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(k));
}

std::vector<std::uint8_t> all_mask(std::size_t n) { return std::vector<std::uint8_t>(n, 1); }

}  // namespace

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= static_cast<int>(kDensityBins); ++i)
        grid.push_back(static_cast<double>(i) / static_cast<double>(kDensityBins));
    return grid;
}

TrainRunResult run_train(const DatasetBundle& dataset, const TrainConfig& config) {
    TrainRunResult result;
    result.outcome = train(dataset, config);
    const TrainedModel& model = result.outcome.model;

    const PropagatedFeatures features = propagate_for(model.hops, dataset);
    const EvalResult eval =
        evaluate_propagated(model, features, dataset.labels, all_mask(dataset.nodes()));
    const MaskedStats train_stats = masked_stats(eval, dataset.labels, dataset.train_mask);
    const MaskedStats val_stats = masked_stats(eval, dataset.labels, dataset.val_mask);
    const MaskedStats test_stats = masked_stats(eval, dataset.labels, dataset.test_mask);
    result.train_accuracy = train_stats.accuracy;
    result.val_accuracy = val_stats.accuracy;
    result.test_accuracy = test_stats.accuracy;
    result.test_mean_uncertainty = test_stats.mean_uncertainty;

    ReportRecord& report = result.report;
    report.experiment = "train";
    report.config_hash = model.config_hash;
    report.config_snapshot = config_items(config);
    const TrainHistory& history = result.outcome.history;
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const EpochRecord& rec = history.epochs[e];
        const std::string coord = std::to_string(e);
        report.add("train_loss", "train", coord, rec.train_loss);
        report.add("val_loss", "val", coord, rec.val_loss);
        report.add("val_accuracy", "val", coord, rec.val_accuracy);
        report.add("val_mean_uncertainty", "val", coord, rec.val_mean_uncertainty);
    }
    report.add("best_epoch", "", "", static_cast<double>(history.best_epoch));
    report.add("epochs_run", "", "", static_cast<double>(history.epochs.size()));
    report.add("propagation_runs", "", "", static_cast<double>(history.propagation_runs));
    report.add("accuracy", "train", "", train_stats.accuracy);
    report.add("accuracy", "val", "", val_stats.accuracy);
    report.add("accuracy", "test", "", test_stats.accuracy);
    report.add("mean_uncertainty", "train", "", train_stats.mean_uncertainty);
    report.add("mean_uncertainty", "val", "", val_stats.mean_uncertainty);
    report.add("mean_uncertainty", "test", "", test_stats.mean_uncertainty);
    return result;
}

UncertaintyCurveResult run_uncertainty_curve(const TrainedModel& model,
                                             const DatasetBundle& dataset,
                                             std::vector<double> thresholds) {
    if (thresholds.empty())
        throw std::invalid_argument("uncertainty-curve: empty threshold list");
    for (double tau : thresholds) {
        if (!(tau > 0.0 && tau <= 1.0))
            throw std::invalid_argument("uncertainty-curve: threshold " + format_double(tau) +
                                        " outside (0, 1]");
    }
    std::sort(thresholds.begin(), thresholds.end());

    const EvalResult eval = evaluate(model, dataset, dataset.test_mask);
    std::size_t test_count = 0;
    for (std::uint8_t m : dataset.test_mask) test_count += m;
    if (test_count == 0) throw std::invalid_argument("uncertainty-curve: empty test split");

    UncertaintyCurveResult result;
    result.report.experiment = "uncertainty-curve";
    result.report.config_hash = model.config_hash;
    result.report.config_snapshot = {{"thresholds", std::to_string(thresholds.size())}};
    for (double tau : thresholds) {
        UncertaintyCurvePoint point;
        point.threshold = tau;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < dataset.nodes(); ++i) {
            if (!dataset.test_mask[i] || eval.uncertainty[i] > tau) continue;
            ++point.retained;
            if (eval.predictions[i] == dataset.labels[i]) ++hits;
        }
        point.retained_fraction =
            static_cast<double>(point.retained) / static_cast<double>(test_count);
        point.accuracy = point.retained
                             ? static_cast<double>(hits) / static_cast<double>(point.retained)
                             : std::numeric_limits<double>::quiet_NaN();
        const std::string coord = format_coord(tau);
        result.report.add("accuracy", "test", coord, point.accuracy);
        result.report.add("retained_fraction", "test", coord, point.retained_fraction);
        result.points.push_back(point);
    }
    return result;
}

OodResult run_ood_compare(const TrainedModel& model, const DatasetBundle& dataset, double eta,
                          std::uint64_t seed) {
    const EvalResult clean = evaluate(model, dataset, dataset.test_mask);

    DatasetBundle polluted = dataset;
    polluted.features = inject_ood_noise(dataset.features, eta, seed);
    const EvalResult noisy = evaluate(model, polluted, polluted.test_mask);

    OodResult result;
    result.mean_clean = clean.mean_uncertainty;
    result.mean_polluted = noisy.mean_uncertainty;
    result.clean_bins = bin_unit_interval(clean.uncertainty, dataset.test_mask);
    result.polluted_bins = bin_unit_interval(noisy.uncertainty, dataset.test_mask);

    result.report.experiment = "ood-compare";
    result.report.config_hash = model.config_hash;
    result.report.config_snapshot = {{"eta", format_double(eta)},
                                     {"noise_seed", std::to_string(seed)}};
    result.report.add("mean_uncertainty", "clean", "", result.mean_clean);
    result.report.add("mean_uncertainty", "polluted", "", result.mean_polluted);
    result.report.add("mean_uncertainty_delta", "", "",
                      result.mean_polluted - result.mean_clean);
    add_density_rows(result.report, "uncertainty_density_count", "clean", result.clean_bins);
    add_density_rows(result.report, "uncertainty_density_count", "polluted",
                     result.polluted_bins);
    return result;
}

HopAblationResult run_hop_ablation(const DatasetBundle& dataset, const TrainConfig& config) {
    config.validate();
    HopAblationResult result;
    result.report.experiment = "hop-ablation";
    result.report.config_hash = config_hash(config);
    result.report.config_snapshot = config_items(config);

    {
        const TrainResult fused = train(dataset, config);
        result.fused_accuracy = evaluate(fused.model, dataset, dataset.test_mask).accuracy;
    }
    for (int hop = 0; hop <= config.propagation_steps; ++hop) {
        TrainConfig variant = config;
        variant.hop_set = {hop};
        const TrainResult single = train(dataset, variant);
        const double accuracy = evaluate(single.model, dataset, dataset.test_mask).accuracy;
        result.single_hop_accuracy.push_back(accuracy);
        result.report.add("test_accuracy", "test", "hop-" + std::to_string(hop), accuracy);
    }
    result.report.add("test_accuracy", "test", "fused", result.fused_accuracy);
    return result;
}

StdDensityResult run_std_density(const DatasetBundle& dataset, const TrainConfig& config,
                                 const std::vector<int>& depths) {
    config.validate();
    for (int depth : depths) {
        if (depth < 0) throw std::invalid_argument("std-density: negative depth");
    }

    StdDensityResult result;
    result.report.experiment = "std-density";
    result.report.config_hash = config_hash(config);
    result.report.config_snapshot = config_items(config);

    auto std_rows = [&](const FusedOutput& fused, const std::string& split) {
        std::vector<double> stds(fused.nodes);
        std::vector<double> p(fused.classes);
        double total = 0.0;
        for (std::size_t i = 0; i < fused.nodes; ++i) {
            const double* arow = fused.alpha.row(i);
            for (std::size_t c = 0; c < fused.classes; ++c) p[c] = arow[c] / fused.strength[i];
            stds[i] = probability_std(p.data(), fused.classes);
            total += stds[i];
        }
        const double mean = total / static_cast<double>(fused.nodes);
        result.report.add("mean_std", split, "", mean);
        add_density_rows(result.report, "std_density_count", split,
                         bin_unit_interval(stds, all_mask(fused.nodes)));
        return mean;
    };

    {
        const TrainResult fused_run = train(dataset, config);
        const TrainedModel& model = fused_run.model;
        const PropagatedFeatures features = propagate_for(model.hops, dataset);
        const HopEvidenceSet evidence =
            forward_evidence(model.params, features, model.hops, ForwardOptions{});
        const FusedOutput fused = fuse_forward(evidence);
        result.fused_mean_std = std_rows(fused, "fused");

        // Per-hop mean true-class probability grouped by class, from the
        // fused model's individual hop opinions.
        const std::size_t k = evidence.classes();
        for (std::size_t hi = 0; hi < evidence.hop_ids.size(); ++hi) {
            const FeatureMatrix& ev = evidence.evidence[hi];
            std::vector<double> sum(k, 0.0);
            std::vector<std::size_t> count(k, 0);
            for (std::size_t i = 0; i < ev.rows; ++i) {
                const double* erow = ev.row(i);
                double strength = 0.0;
                for (std::size_t c = 0; c < k; ++c) strength += erow[c] + 1.0;
                const int label = dataset.labels[i];
                sum[static_cast<std::size_t>(label)] +=
                    (erow[static_cast<std::size_t>(label)] + 1.0) / strength;
                ++count[static_cast<std::size_t>(label)];
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (!count[c]) continue;
                result.report.add("true_class_probability", "class-" + std::to_string(c),
                                  std::to_string(evidence.hop_ids[hi]),
                                  sum[c] / static_cast<double>(count[c]));
            }
        }
    }

    for (int depth : depths) {
        TrainConfig variant = config;
        variant.hop_set = {depth};
        variant.propagation_steps = std::max(config.propagation_steps, std::max(1, depth));
        const TrainResult run = train(dataset, variant);
        const PropagatedFeatures features = propagate_for(run.model.hops, dataset);
        const HopEvidenceSet evidence =
            forward_evidence(run.model.params, features, run.model.hops, ForwardOptions{});
        const double mean = std_rows(fuse_forward(evidence), "depth-" + std::to_string(depth));
        result.mean_std_by_depth.emplace_back(depth, mean);
    }
    return result;
}

GridRunResult run_grid(const DatasetBundle& dataset, const SearchSpace& space,
                       int trials_per_config) {
    GridRunResult result;
    result.grid = grid_search(dataset, space, trials_per_config);

    ReportRecord& report = result.report;
    report.experiment = "grid";
    report.config_hash = config_hash(space.base);
    report.config_snapshot = config_items(space.base);
    auto snapshot_axis = [&report](const char* name, const std::vector<double>& axis) {
        if (axis.empty()) return;
        std::string joined;
        for (double v : axis) {
            if (!joined.empty()) joined += ',';
            joined += format_double(v);
        }
        report.config_snapshot.emplace_back(std::string("axis.") + name, joined);
    };
    auto snapshot_iaxis = [&report](const char* name, const std::vector<int>& axis) {
        if (axis.empty()) return;
        std::string joined;
        for (int v : axis) {
            if (!joined.empty()) joined += ',';
            joined += std::to_string(v);
        }
        report.config_snapshot.emplace_back(std::string("axis.") + name, joined);
    };
    snapshot_axis("learning_rate", space.learning_rates);
    snapshot_axis("weight_decay", space.weight_decays);
    snapshot_iaxis("hidden_size", space.hidden_sizes);
    snapshot_axis("dropout_rate", space.dropout_rates);
    snapshot_axis("perturb_sigma", space.perturb_sigmas);
    snapshot_iaxis("propagation_steps", space.propagation_steps);
    snapshot_axis("lambda_kl", space.lambda_kls);
    snapshot_axis("lambda_dis", space.lambda_dises);

    for (std::size_t i = 0; i < result.grid.cells.size(); ++i) {
        const GridCell& cell = result.grid.cells[i];
        const std::string coord = "cell-" + std::to_string(i);
        report.add("mean_val_accuracy", "val", coord, cell.mean_val_accuracy);
        report.add("mean_val_loss", "val", coord, cell.mean_val_loss);
        report.add("mean_test_accuracy", "test", coord, cell.mean_test_accuracy);
    }
    report.add("best_cell", "", "", static_cast<double>(result.grid.best_index));

    const std::vector<double> kls =
        space.lambda_kls.empty() ? std::vector<double>{space.base.lambda_kl} : space.lambda_kls;
    const std::vector<double> diss = space.lambda_dises.empty()
                                         ? std::vector<double>{space.base.lambda_dis}
                                         : space.lambda_dises;
    for (double kl : kls) {
        for (double dis : diss) {
            double best = -std::numeric_limits<double>::infinity();
            for (const GridCell& cell : result.grid.cells) {
                if (cell.config.lambda_kl == kl && cell.config.lambda_dis == dis)
                    best = std::max(best, cell.mean_val_accuracy);
            }
            report.add("heatmap_val_accuracy", "val",
                       format_coord(kl) + "x" + format_coord(dis), best);
        }
    }
    return result;
}

std::string render_grid_table(const GridResult& grid) {
    std::string out;
    out += "# efgnn-grid v1\n";
    out +=
        "cell\tlearning_rate\tweight_decay\thidden_size\tdropout_rate\tperturb_sigma\t"
        "propagation_steps\tlambda_kl\tlambda_dis\ttrials\tmean_val_accuracy\tmean_val_loss\t"
        "mean_test_accuracy\tbest\tconfig_hash\n";
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const GridCell& cell = grid.cells[i];
        const TrainConfig& c = cell.config;
        out += std::to_string(i);
        out += '\t';
        out += format_double(c.learning_rate);
        out += '\t';
        out += format_double(c.weight_decay);
        out += '\t';
        out += std::to_string(c.hidden_size);
        out += '\t';
        out += format_double(c.dropout_rate);
        out += '\t';
        out += format_double(c.perturb_sigma);
        out += '\t';
        out += std::to_string(c.propagation_steps);
        out += '\t';
        out += format_double(c.lambda_kl);
        out += '\t';
        out += format_double(c.lambda_dis);
        out += '\t';
        out += std::to_string(cell.trials);
        out += '\t';
        out += format_double(cell.mean_val_accuracy);
        out += '\t';
        out += format_double(cell.mean_val_loss);
        out += '\t';
        out += format_double(cell.mean_test_accuracy);
        out += '\t';
        out += (i == grid.best_index) ? '1' : '0';
        out += '\t';
        out += config_hash(c);
        out += '\n';
    }
    return out;
}

}  // namespace efgnn
