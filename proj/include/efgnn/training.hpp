#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "efgnn/data.hpp"
#include "efgnn/evidence_model.hpp"

namespace efgnn {

/// Raised when a run diverges (non-finite loss or parameters).
struct TrainingError : std::runtime_error {
    int epoch;

    TrainingError(const std::string& message, int at_epoch)
        : std::runtime_error(message + " at epoch " + std::to_string(at_epoch)),
          epoch(at_epoch) {}
};

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    int hidden_size = 64;
    double dropout_rate = 0.2;
    double perturb_sigma = 0.3;
    int propagation_steps = 8;  // T
    bool include_hop0 = true;
    std::vector<int> hop_set;  // empty: {0..T} or {1..T} depending on include_hop0
    double lambda_kl = 0.05;
    double lambda_dis = 0.3;
    int max_epochs = 1000;
    int patience = 100;
    std::uint64_t seed = 0;

    /// The hop indices actually fused: the explicit hop_set when given,
    /// otherwise every hop up to T (with or without hop 0).
    std::vector<int> effective_hop_set() const;
    void validate() const;
};

/// Ordered key/value view of a config; also the config-file schema.
std::vector<std::pair<std::string, std::string>> config_items(const TrainConfig& config);

/// FNV-1a hash (16 hex digits) of the canonical key/value serialization.
std::string config_hash(const TrainConfig& config);

/// Reads a "key = value" config file ('#' comments allowed). Unknown keys and
/// malformed values are input errors.
TrainConfig parse_config_file(const std::string& path);
void write_config_file(const TrainConfig& config, const std::string& path);

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_mean_uncertainty = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;  // -1 when no epoch ran
    std::uint64_t propagation_runs = 0;
};

/// Checkpoint-level artifact: the head weights plus the hop set they serve.
struct TrainedModel {
    ModelParams params;
    std::vector<int> hops;
    std::string config_hash;
};

struct TrainResult {
    TrainedModel model;
    TrainHistory history;
};

/// Full training run: normalize the adjacency, propagate once, then per epoch
/// perturb -> forward -> fuse -> loss on the train mask -> backward -> Adam.
/// Early-stops when validation loss fails to improve for `patience` epochs
/// (accuracy breaks loss ties) and returns the best-validation-epoch
/// parameters. Identical config + seed gives a bit-identical result.
TrainResult train(const DatasetBundle& dataset, const TrainConfig& config);

/// First-moment/second-moment state, flattened over (w1, b1, w2, b2).
struct AdamState {
    std::vector<double> m, v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update with decoupled multiplicative weight decay:
/// p *= (1 - lr * decay) before the moment step.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double learning_rate, double weight_decay, double beta1 = 0.9,
               double beta2 = 0.999, double epsilon = 1e-8);

struct EvalResult {
    double accuracy = 0.0;  // NaN when the mask is empty
    std::size_t evaluated = 0;
    double mean_uncertainty = 0.0;      // over the mask; NaN when empty
    std::vector<int> predictions;       // all nodes; argmax expected probability,
                                        // ties resolved to the lowest class index
    std::vector<double> uncertainty;    // all nodes
    FeatureMatrix probabilities;        // n x K expected probabilities
};

/// Deterministic eval-mode pass over the whole graph; accuracy and mean
/// uncertainty are reduced over `mask`.
EvalResult evaluate(const TrainedModel& model, const DatasetBundle& dataset,
                    const std::vector<std::uint8_t>& mask);

/// Same, reusing already-propagated features.
EvalResult evaluate_propagated(const TrainedModel& model, const PropagatedFeatures& features,
                               const std::vector<int>& labels,
                               const std::vector<std::uint8_t>& mask);

/// Propagated features for a model's hop set (hop-0-only models skip the
/// adjacency work entirely).
PropagatedFeatures propagate_for(const std::vector<int>& hops, const DatasetBundle& dataset);

/// Exhaustive hyperparameter sweep. Empty axes fall back to the base value.
struct SearchSpace {
    TrainConfig base;
    std::vector<double> learning_rates;
    std::vector<double> weight_decays;
    std::vector<int> hidden_sizes;
    std::vector<double> dropout_rates;
    std::vector<double> perturb_sigmas;
    std::vector<int> propagation_steps;
    std::vector<double> lambda_kls;
    std::vector<double> lambda_dises;
};

struct GridCell {
    TrainConfig config;  // seed = base seed; trials run seeds seed..seed+trials-1
    double mean_val_accuracy = 0.0;
    double mean_val_loss = 0.0;
    double mean_test_accuracy = 0.0;
    int trials = 0;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t best_index = 0;  // highest val accuracy, loss then order break ties
};

GridResult grid_search(const DatasetBundle& dataset, const SearchSpace& space,
                       int trials_per_config);

}  // namespace efgnn
