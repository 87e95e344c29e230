#include "efgnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "efgnn/text.hpp"

namespace efgnn {

std::vector<int> TrainConfig::effective_hop_set() const {
    if (!hop_set.empty()) return hop_set;
    std::vector<int> hops;
    for (int l = include_hop0 ? 0 : 1; l <= propagation_steps; ++l) hops.push_back(l);
    return hops;
}

void TrainConfig::validate() const {
    // learning_rate 0 is a legal degenerate (frozen parameters); negatives are not.
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("config: learning_rate must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw std::invalid_argument("config: weight_decay must be finite and >= 0");
    if (hidden_size < 1) throw std::invalid_argument("config: hidden_size must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("config: dropout_rate must lie in [0, 1)");
    if (!(perturb_sigma >= 0.0 && perturb_sigma < 1.0))
        throw std::invalid_argument("config: perturb_sigma must lie in [0, 1)");
    if (propagation_steps < 1)
        throw std::invalid_argument("config: propagation_steps must be >= 1");
    if (!(lambda_kl >= 0.0) || !std::isfinite(lambda_kl) || !(lambda_dis >= 0.0) ||
        !std::isfinite(lambda_dis))
        throw std::invalid_argument("config: loss weights must be finite and >= 0");
    if (max_epochs < 0) throw std::invalid_argument("config: max_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("config: patience must be >= 1");
    for (int hop : hop_set) {
        if (hop < 0 || hop > propagation_steps)
            throw std::invalid_argument("config: hop_set entry " + std::to_string(hop) +
                                        " outside [0, propagation_steps]");
    }
    std::vector<int> sorted = hop_set;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("config: hop_set entries must be unique");
}

namespace {

std::string format_hop_set(const std::vector<int>& hops) {
    std::string out;
    for (int h : hops) {
        if (!out.empty()) out += ',';
        out += std::to_string(h);
    }
    return out;
}

std::vector<int> parse_hop_set(const std::string& text) {
    std::vector<int> hops;
    if (trim(text).empty()) return hops;
    for (const std::string& tok : split_char(text, ',')) {
        auto v = parse_integer(trim(tok));
        if (!v) throw std::invalid_argument("config: bad hop_set entry '" + tok + "'");
        hops.push_back(static_cast<int>(*v));
    }
    return hops;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_items(const TrainConfig& c) {
    return {
        {"learning_rate", format_double(c.learning_rate)},
        {"weight_decay", format_double(c.weight_decay)},
        {"hidden_size", std::to_string(c.hidden_size)},
        {"dropout_rate", format_double(c.dropout_rate)},
        {"perturb_sigma", format_double(c.perturb_sigma)},
        {"propagation_steps", std::to_string(c.propagation_steps)},
        {"include_hop0", c.include_hop0 ? "true" : "false"},
        {"hop_set", format_hop_set(c.hop_set)},
        {"lambda_kl", format_double(c.lambda_kl)},
        {"lambda_dis", format_double(c.lambda_dis)},
        {"max_epochs", std::to_string(c.max_epochs)},
        {"patience", std::to_string(c.patience)},
        {"seed", std::to_string(c.seed)},
    };
}

std::string config_hash(const TrainConfig& config) { return fnv1a_hex(config_items(config)); }

TrainConfig parse_config_file(const std::string& path) {
    TrainConfig config;
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string line = trim(lines[li]);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ": expected 'key = value'", li + 1);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto real = [&]() {
            auto v = parse_real(value);
            if (!v) throw ParseError(path + ": bad number '" + value + "'", li + 1);
            return *v;
        };
        auto integer = [&]() {
            auto v = parse_integer(value);
            if (!v) throw ParseError(path + ": bad integer '" + value + "'", li + 1);
            return *v;
        };
        if (key == "learning_rate") config.learning_rate = real();
        else if (key == "weight_decay") config.weight_decay = real();
        else if (key == "hidden_size") config.hidden_size = static_cast<int>(integer());
        else if (key == "dropout_rate") config.dropout_rate = real();
        else if (key == "perturb_sigma") config.perturb_sigma = real();
        else if (key == "propagation_steps") config.propagation_steps = static_cast<int>(integer());
        else if (key == "include_hop0") {
            if (value == "true" || value == "1") config.include_hop0 = true;
            else if (value == "false" || value == "0") config.include_hop0 = false;
            else throw ParseError(path + ": bad flag '" + value + "'", li + 1);
        } else if (key == "hop_set") config.hop_set = parse_hop_set(value);
        else if (key == "lambda_kl") config.lambda_kl = real();
        else if (key == "lambda_dis") config.lambda_dis = real();
        else if (key == "max_epochs") config.max_epochs = static_cast<int>(integer());
        else if (key == "patience") config.patience = static_cast<int>(integer());
        else if (key == "seed") config.seed = static_cast<std::uint64_t>(integer());
        else throw ParseError(path + ": unknown key '" + key + "'", li + 1);
    }
    return config;
}

void write_config_file(const TrainConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [key, value] : config_items(config)) out << key << " = " << value << '\n';
}

namespace {

std::vector<std::size_t> mask_rows(const std::vector<std::uint8_t>& mask) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) rows.push_back(i);
    }
    return rows;
}

struct SplitMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double mean_uncertainty = 0.0;
};

SplitMetrics split_metrics(const FusedOutput& fused, const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& mask, const LossWeights& weights) {
    SplitMetrics m;
    m.loss = loss_total(fused, labels, mask, weights);
    std::size_t count = 0, hits = 0;
    double u_sum = 0.0;
    for (std::size_t i = 0; i < fused.nodes; ++i) {
        if (!mask[i]) continue;
        ++count;
        u_sum += fused.uncertainty[i];
        const double* arow = fused.alpha.row(i);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < fused.classes; ++c) {
            if (arow[c] > arow[arg]) arg = c;  // ties keep the lowest index
        }
        if (static_cast<int>(arg) == labels[i]) ++hits;
    }
    m.accuracy = count ? static_cast<double>(hits) / static_cast<double>(count)
                       : std::numeric_limits<double>::quiet_NaN();
    m.mean_uncertainty = count ? u_sum / static_cast<double>(count)
                               : std::numeric_limits<double>::quiet_NaN();
    return m;
}

// An overflowing forward (inf or NaN evidence) is a divergence, not an input
// error; surface it as such before the loss validators see the wreckage.
void require_finite_evidence(const HopEvidenceSet& evidence, int epoch) {
    for (const FeatureMatrix& hop : evidence.evidence) {
        for (double v : hop.data) {
            if (!std::isfinite(v)) throw TrainingError("non-finite evidence", epoch);
        }
    }
}

}  // namespace

PropagatedFeatures propagate_for(const std::vector<int>& hops, const DatasetBundle& dataset) {
    if (hops.empty()) throw std::invalid_argument("propagate_for: empty hop set");
    const int max_hop = *std::max_element(hops.begin(), hops.end());
    if (max_hop == 0) {
        PropagatedFeatures features;
        features.hops.push_back(dataset.features);
        return features;
    }
    const SparseAdjacency adj = normalize_adjacency(dataset.edges, dataset.nodes());
    return propagate(adj, dataset.features, max_hop);
}

TrainResult train(const DatasetBundle& dataset, const TrainConfig& config) {
    config.validate();
    dataset.validate();
    const std::vector<std::size_t> train_rows = mask_rows(dataset.train_mask);
    const std::vector<std::size_t> val_rows = mask_rows(dataset.val_mask);
    if (train_rows.empty()) throw std::invalid_argument("train: empty train mask");
    if (val_rows.empty()) throw std::invalid_argument("train: empty validation mask");

    const std::vector<int> hops = config.effective_hop_set();
    const int max_hop = *std::max_element(hops.begin(), hops.end());
    if (max_hop > config.propagation_steps)
        throw std::invalid_argument("train: hop set exceeds propagation_steps");

    TrainResult result;
    const std::uint64_t calls_before = propagate_call_count();
    PropagatedFeatures features;
    {
        const SparseAdjacency adj = normalize_adjacency(dataset.edges, dataset.nodes());
        // The full training loop reads these precomputed hops; propagation
        // must not run again until the next train() call.
        features = propagate(adj, dataset.features, config.propagation_steps);
    }
    result.history.propagation_runs = propagate_call_count() - calls_before;

    Rng init_rng(derive_seed(config.seed, Stream::init));
    ModelParams params = ModelParams::glorot(dataset.features.cols,
                                             static_cast<std::size_t>(config.hidden_size),
                                             static_cast<std::size_t>(dataset.num_classes),
                                             init_rng);
    const LossWeights weights{config.lambda_kl, config.lambda_dis};
    AdamState adam;

    ModelParams best_params = params;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_accuracy = -1.0;
    int best_epoch = -1;
    int stall = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        ForwardOptions opts;
        opts.train_mode = true;
        opts.perturb_sigma = config.perturb_sigma;
        opts.dropout_rate = config.dropout_rate;
        opts.mask_seed = config.seed;
        opts.epoch = static_cast<std::uint64_t>(epoch);
        ForwardTrace trace;
        const HopEvidenceSet train_evidence =
            forward_evidence(params, features, hops, opts, &trace, &train_rows);
        require_finite_evidence(train_evidence, epoch);
        const FusedOutput train_fused = fuse_forward(train_evidence);
        const Gradients grads = backward(params, trace, train_evidence, train_fused,
                                         dataset.labels, dataset.train_mask, weights);
        if (!std::isfinite(grads.loss)) throw TrainingError("non-finite training loss", epoch);
        adam_step(params, grads, adam, config.learning_rate, config.weight_decay);
        if (!params.all_finite()) throw TrainingError("non-finite parameters", epoch);

        const HopEvidenceSet val_evidence =
            forward_evidence(params, features, hops, ForwardOptions{}, nullptr, &val_rows);
        require_finite_evidence(val_evidence, epoch);
        const FusedOutput val_fused = fuse_forward(val_evidence);
        const SplitMetrics val = split_metrics(val_fused, dataset.labels, dataset.val_mask,
                                               weights);
        result.history.epochs.push_back(
            {grads.loss, val.loss, val.accuracy, val.mean_uncertainty});

        if (val.loss < best_loss) {
            best_loss = val.loss;
            best_accuracy = val.accuracy;
            best_params = params;
            best_epoch = epoch;
            stall = 0;
        } else {
            if (val.loss == best_loss && val.accuracy > best_accuracy) {
                best_accuracy = val.accuracy;
                best_params = params;
                best_epoch = epoch;
            }
            if (++stall >= config.patience) break;
        }
    }

    result.history.best_epoch = best_epoch;
    result.model.params = best_epoch >= 0 ? best_params : params;
    result.model.hops = hops;
    result.model.config_hash = config_hash(config);
    return result;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double learning_rate, double weight_decay, double beta1, double beta2,
               double epsilon) {
    const std::size_t total = params.parameter_count();
    if (state.m.empty()) {
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    }
    if (state.m.size() != total)
        throw std::invalid_argument("adam_step: state size does not match parameters");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    const double decay = 1.0 - learning_rate * weight_decay;

    std::size_t offset = 0;
    const std::pair<std::vector<double>*, const std::vector<double>*> tensors[] = {
        {&params.w1, &grads.w1}, {&params.b1, &grads.b1}, {&params.w2, &grads.w2},
        {&params.b2, &grads.b2}};
    for (const auto& [values, gradient] : tensors) {
        if (values->size() != gradient->size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < values->size(); ++i) {
            const double g = (*gradient)[i];
            double& m = state.m[offset + i];
            double& v = state.v[offset + i];
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            double& p = (*values)[i];
            p *= decay;
            p -= learning_rate * (m / bc1) / (std::sqrt(v / bc2) + epsilon);
        }
        offset += values->size();
    }
}

EvalResult evaluate_propagated(const TrainedModel& model, const PropagatedFeatures& features,
                               const std::vector<int>& labels,
                               const std::vector<std::uint8_t>& mask) {
    const HopEvidenceSet evidence =
        forward_evidence(model.params, features, model.hops, ForwardOptions{});
    const FusedOutput fused = fuse_forward(evidence);

    EvalResult result;
    result.predictions.resize(fused.nodes);
    result.uncertainty = fused.uncertainty;
    result.probabilities = FeatureMatrix(fused.nodes, fused.classes);
    for (std::size_t i = 0; i < fused.nodes; ++i) {
        const double* arow = fused.alpha.row(i);
        double* prow = result.probabilities.row(i);
        std::size_t arg = 0;
        for (std::size_t c = 0; c < fused.classes; ++c) {
            prow[c] = arow[c] / fused.strength[i];
            if (c > 0 && arow[c] > arow[arg]) arg = c;
        }
        result.predictions[i] = static_cast<int>(arg);
    }

    std::size_t count = 0, hits = 0;
    double u_sum = 0.0;
    for (std::size_t i = 0; i < fused.nodes; ++i) {
        if (!mask[i]) continue;
        ++count;
        u_sum += fused.uncertainty[i];
        if (result.predictions[i] == labels[i]) ++hits;
    }
    result.evaluated = count;
    result.accuracy = count ? static_cast<double>(hits) / static_cast<double>(count)
                            : std::numeric_limits<double>::quiet_NaN();
    result.mean_uncertainty = count ? u_sum / static_cast<double>(count)
                                    : std::numeric_limits<double>::quiet_NaN();
    return result;
}

EvalResult evaluate(const TrainedModel& model, const DatasetBundle& dataset,
                    const std::vector<std::uint8_t>& mask) {
    dataset.validate();
    if (mask.size() != dataset.nodes())
        throw std::invalid_argument("evaluate: mask size mismatch");
    const PropagatedFeatures features = propagate_for(model.hops, dataset);
    return evaluate_propagated(model, features, dataset.labels, mask);
}

GridResult grid_search(const DatasetBundle& dataset, const SearchSpace& space,
                       int trials_per_config) {
    if (trials_per_config < 1)
        throw std::invalid_argument("grid_search: trials_per_config must be >= 1");
    space.base.validate();

    auto axis_or = [](const std::vector<double>& axis, double fallback) {
        return axis.empty() ? std::vector<double>{fallback} : axis;
    };
    auto iaxis_or = [](const std::vector<int>& axis, int fallback) {
        return axis.empty() ? std::vector<int>{fallback} : axis;
    };
    const std::vector<double> lrs = axis_or(space.learning_rates, space.base.learning_rate);
    const std::vector<double> wds = axis_or(space.weight_decays, space.base.weight_decay);
    const std::vector<int> hiddens = iaxis_or(space.hidden_sizes, space.base.hidden_size);
    const std::vector<double> drops = axis_or(space.dropout_rates, space.base.dropout_rate);
    const std::vector<double> sigmas = axis_or(space.perturb_sigmas, space.base.perturb_sigma);
    const std::vector<int> steps = iaxis_or(space.propagation_steps,
                                            space.base.propagation_steps);
    const std::vector<double> kls = axis_or(space.lambda_kls, space.base.lambda_kl);
    const std::vector<double> diss = axis_or(space.lambda_dises, space.base.lambda_dis);

    GridResult result;
    for (double lr : lrs)
        for (double wd : wds)
            for (int hidden : hiddens)
                for (double drop : drops)
                    for (double sigma : sigmas)
                        for (int t : steps)
                            for (double kl : kls)
                                for (double dis : diss) {
                                    GridCell cell;
                                    cell.config = space.base;
                                    cell.config.learning_rate = lr;
                                    cell.config.weight_decay = wd;
                                    cell.config.hidden_size = hidden;
                                    cell.config.dropout_rate = drop;
                                    cell.config.perturb_sigma = sigma;
                                    cell.config.propagation_steps = t;
                                    cell.config.lambda_kl = kl;
                                    cell.config.lambda_dis = dis;
                                    cell.trials = trials_per_config;

                                    double acc = 0.0, loss = 0.0, test = 0.0;
                                    for (int trial = 0; trial < trials_per_config; ++trial) {
                                        TrainConfig run = cell.config;
                                        run.seed = space.base.seed +
                                                   static_cast<std::uint64_t>(trial);
                                        const TrainResult trained = train(dataset, run);
                                        const int best = trained.history.best_epoch;
                                        if (best >= 0) {
                                            const EpochRecord& rec =
                                                trained.history.epochs[static_cast<std::size_t>(
                                                    best)];
                                            acc += rec.val_accuracy;
                                            loss += rec.val_loss;
                                        }
                                        test += evaluate(trained.model, dataset,
                                                         dataset.test_mask)
                                                    .accuracy;
                                    }
                                    const double inv = 1.0 / trials_per_config;
                                    cell.mean_val_accuracy = acc * inv;
                                    cell.mean_val_loss = loss * inv;
                                    cell.mean_test_accuracy = test * inv;
                                    result.cells.push_back(std::move(cell));
                                }

    for (std::size_t i = 1; i < result.cells.size(); ++i) {
        const GridCell& cand = result.cells[i];
        const GridCell& best = result.cells[result.best_index];
        if (cand.mean_val_accuracy > best.mean_val_accuracy ||
            (cand.mean_val_accuracy == best.mean_val_accuracy &&
             cand.mean_val_loss < best.mean_val_loss))
            result.best_index = i;
    }
    return result;
}

}  // namespace efgnn
