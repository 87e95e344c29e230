#include "efgnn/evidence_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "efgnn/special_functions.hpp"

namespace efgnn {

namespace {

void check_rate(double value, const char* name) {
    if (!(value >= 0.0 && value < 1.0))
        throw std::invalid_argument(std::string(name) + " must lie in [0, 1)");
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

ModelParams::ModelParams(std::size_t d, std::size_t h, std::size_t k)
    : in_dim(d), hidden(h), classes(k), w1(d * h, 0.0), b1(h, 0.0), w2(h * k, 0.0),
      b2(k, 0.0) {
    if (d == 0 || h == 0) throw std::invalid_argument("ModelParams: empty layer");
    if (k < 2) throw std::invalid_argument("ModelParams: needs at least 2 classes");
}

ModelParams ModelParams::glorot(std::size_t d, std::size_t h, std::size_t k, Rng& rng) {
    ModelParams p(d, h, k);
    const double g1 = std::sqrt(6.0 / static_cast<double>(d + h));
    for (double& w : p.w1) w = rng.uniform(-g1, g1);
    const double g2 = std::sqrt(6.0 / static_cast<double>(h + k));
    for (double& w : p.w2) w = rng.uniform(-g2, g2);
    return p;
}

bool ModelParams::all_finite() const {
    for (const auto* t : {&w1, &b1, &w2, &b2}) {
        for (double v : *t) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

void LossWeights::validate() const {
    if (!(lambda_kl >= 0.0) || !std::isfinite(lambda_kl) || !(lambda_dis >= 0.0) ||
        !std::isfinite(lambda_dis))
        throw std::invalid_argument("LossWeights: lambdas must be finite and >= 0");
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double hidden_activation(double z) { return z > 0.0 ? z : 0.0; }

double hidden_activation_grad(double value) { return value > 0.0 ? 1.0 : 0.0; }

HopEvidenceSet forward_evidence(const ModelParams& params, const PropagatedFeatures& features,
                                const std::vector<int>& hop_set, const ForwardOptions& options,
                                ForwardTrace* trace, const std::vector<std::size_t>* rows) {
    if (features.hops.empty()) throw std::invalid_argument("forward_evidence: no hop features");
    if (hop_set.empty()) throw std::invalid_argument("forward_evidence: empty hop set");
    check_rate(options.perturb_sigma, "perturb_sigma");
    check_rate(options.dropout_rate, "dropout_rate");
    const std::size_t n = features.hops.front().rows;
    const std::size_t d = features.hops.front().cols;
    if (d != params.in_dim)
        throw std::invalid_argument("forward_evidence: feature width " + std::to_string(d) +
                                    " does not match model input " +
                                    std::to_string(params.in_dim));
    for (int hop : hop_set) {
        if (hop < 0 || static_cast<std::size_t>(hop) >= features.hops.size())
            throw std::invalid_argument("forward_evidence: hop " + std::to_string(hop) +
                                        " outside the propagated range");
    }

    const std::vector<std::size_t> computed = rows ? *rows : all_rows(n);
    for (std::size_t r : computed) {
        if (r >= n) throw std::invalid_argument("forward_evidence: row index out of range");
    }

    const std::size_t h = params.hidden;
    const std::size_t k = params.classes;
    const bool use_perturb = options.train_mode && options.perturb_sigma > 0.0;
    const bool use_dropout = options.train_mode && options.dropout_rate > 0.0;
    const double perturb_scale = 1.0 / (1.0 - options.perturb_sigma);
    const double dropout_scale = 1.0 / (1.0 - options.dropout_rate);

    HopEvidenceSet out;
    out.hop_ids = hop_set;
    out.evidence.assign(hop_set.size(), FeatureMatrix(n, k, 0.0));
    if (trace) {
        trace->options = options;
        trace->hop_ids = hop_set;
        trace->node_ids = computed;
        trace->inputs.assign(hop_set.size(), FeatureMatrix(computed.size(), d, 0.0));
        trace->hidden.assign(hop_set.size(), FeatureMatrix(computed.size(), h, 0.0));
    }

    std::vector<double> x_buf(d), z1(h), z2(k);
    for (std::size_t hi = 0; hi < hop_set.size(); ++hi) {
        const int hop = hop_set[hi];
        const FeatureMatrix& base = features.hops[static_cast<std::size_t>(hop)];
        std::vector<std::uint8_t> keep;
        if (use_perturb) {
            Rng mask_rng(derive_seed(options.mask_seed, Stream::perturb, options.epoch,
                                     static_cast<std::uint64_t>(hop)));
            keep = perturb_keep_mask(n, options.perturb_sigma, mask_rng);
        }

        FeatureMatrix& evid = out.evidence[hi];
        for (std::size_t ri = 0; ri < computed.size(); ++ri) {
            const std::size_t i = computed[ri];
            const double* x = base.row(i);
            if (use_perturb) {
                if (keep[i]) {
                    for (std::size_t f = 0; f < d; ++f) x_buf[f] = x[f] * perturb_scale;
                } else {
                    std::fill(x_buf.begin(), x_buf.end(), 0.0);
                }
                x = x_buf.data();
            }

            std::copy(params.b1.begin(), params.b1.end(), z1.begin());
            for (std::size_t f = 0; f < d; ++f) {
                const double xf = x[f];
                if (xf == 0.0) continue;
                const double* wrow = params.w1.data() + f * h;
                for (std::size_t j = 0; j < h; ++j) z1[j] += xf * wrow[j];
            }
            for (std::size_t j = 0; j < h; ++j) z1[j] = hidden_activation(z1[j]);
            if (trace) std::copy(z1.begin(), z1.end(), trace->hidden[hi].row(ri));
            if (use_dropout) {
                Rng drop_rng(derive_seed(options.mask_seed, Stream::dropout, options.epoch,
                                         static_cast<std::uint64_t>(hop), i));
                for (std::size_t j = 0; j < h; ++j)
                    z1[j] = drop_rng.bernoulli(options.dropout_rate) ? 0.0 : z1[j] * dropout_scale;
            }

            std::copy(params.b2.begin(), params.b2.end(), z2.begin());
            for (std::size_t j = 0; j < h; ++j) {
                const double aj = z1[j];
                if (aj == 0.0) continue;
                const double* wrow = params.w2.data() + j * k;
                for (std::size_t c = 0; c < k; ++c) z2[c] += aj * wrow[c];
            }
            double* erow = evid.row(i);
            for (std::size_t c = 0; c < k; ++c) erow[c] = softplus(z2[c]);

            if (trace) std::copy(x, x + d, trace->inputs[hi].row(ri));
        }
    }
    return out;
}

FusedOutput fuse_forward(const HopEvidenceSet& evidence) {
    if (evidence.evidence.empty()) throw std::invalid_argument("fuse_forward: no evidence");
    const std::size_t n = evidence.nodes();
    const std::size_t k = evidence.classes();
    if (k < 2) throw std::invalid_argument("fuse_forward: needs at least 2 classes");
    for (const FeatureMatrix& e : evidence.evidence) {
        if (e.rows != n || e.cols != k)
            throw std::invalid_argument("fuse_forward: inconsistent evidence shapes");
    }

    FusedOutput out;
    out.nodes = n;
    out.classes = k;
    out.alpha = FeatureMatrix(n, k, 1.0);
    out.strength.assign(n, 0.0);
    out.belief = FeatureMatrix(n, k, 0.0);
    out.uncertainty.assign(n, 0.0);
    for (const FeatureMatrix& e : evidence.evidence) {
        for (std::size_t i = 0; i < n * k; ++i) out.alpha.data[i] += e.data[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = out.alpha.row(i);
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += arow[c];
        out.strength[i] = s;
        double* brow = out.belief.row(i);
        for (std::size_t c = 0; c < k; ++c) brow[c] = (arow[c] - 1.0) / s;
        out.uncertainty[i] = static_cast<double>(k) / s;
    }
    return out;
}

DirichletParams FusedOutput::node_dirichlet(std::size_t i) const {
    return DirichletParams(std::vector<double>(alpha.row(i), alpha.row(i) + classes));
}

Opinion FusedOutput::node_opinion(std::size_t i) const {
    Opinion op;
    op.belief.assign(belief.row(i), belief.row(i) + classes);
    op.uncertainty = uncertainty[i];
    op.base_rate = uniform_base_rate(classes);
    return op;
}

std::vector<double> FusedOutput::node_probability(std::size_t i) const {
    std::vector<double> p(classes);
    const double* arow = alpha.row(i);
    for (std::size_t c = 0; c < classes; ++c) p[c] = arow[c] / strength[i];
    return p;
}

double loss_ece(const double* alpha, std::size_t k, int true_class) {
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= k)
        throw std::invalid_argument("loss_ece: class index out of range");
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += alpha[c];
    return digamma(s) - digamma(alpha[static_cast<std::size_t>(true_class)]);
}

double loss_ece(const DirichletParams& dir, int true_class) {
    return loss_ece(dir.alpha.data(), dir.classes(), true_class);
}

double loss_dissonance(const double* alpha, std::size_t k) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += alpha[c];
    std::vector<double> belief(k);
    for (std::size_t c = 0; c < k; ++c) belief[c] = (alpha[c] - 1.0) / s;
    return dissonance(belief);
}

double loss_dissonance(const DirichletParams& dir) {
    return loss_dissonance(dir.alpha.data(), dir.classes());
}

double loss_kl(const double* alpha, std::size_t k, int true_class) {
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= k)
        throw std::invalid_argument("loss_kl: class index out of range");
    // alpha~ = alpha with the true-class entry clamped to 1.
    double s_tilde = 0.0;
    for (std::size_t c = 0; c < k; ++c)
        s_tilde += (c == static_cast<std::size_t>(true_class)) ? 1.0 : alpha[c];
    const double kd = static_cast<double>(k);
    double value = lgamma(s_tilde) - lgamma(kd);
    const double psi_s = digamma(s_tilde);
    for (std::size_t c = 0; c < k; ++c) {
        if (c == static_cast<std::size_t>(true_class)) continue;  // entry 1 contributes nothing
        value -= lgamma(alpha[c]);
        value += (alpha[c] - 1.0) * (digamma(alpha[c]) - psi_s);
    }
    return value;
}

double loss_kl(const DirichletParams& dir, int true_class) {
    return loss_kl(dir.alpha.data(), dir.classes(), true_class);
}

double loss_total(const FusedOutput& fused, const std::vector<int>& labels,
                  const std::vector<std::uint8_t>& mask, const LossWeights& weights) {
    weights.validate();
    if (labels.size() != fused.nodes || mask.size() != fused.nodes)
        throw std::invalid_argument("loss_total: label/mask size mismatch");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < fused.nodes; ++i) {
        if (!mask[i]) continue;
        const double* arow = fused.alpha.row(i);
        const int t = labels[i];
        double node = loss_ece(arow, fused.classes, t);
        if (weights.lambda_dis != 0.0)
            node += weights.lambda_dis * loss_dissonance(arow, fused.classes);
        if (weights.lambda_kl != 0.0) node += weights.lambda_kl * loss_kl(arow, fused.classes, t);
        total += node;
        ++count;
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Gradients::Gradients(const ModelParams& params)
    : w1(params.w1.size(), 0.0), b1(params.b1.size(), 0.0), w2(params.w2.size(), 0.0),
      b2(params.b2.size(), 0.0) {}

namespace {

// d(node loss)/d(alpha) for one labeled node, written into g (length k).
void alpha_gradient(const double* alpha, std::size_t k, int true_class,
                    const LossWeights& weights, double* g) {
    const std::size_t t = static_cast<std::size_t>(true_class);
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += alpha[c];

    const double tg_s = trigamma(s);
    for (std::size_t c = 0; c < k; ++c) g[c] = tg_s;
    g[t] -= trigamma(alpha[t]);

    if (weights.lambda_dis != 0.0) {
        std::vector<double> belief(k);
        for (std::size_t c = 0; c < k; ++c) belief[c] = (alpha[c] - 1.0) / s;
        const std::vector<double> gb = dissonance_gradient(belief);
        double inner = 0.0;
        for (std::size_t c = 0; c < k; ++c) inner += gb[c] * belief[c];
        for (std::size_t c = 0; c < k; ++c)
            g[c] += weights.lambda_dis * (gb[c] - inner) / s;
    }

    if (weights.lambda_kl != 0.0) {
        const double s_tilde = s - alpha[t] + 1.0;
        const double tail = (s_tilde - static_cast<double>(k)) * trigamma(s_tilde);
        for (std::size_t c = 0; c < k; ++c) {
            if (c == t) continue;  // alpha~_t is clamped, no dependence on alpha_t
            g[c] += weights.lambda_kl * ((alpha[c] - 1.0) * trigamma(alpha[c]) - tail);
        }
    }
}

}  // namespace

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const HopEvidenceSet& evidence, const FusedOutput& fused,
                   const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                   const LossWeights& weights) {
    weights.validate();
    const std::size_t n = fused.nodes;
    const std::size_t k = fused.classes;
    const std::size_t h = params.hidden;
    const std::size_t d = params.in_dim;
    if (labels.size() != n || mask.size() != n)
        throw std::invalid_argument("backward: label/mask size mismatch");
    if (trace.hop_ids != evidence.hop_ids)
        throw std::invalid_argument("backward: trace/evidence hop sets differ");

    // Map node index -> trace row.
    std::vector<std::size_t> trace_row(n, static_cast<std::size_t>(-1));
    for (std::size_t r = 0; r < trace.node_ids.size(); ++r) trace_row[trace.node_ids[r]] = r;

    Gradients grads(params);
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i]) ++labeled;
    }
    grads.labeled = labeled;
    if (labeled == 0) return grads;
    const double inv_m = 1.0 / static_cast<double>(labeled);
    const bool use_dropout = trace.options.train_mode && trace.options.dropout_rate > 0.0;
    const double inv_keep = use_dropout ? 1.0 / (1.0 - trace.options.dropout_rate) : 1.0;

    std::vector<double> g_alpha(k), dz2(k), dz1(h);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const std::size_t r = trace_row[i];
        if (r == static_cast<std::size_t>(-1))
            throw std::invalid_argument("backward: labeled node missing from the forward trace");
        const double* arow = fused.alpha.row(i);
        const int t = labels[i];

        double node = loss_ece(arow, k, t);
        if (weights.lambda_dis != 0.0) node += weights.lambda_dis * loss_dissonance(arow, k);
        if (weights.lambda_kl != 0.0) node += weights.lambda_kl * loss_kl(arow, k, t);
        total += node;

        alpha_gradient(arow, k, t, weights, g_alpha.data());
        for (std::size_t c = 0; c < k; ++c) g_alpha[c] *= inv_m;

        for (std::size_t hi = 0; hi < evidence.evidence.size(); ++hi) {
            const double* erow = evidence.evidence[hi].row(i);
            // softplus'(z) recovered from the output: 1 - exp(-softplus(z)).
            for (std::size_t c = 0; c < k; ++c)
                dz2[c] = g_alpha[c] * (1.0 - std::exp(-erow[c]));

            // Replays the forward pass's dropout draws; the stream must stay
            // aligned, so every unit draws even when its gradient is zero.
            const double* hrow = trace.hidden[hi].row(r);
            Rng drop_rng(use_dropout
                             ? derive_seed(trace.options.mask_seed, Stream::dropout,
                                           trace.options.epoch,
                                           static_cast<std::uint64_t>(trace.hop_ids[hi]), i)
                             : 0);
            for (std::size_t j = 0; j < h; ++j) {
                if (use_dropout && drop_rng.bernoulli(trace.options.dropout_rate)) {
                    dz1[j] = 0.0;
                    continue;
                }
                const double tj = hrow[j];
                const double aj = tj * inv_keep;
                const double* wrow = params.w2.data() + j * k;
                double* gw2 = grads.w2.data() + j * k;
                double acc = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    gw2[c] += aj * dz2[c];
                    acc += wrow[c] * dz2[c];
                }
                dz1[j] = acc * inv_keep * hidden_activation_grad(tj);
            }
            for (std::size_t c = 0; c < k; ++c) grads.b2[c] += dz2[c];

            const double* xrow = trace.inputs[hi].row(r);
            for (std::size_t f = 0; f < d; ++f) {
                const double xf = xrow[f];
                if (xf == 0.0) continue;
                double* gw1 = grads.w1.data() + f * h;
                for (std::size_t j = 0; j < h; ++j) gw1[j] += xf * dz1[j];
            }
            for (std::size_t j = 0; j < h; ++j) grads.b1[j] += dz1[j];
        }
    }
    grads.loss = total * inv_m;
    return grads;
}

Gradients compute_gradients(const ModelParams& params, const PropagatedFeatures& features,
                            const std::vector<int>& hop_set, const std::vector<int>& labels,
                            const std::vector<std::uint8_t>& mask, const LossWeights& weights,
                            const ForwardOptions& options, const std::vector<std::size_t>* rows) {
    ForwardTrace trace;
    const HopEvidenceSet evidence =
        forward_evidence(params, features, hop_set, options, &trace, rows);
    const FusedOutput fused = fuse_forward(evidence);
    return backward(params, trace, evidence, fused, labels, mask, weights);
}

}  // namespace efgnn
