#include "efgnn/subjective_logic.hpp"

#include <cmath>
#include <string>

namespace efgnn {

namespace {

constexpr double kMassTolerance = 1e-9;

void require_classes(std::size_t k, const char* who) {
    if (k < 2) throw std::invalid_argument(std::string(who) + ": needs at least 2 classes");
}

double balance(double x, double y) {
    if (x * y == 0.0) return 0.0;
    return 1.0 - std::abs(x - y) / (x + y);
}

double sign(double x, double y) { return (x > y) ? 1.0 : (x < y) ? -1.0 : 0.0; }

void check_belief_masses(const std::vector<double>& b, const char* who) {
    double total = 0.0;
    for (double v : b) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(who) + ": belief masses must be >= 0");
        total += v;
    }
    if (total > 1.0 + kMassTolerance)
        throw std::invalid_argument(std::string(who) + ": belief masses exceed 1");
}

}  // namespace

Evidence::Evidence(std::vector<double> values) : e(std::move(values)) {
    require_classes(e.size(), "Evidence");
    for (double v : e) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("Evidence: entries must be finite and >= 0");
    }
}

DirichletParams::DirichletParams(std::vector<double> a) : alpha(std::move(a)) {
    require_classes(alpha.size(), "DirichletParams");
    for (double v : alpha) {
        if (!(v >= 1.0) || !std::isfinite(v))
            throw std::invalid_argument("DirichletParams: entries must be finite and >= 1");
        strength += v;
    }
}

void Opinion::validate() const {
    require_classes(belief.size(), "Opinion");
    if (base_rate.size() != belief.size())
        throw std::invalid_argument("Opinion: base-rate size mismatch");
    check_belief_masses(belief, "Opinion");
    if (!(uncertainty >= 0.0 && uncertainty <= 1.0 + kMassTolerance))
        throw std::invalid_argument("Opinion: uncertainty outside [0, 1]");
    double mass = uncertainty;
    for (double v : belief) mass += v;
    if (std::abs(mass - 1.0) > kMassTolerance)
        throw std::invalid_argument("Opinion: u + sum(b) must equal 1");
    double rates = 0.0;
    for (double v : base_rate) {
        if (!(v >= 0.0)) throw std::invalid_argument("Opinion: base rates must be >= 0");
        rates += v;
    }
    if (std::abs(rates - 1.0) > kMassTolerance)
        throw std::invalid_argument("Opinion: base rates must sum to 1");
}

std::vector<double> uniform_base_rate(std::size_t k) {
    require_classes(k, "uniform_base_rate");
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

DirichletParams evidence_to_dirichlet(const Evidence& ev) {
    std::vector<double> alpha(ev.e.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = ev.e[i] + 1.0;
    return DirichletParams(std::move(alpha));
}

Opinion dirichlet_to_opinion(const DirichletParams& dir, std::vector<double> base_rate) {
    if (base_rate.size() != dir.classes())
        throw std::invalid_argument("dirichlet_to_opinion: base-rate size mismatch");
    Opinion op;
    op.belief.resize(dir.classes());
    const double s = dir.strength;
    for (std::size_t i = 0; i < dir.classes(); ++i) op.belief[i] = (dir.alpha[i] - 1.0) / s;
    op.uncertainty = static_cast<double>(dir.classes()) / s;
    op.base_rate = std::move(base_rate);
    op.validate();
    return op;
}

Opinion dirichlet_to_opinion(const DirichletParams& dir) {
    return dirichlet_to_opinion(dir, uniform_base_rate(dir.classes()));
}

std::vector<double> expected_probability(const DirichletParams& dir) {
    std::vector<double> p(dir.classes());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = dir.alpha[i] / dir.strength;
    return p;
}

std::vector<double> projected_probability(const Opinion& op) {
    op.validate();
    std::vector<double> p(op.classes());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = op.belief[i] + op.base_rate[i] * op.uncertainty;
    return p;
}

Evidence fuse_evidence_cbf(const std::vector<Evidence>& members) {
    if (members.empty()) throw std::invalid_argument("fuse_evidence_cbf: empty member list");
    std::vector<double> sum(members.front().e.size(), 0.0);
    for (const Evidence& ev : members) {
        if (ev.e.size() != sum.size())
            throw std::invalid_argument("fuse_evidence_cbf: class-count mismatch");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += ev.e[i];
    }
    return Evidence(std::move(sum));
}

Opinion fuse_opinions_binary(const Opinion& w1, const Opinion& w2) {
    w1.validate();
    w2.validate();
    if (w1.classes() != w2.classes())
        throw std::invalid_argument("fuse_opinions_binary: class-count mismatch");
    for (std::size_t i = 0; i < w1.classes(); ++i) {
        if (std::abs(w1.base_rate[i] - w2.base_rate[i]) > 1e-12)
            throw std::invalid_argument("fuse_opinions_binary: operands must share a base rate");
    }
    const double u1 = w1.uncertainty;
    const double u2 = w2.uncertainty;
    if (u1 == 0.0 && u2 == 0.0) throw DogmaticFusionError();

    const double denom = u1 + u2 - u1 * u2;
    Opinion fused;
    fused.belief.resize(w1.classes());
    for (std::size_t i = 0; i < w1.classes(); ++i)
        fused.belief[i] = (w1.belief[i] * u2 + u1 * w2.belief[i]) / denom;
    fused.uncertainty = u1 * u2 / denom;
    fused.base_rate = w1.base_rate;
    return fused;
}

double dissonance(const std::vector<double>& belief) {
    check_belief_masses(belief, "dissonance");
    const std::size_t k = belief.size();
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        if (belief[j] == 0.0) continue;
        double num = 0.0;
        double den = 0.0;
        for (std::size_t q = 0; q < k; ++q) {
            if (q == j) continue;
            den += belief[q];
            num += belief[q] * balance(belief[q], belief[j]);
        }
        if (den > 0.0) total += belief[j] * num / den;
    }
    return total;
}

std::vector<double> dissonance_gradient(const std::vector<double>& belief) {
    check_belief_masses(belief, "dissonance_gradient");
    const std::size_t k = belief.size();
    double mass = 0.0;
    for (double v : belief) mass += v;

    // Per-term numerators and denominators of Dis = sum_j b_j * N_j / D_j.
    std::vector<double> num(k, 0.0), den(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        den[j] = mass - belief[j];
        for (std::size_t q = 0; q < k; ++q) {
            if (q == j) continue;
            num[j] += belief[q] * balance(belief[q], belief[j]);
        }
    }

    std::vector<double> grad(k, 0.0);
    for (std::size_t m = 0; m < k; ++m) {
        const double bm = belief[m];
        double acc = 0.0;
        if (den[m] > 0.0) {
            double dnum_m = 0.0;  // d N_m / d b_m (through the second Bal argument)
            if (bm != 0.0) {
                for (std::size_t q = 0; q < k; ++q) {
                    if (q == m || belief[q] == 0.0) continue;
                    const double s = belief[q] + bm;
                    dnum_m += 2.0 * sign(belief[q], bm) * belief[q] * belief[q] / (s * s);
                }
            }
            acc += num[m] / den[m] + bm * dnum_m / den[m];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (j == m || belief[j] == 0.0 || den[j] <= 0.0) continue;
            double dnum_j = 0.0;  // d N_j / d b_m (the q = m summand)
            if (bm != 0.0) {
                const double s = bm + belief[j];
                dnum_j = balance(bm, belief[j]) -
                         2.0 * sign(bm, belief[j]) * bm * belief[j] / (s * s);
            }
            acc += belief[j] * (dnum_j * den[j] - num[j]) / (den[j] * den[j]);
        }
        grad[m] = acc;
    }
    return grad;
}

}  // namespace efgnn
