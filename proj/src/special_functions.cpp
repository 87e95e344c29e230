#include "efgnn/special_functions.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

// All three kernels use the same scheme: shift the argument up by the
// recurrence until the asymptotic (Bernoulli-coefficient) series converges,
// then evaluate the series at the shifted point.

namespace efgnn {

namespace {

void require_positive(double x, const char* name) {
    if (!(x > 0.0)) {
        throw std::domain_error(std::string(name) + ": argument must be > 0, got " +
                                std::to_string(x));
    }
}

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

}  // namespace

double digamma(double x) {
    require_positive(x, "digamma");
    double acc = 0.0;
    while (x < 6.0) {  // psi(x) = psi(x + 1) - 1/x
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double t = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum_n B_2n / (2n x^2n)
    const double tail =
        t * (1.0 / 12 -
             t * (1.0 / 120 -
                  t * (1.0 / 252 -
                       t * (1.0 / 240 -
                            t * (1.0 / 132 - t * (691.0 / 32760 - t * (1.0 / 12)))))));
    return acc + std::log(x) - 0.5 * inv - tail;
}

double lgamma(double x) {
    require_positive(x, "lgamma");
    double acc = 0.0;
    while (x < 10.0) {  // lnGamma(x) = lnGamma(x + 1) - ln x
        acc -= std::log(x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double t = inv * inv;
    // Stirling: (x - 1/2) ln x - x + ln(2 pi)/2 + sum_n B_2n / (2n(2n-1) x^(2n-1))
    const double tail =
        inv * (1.0 / 12 -
               t * (1.0 / 360 -
                    t * (1.0 / 1260 -
                         t * (1.0 / 1680 -
                              t * (1.0 / 1188 - t * (691.0 / 360360 - t * (1.0 / 156)))))));
    return acc + (x - 0.5) * std::log(x) - x + kHalfLogTwoPi + tail;
}

double trigamma(double x) {
    require_positive(x, "trigamma");
    double acc = 0.0;
    while (x < 6.0) {  // psi'(x) = psi'(x + 1) + 1/x^2
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double t = inv * inv;
    // psi'(x) ~ 1/x + 1/(2x^2) + sum_n B_2n / x^(2n+1)
    const double tail =
        inv * (1.0 + 0.5 * inv +
               t * (1.0 / 6 -
                    t * (1.0 / 30 -
                         t * (1.0 / 42 -
                              t * (1.0 / 30 -
                                   t * (5.0 / 66 - t * (691.0 / 2730 - t * (7.0 / 6))))))));
    return acc + tail;
}

}  // namespace efgnn
