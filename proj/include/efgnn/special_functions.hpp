#pragma once

namespace efgnn {

/// psi(x), x > 0. Absolute error below 1e-10 across [1e-3, 1e6].
double digamma(double x);

/// ln Gamma(x), x > 0. A few ulp everywhere; absolute error below 1e-10 for
/// moderate x (the value itself exceeds 1e7 near the top of the range, where
/// one ulp is the accuracy floor).
double lgamma(double x);

/// psi'(x), x > 0. Absolute error below 1e-8 across [1e-3, 1e6].
double trigamma(double x);

}  // namespace efgnn
