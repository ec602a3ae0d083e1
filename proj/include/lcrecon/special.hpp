#pragma once

#include <cstddef>
#include <span>

namespace lcrecon {

// Digamma psi(x) for x > 0. Upward recurrence to x >= 10, then the
// asymptotic expansion; absolute error below 1e-12 for x > 1e-6.
double digamma(double x);

// Trigamma psi'(x) for x > 0, same scheme as digamma.
double trigamma(double x);

// Pairwise (cascade) summation; fixed reduction tree so results do not depend
// on how callers chunk the input.
double pairwise_sum(std::span<const double> values);

}  // namespace lcrecon
