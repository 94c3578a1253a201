#pragma once

#include <vector>

#include "aqr/quantile.hpp"
#include "aqr/tails.hpp"

namespace aqr {

// The quantile recalibration map: for x in [p_j^T, p_{j+1}^T) with 1 <= j <= K-2,
//   q = p_j^S + (x - p_j^T) / (p_{j+1}^T - p_j^T) * (p_{j+1}^S - p_j^S),
// with the segment found by binary search. The extreme segments and everything
// outside [p_0^T, p_K^T] are governed by the tail rule. Tied target knots
// (zero-width segment) map to the left source knot.
double piecewise_transform(double x, const QuantileProfile& target,
                           const QuantileProfile& source, const TailRule& tail);

// Elementwise piecewise_transform; the context is assembled once per call.
std::vector<double> batch_transform(const std::vector<double>& values,
                                    const QuantileProfile& target,
                                    const QuantileProfile& source, const TailRule& tail);

} // namespace aqr
