#include "aqr/transform.hpp"

#include <algorithm>
#include <stdexcept>

namespace aqr {

namespace {

double transform_with_context(double x, const QuantileProfile& target,
                              const QuantileProfile& source, const TailRule& tail,
                              const TailContext& ctx) {
    const int K = target.level_count;
    const auto& T = target.knots;
    const auto& S = source.knots;

    if (x < T[1] || x >= T[static_cast<std::size_t>(K) - 1] || K < 2)
        return apply_tail_rule(x, tail, ctx);

    // Rightmost j with p_j^T <= x; interior guarantees 1 <= j <= K-2.
    auto it = std::upper_bound(T.begin(), T.end(), x);
    auto j = static_cast<std::size_t>(it - T.begin()) - 1;
    j = std::min(j, static_cast<std::size_t>(K) - 2);

    const double dt = T[j + 1] - T[j];
    if (dt <= 0.0)
        return S[j];
    return S[j] + (x - T[j]) * ((S[j + 1] - S[j]) / dt);
}

} // namespace

double piecewise_transform(double x, const QuantileProfile& target,
                           const QuantileProfile& source, const TailRule& tail) {
    if (target.level_count != source.level_count)
        throw std::invalid_argument("profile mismatch");
    const TailContext ctx = make_tail_context(source, target, tail);
    return transform_with_context(x, target, source, tail, ctx);
}

std::vector<double> batch_transform(const std::vector<double>& values,
                                    const QuantileProfile& target,
                                    const QuantileProfile& source, const TailRule& tail) {
    if (target.level_count != source.level_count)
        throw std::invalid_argument("profile mismatch");
    const TailContext ctx = make_tail_context(source, target, tail);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = transform_with_context(values[i], target, source, tail, ctx);
    return out;
}

} // namespace aqr
