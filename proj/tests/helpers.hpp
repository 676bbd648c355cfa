#pragma once

#include <cmath>
#include <functional>

#include "adasiam/tensor.hpp"

namespace testutil {

inline double rel_err(double got, double want) {
    double denom = std::max({std::fabs(got), std::fabs(want), 1e-12});
    return std::fabs(got - want) / denom;
}

// Central finite differences of a scalar-valued function at `x`.
inline adasiam::Tensor numeric_grad(const std::function<double(const adasiam::Tensor&)>& f,
                                    const adasiam::Tensor& x, double step = 1e-5) {
    adasiam::Tensor g(x.shape());
    adasiam::Tensor xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double orig = xp[i];
        xp[i] = orig + step;
        double hi = f(xp);
        xp[i] = orig - step;
        double lo = f(xp);
        xp[i] = orig;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

inline double max_rel_err(const adasiam::Tensor& got, const adasiam::Tensor& want) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, rel_err(got[i], want[i]));
    return worst;
}

}  // namespace testutil
