#pragma once

#include <functional>

#include "vivat/nn/param.hpp"
#include "vivat/rng.hpp"
#include "vivat/tensor.hpp"

namespace vivat::testing {

inline double rel_err(double a, double b) {
    double m = std::max(std::abs(a), std::abs(b));
    // both numeric and analytic are zero up to fd cancellation noise
    if (m < 1e-7) return 0.0;
    return std::abs(a - b) / std::max(m, 1e-6);
}

// Central finite differences against an analytic gradient for one tensor.
// `value` recomputes the scalar objective from current tensor contents.
inline double max_grad_rel_err(Tensor<double>& x, const Tensor<double>& analytic,
                               const std::function<double()>& value, double eps = 1e-5) {
    double worst = 0;
    for (size_t i = 0; i < x.v.size(); ++i) {
        double saved = x.v[i];
        x.v[i] = saved + eps;
        double fp = value();
        x.v[i] = saved - eps;
        double fm = value();
        x.v[i] = saved;
        double num = (fp - fm) / (2 * eps);
        worst = std::max(worst, rel_err(num, analytic.v[i]));
    }
    return worst;
}

// Same sweep over every parameter of a module; analytic grads must already
// be accumulated (one backward pass, grads zeroed beforehand).
inline double max_param_grad_rel_err(const ParamRefs<double>& ps,
                                     const std::function<double()>& value, double eps = 1e-5) {
    double worst = 0;
    for (auto* p : ps) {
        for (size_t i = 0; i < p->w.v.size(); ++i) {
            double saved = p->w.v[i];
            p->w.v[i] = saved + eps;
            double fp = value();
            p->w.v[i] = saved - eps;
            double fm = value();
            p->w.v[i] = saved;
            double num = (fp - fm) / (2 * eps);
            worst = std::max(worst, rel_err(num, p->g.v[i]));
        }
    }
    return worst;
}

// Deterministic projection weights: turns a tensor-valued output into the
// scalar objective sum_i w_i * y_i so the check exercises every output.
inline Tensor<double> projection_weights(int n, int c, int h, int w, uint64_t seed) {
    Tensor<double> out(n, c, h, w);
    Rng rng(seed);
    out.fill_normal(rng);
    return out;
}

inline double project(const Tensor<double>& y, const Tensor<double>& w) {
    double s = 0;
    for (size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * w.v[i];
    return s;
}

}  // namespace vivat::testing
