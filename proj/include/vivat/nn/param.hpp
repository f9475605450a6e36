#pragma once

#include <string>
#include <vector>

#include "vivat/tensor.hpp"

namespace vivat {

template <class T>
struct Param {
    std::string name;
    Tensor<T> w;
    Tensor<T> g;  // gradient, same shape as w
    bool trainable = true;

    void init_shape(const std::string& nm, int n, int c, int h, int w_) {
        name = nm;
        w = Tensor<T>(n, c, h, w_);
        g = Tensor<T>(n, c, h, w_);
    }
    void zero_grad() { g.zero(); }
};

// Modules register their parameters here in a fixed order; the optimizer,
// EMA tracker and checkpoint writer all iterate this list.
template <class T>
using ParamRefs = std::vector<Param<T>*>;

template <class T>
void zero_grads(const ParamRefs<T>& ps) {
    for (auto* p : ps) p->zero_grad();
}

template <class T>
double grad_norm(const ParamRefs<T>& ps) {
    double s = 0;
    for (auto* p : ps)
        for (const auto& x : p->g.v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

}  // namespace vivat
