#pragma once

#include <Eigen/Dense>

#include "vivat/nn/ops.hpp"
#include "vivat/nn/param.hpp"
#include "vivat/rng.hpp"

namespace vivat {

// 2D convolution, im2col + GEMM. Supports the padding policies and the
// stride-2 downsampling used throughout the network.
template <class T>
class Conv2d {
public:
    using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Conv2d() = default;
    Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad,
           PadPolicy policy)
        : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), policy_(policy) {
        weight.init_shape(name + ".weight", out_ch, in_ch, k, k);
        bias.init_shape(name + ".bias", 1, out_ch, 1, 1);
    }

    // normalized fan-in init; zero_init for convs that must start as identity
    void init_params(Rng& rng, bool zero_init = false) {
        if (zero_init) {
            weight.w.zero();
        } else {
            double std = std::sqrt(2.0 / (static_cast<double>(in_ch_) * k_ * k_));
            weight.w.fill_normal(rng, static_cast<T>(std));
        }
        bias.w.zero();
    }

    void collect(ParamRefs<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    int out_dim(int d) const { return (d + 2 * pad_ - k_) / stride_ + 1; }
    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.c != in_ch_)
            throw ShapeError(weight.name + ": expected " + std::to_string(in_ch_) +
                             " input channels, got " + std::to_string(x.c));
        in_h_ = x.h;
        in_w_ = x.w;
        xpad_ = pad2d(x, pad_, policy_);
        const int ho = out_dim(x.h), wo = out_dim(x.w);
        if (ho <= 0 || wo <= 0)
            throw ShapeError(weight.name + ": input too small " + x.shape_str());
        Tensor<T> out(x.n, out_ch_, ho, wo);
        cols_.resize(in_ch_ * k_ * k_, ho * wo);
        Eigen::Map<const MatRM> wm(weight.w.v.data(), out_ch_, in_ch_ * k_ * k_);
        for (int i = 0; i < x.n; ++i) {
            im2col(xpad_, i, ho, wo);
            Eigen::Map<MatRM> ym(out.plane(i, 0), out_ch_, ho * wo);
            ym.noalias() = wm * cols_;
            for (int co = 0; co < out_ch_; ++co) ym.row(co).array() += bias.w.v[co];
        }
        return out;
    }

    // Accumulates weight/bias grads, returns the input gradient.
    Tensor<T> backward(const Tensor<T>& gy) {
        const int ho = gy.h, wo = gy.w;
        Tensor<T> gxpad(xpad_.n, xpad_.c, xpad_.h, xpad_.w);
        Eigen::Map<const MatRM> wm(weight.w.v.data(), out_ch_, in_ch_ * k_ * k_);
        Eigen::Map<MatRM> gwm(weight.g.v.data(), out_ch_, in_ch_ * k_ * k_);
        MatRM gcols(in_ch_ * k_ * k_, ho * wo);
        for (int i = 0; i < gy.n; ++i) {
            Eigen::Map<const MatRM> gym(gy.plane(i, 0), out_ch_, ho * wo);
            im2col(xpad_, i, ho, wo);
            gwm.noalias() += gym * cols_.transpose();
            for (int co = 0; co < out_ch_; ++co) bias.g.v[co] += gym.row(co).sum();
            gcols.noalias() = wm.transpose() * gym;
            col2im(gcols, gxpad, i, ho, wo);
        }
        return pad2d_backward(gxpad, pad_, policy_, in_h_, in_w_);
    }

    void drop_cache() {
        xpad_ = Tensor<T>();
        cols_.resize(0, 0);
    }

    Param<T> weight;
    Param<T> bias;

private:
    void im2col(const Tensor<T>& xpad, int item, int ho, int wo) {
        for (int ci = 0; ci < in_ch_; ++ci) {
            const T* src = xpad.plane(item, ci);
            for (int dy = 0; dy < k_; ++dy)
                for (int dx = 0; dx < k_; ++dx) {
                    T* row = cols_.data() + static_cast<size_t>((ci * k_ + dy) * k_ + dx) *
                                                 (static_cast<size_t>(ho) * wo);
                    for (int y = 0; y < ho; ++y) {
                        const T* s = src + (y * stride_ + dy) * xpad.w + dx;
                        for (int x = 0; x < wo; ++x) row[y * wo + x] = s[x * stride_];
                    }
                }
        }
    }

    void col2im(const MatRM& gcols, Tensor<T>& gxpad, int item, int ho, int wo) {
        for (int ci = 0; ci < in_ch_; ++ci) {
            T* dst = gxpad.plane(item, ci);
            for (int dy = 0; dy < k_; ++dy)
                for (int dx = 0; dx < k_; ++dx) {
                    const T* row = gcols.data() + static_cast<size_t>((ci * k_ + dy) * k_ + dx) *
                                                      (static_cast<size_t>(ho) * wo);
                    for (int y = 0; y < ho; ++y) {
                        T* d = dst + (y * stride_ + dy) * gxpad.w + dx;
                        for (int x = 0; x < wo; ++x) d[x * stride_] += row[y * wo + x];
                    }
                }
        }
    }

    int in_ch_ = 0, out_ch_ = 0, k_ = 3, stride_ = 1, pad_ = 1;
    PadPolicy policy_ = PadPolicy::zero;
    int in_h_ = 0, in_w_ = 0;
    Tensor<T> xpad_;
    MatRM cols_;
};

}  // namespace vivat
