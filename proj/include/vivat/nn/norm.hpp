#pragma once

#include "vivat/nn/conv.hpp"
#include "vivat/nn/ops.hpp"
#include "vivat/nn/param.hpp"

namespace vivat {

// Group normalization over (channels/groups, H, W) per item, optional
// per-channel affine.
template <class T>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(const std::string& name, int channels, int groups, bool affine = true)
        : channels_(channels), groups_(groups), affine_(affine) {
        if (groups < 1 || channels % groups != 0)
            throw ValidationError(name + ": groups " + std::to_string(groups) +
                                  " must divide channels " + std::to_string(channels));
        if (affine_) {
            gamma.init_shape(name + ".gamma", 1, channels, 1, 1);
            beta.init_shape(name + ".beta", 1, channels, 1, 1);
            gamma.w.fill(T(1));
        }
    }

    void collect(ParamRefs<T>& out) {
        if (affine_) {
            out.push_back(&gamma);
            out.push_back(&beta);
        }
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.c != channels_) throw ShapeError("group_norm: channel mismatch");
        const int cg = channels_ / groups_;
        const size_t m = static_cast<size_t>(cg) * x.h * x.w;
        xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
        invstd_.assign(static_cast<size_t>(x.n) * groups_, T(0));
        Tensor<T> out(x.n, x.c, x.h, x.w);
        for (int i = 0; i < x.n; ++i) {
            for (int g = 0; g < groups_; ++g) {
                const T* src = x.plane(i, g * cg);
                double mean = 0;
                for (size_t j = 0; j < m; ++j) mean += src[j];
                mean /= static_cast<double>(m);
                double var = 0;
                for (size_t j = 0; j < m; ++j) {
                    double d = src[j] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(m);
                T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
                invstd_[i * groups_ + g] = inv;
                T* xh = xhat_.plane(i, g * cg);
                T* dst = out.plane(i, g * cg);
                for (int cc = 0; cc < cg; ++cc) {
                    const int ch = g * cg + cc;
                    const T gm = affine_ ? gamma.w.v[ch] : T(1);
                    const T bt = affine_ ? beta.w.v[ch] : T(0);
                    const size_t off = static_cast<size_t>(cc) * x.h * x.w;
                    for (size_t j = 0; j < static_cast<size_t>(x.h) * x.w; ++j) {
                        T v = (src[off + j] - static_cast<T>(mean)) * inv;
                        xh[off + j] = v;
                        dst[off + j] = gm * v + bt;
                    }
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gy) {
        const int cg = channels_ / groups_;
        const size_t hw = static_cast<size_t>(gy.h) * gy.w;
        const size_t m = cg * hw;
        Tensor<T> gx(gy.n, gy.c, gy.h, gy.w);
        for (int i = 0; i < gy.n; ++i) {
            for (int g = 0; g < groups_; ++g) {
                const T* gyp = gy.plane(i, g * cg);
                const T* xh = xhat_.plane(i, g * cg);
                T* gxp = gx.plane(i, g * cg);
                const T inv = invstd_[i * groups_ + g];
                double sum_dxh = 0, sum_dxh_xh = 0;
                for (int cc = 0; cc < cg; ++cc) {
                    const int ch = g * cg + cc;
                    const T gm = affine_ ? gamma.w.v[ch] : T(1);
                    const size_t off = cc * hw;
                    double dg = 0, db = 0;
                    for (size_t j = 0; j < hw; ++j) {
                        T dxh = gyp[off + j] * gm;
                        sum_dxh += dxh;
                        sum_dxh_xh += static_cast<double>(dxh) * xh[off + j];
                        dg += static_cast<double>(gyp[off + j]) * xh[off + j];
                        db += gyp[off + j];
                    }
                    if (affine_) {
                        gamma.g.v[ch] += static_cast<T>(dg);
                        beta.g.v[ch] += static_cast<T>(db);
                    }
                }
                const T a = static_cast<T>(sum_dxh / static_cast<double>(m));
                const T b = static_cast<T>(sum_dxh_xh / static_cast<double>(m));
                for (int cc = 0; cc < cg; ++cc) {
                    const int ch = g * cg + cc;
                    const T gm = affine_ ? gamma.w.v[ch] : T(1);
                    const size_t off = cc * hw;
                    for (size_t j = 0; j < hw; ++j) {
                        T dxh = gyp[off + j] * gm;
                        gxp[off + j] = inv * (dxh - a - xh[off + j] * b);
                    }
                }
            }
        }
        return gx;
    }

    Param<T> gamma;
    Param<T> beta;

private:
    static constexpr double kEps = 1e-6;
    int channels_ = 0, groups_ = 1;
    bool affine_ = true;
    Tensor<T> xhat_;
    std::vector<T> invstd_;
};

// Spatially conditional normalization: parameter-free group norm of h,
// modulated by scale/shift maps predicted from the nearest-upsampled latent.
// Both modulation convs are zero-initialized, so at init this layer IS plain
// group normalization.
template <class T>
class Scn {
public:
    Scn() = default;
    Scn(const std::string& name, int channels, int z_channels, int groups, PadPolicy policy)
        : gn_(name + ".gn", channels, groups, /*affine=*/false),
          conv_gamma_(name + ".gamma_conv", z_channels, channels, 3, 1, 1, policy),
          conv_beta_(name + ".beta_conv", z_channels, channels, 3, 1, 1, policy) {}

    void init_params(Rng& rng) {
        conv_gamma_.init_params(rng, /*zero_init=*/true);
        conv_beta_.init_params(rng, /*zero_init=*/true);
    }

    void collect(ParamRefs<T>& out) {
        conv_gamma_.collect(out);
        conv_beta_.collect(out);
    }

    // h: (N,C,H,W); z: (N,cz,Hz,Wz) with H = k*Hz, W = k*Wz for integer k
    Tensor<T> forward(const Tensor<T>& h, const Tensor<T>& z) {
        if (h.n != z.n) throw ShapeError("scn: batch mismatch");
        if (h.h % z.h != 0 || h.w % z.w != 0 || h.h / z.h != h.w / z.w)
            throw ValidationError("scn: non-integer spatial ratio between h " + h.shape_str() +
                                  " and z " + z.shape_str());
        factor_ = h.h / z.h;
        Tensor<T> zu = upsample_nearest(z, factor_);
        norm_ = gn_.forward(h);
        gamma_map_ = conv_gamma_.forward(zu);
        beta_map_ = conv_beta_.forward(zu);
        Tensor<T> out(h.n, h.c, h.h, h.w);
        for (size_t j = 0; j < out.v.size(); ++j)
            out.v[j] = norm_.v[j] * (T(1) + gamma_map_.v[j]) + beta_map_.v[j];
        return out;
    }

    // returns gh; accumulates gz into gz_accum (shape of z)
    Tensor<T> backward(const Tensor<T>& gy, Tensor<T>& gz_accum) {
        Tensor<T> dnorm(gy.n, gy.c, gy.h, gy.w);
        Tensor<T> dgamma(gy.n, gy.c, gy.h, gy.w);
        for (size_t j = 0; j < gy.v.size(); ++j) {
            dnorm.v[j] = gy.v[j] * (T(1) + gamma_map_.v[j]);
            dgamma.v[j] = gy.v[j] * norm_.v[j];
        }
        Tensor<T> gzu = conv_gamma_.backward(dgamma);
        gzu.add_(conv_beta_.backward(gy));
        gz_accum.add_(upsample_nearest_backward(gzu, factor_));
        return gn_.backward(dnorm);
    }

private:
    GroupNorm<T> gn_;
    Conv2d<T> conv_gamma_;
    Conv2d<T> conv_beta_;
    Tensor<T> norm_, gamma_map_, beta_map_;
    int factor_ = 1;
};

}  // namespace vivat
