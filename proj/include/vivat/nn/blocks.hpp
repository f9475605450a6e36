#pragma once

#include "vivat/nn/conv.hpp"
#include "vivat/nn/norm.hpp"
#include "vivat/nn/ops.hpp"

namespace vivat {

enum class NormKind { group_norm, scn };

inline const char* to_string(NormKind k) {
    return k == NormKind::group_norm ? "group_norm" : "scn";
}

// Group norm or SCN behind one interface; encoder blocks always pick
// group_norm, decoder blocks follow ModelConfig::decoder_norm.
template <class T>
class CondNorm {
public:
    CondNorm() = default;
    CondNorm(const std::string& name, NormKind kind, int channels, int z_channels, int groups,
             PadPolicy policy)
        : kind_(kind) {
        if (kind_ == NormKind::group_norm)
            gn_ = GroupNorm<T>(name, channels, groups, /*affine=*/true);
        else
            scn_ = Scn<T>(name, channels, z_channels, groups, policy);
    }

    void init_params(Rng& rng) {
        if (kind_ == NormKind::scn) scn_.init_params(rng);
    }
    void collect(ParamRefs<T>& out) {
        if (kind_ == NormKind::group_norm)
            gn_.collect(out);
        else
            scn_.collect(out);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>* z) {
        if (kind_ == NormKind::group_norm) return gn_.forward(x);
        if (!z) throw ValidationError("scn norm requires a conditioning latent");
        return scn_.forward(x, *z);
    }

    Tensor<T> backward(const Tensor<T>& gy, Tensor<T>* gz) {
        if (kind_ == NormKind::group_norm) return gn_.backward(gy);
        if (!gz) throw ValidationError("scn backward requires a latent grad accumulator");
        return scn_.backward(gy, *gz);
    }

private:
    NormKind kind_ = NormKind::group_norm;
    GroupNorm<T> gn_;
    Scn<T> scn_;
};

// norm -> silu -> conv3x3 -> norm -> silu -> conv3x3 (+ 1x1 shortcut when the
// channel count changes). The branch-final conv is zero-initialized.
template <class T>
class ResnetBlock {
public:
    ResnetBlock() = default;
    ResnetBlock(const std::string& name, int in_ch, int out_ch, NormKind norm, int z_channels,
                int groups, PadPolicy policy)
        : in_ch_(in_ch),
          out_ch_(out_ch),
          norm1_(name + ".norm1", norm, in_ch, z_channels, groups, policy),
          norm2_(name + ".norm2", norm, out_ch, z_channels, groups, policy),
          conv1_(name + ".conv1", in_ch, out_ch, 3, 1, 1, policy),
          conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1, policy) {
        if (in_ch != out_ch) shortcut_ = Conv2d<T>(name + ".shortcut", in_ch, out_ch, 1, 1, 0, policy);
    }

    void init_params(Rng& rng) {
        norm1_.init_params(rng);
        norm2_.init_params(rng);
        conv1_.init_params(rng);
        conv2_.init_params(rng, /*zero_init=*/true);
        if (in_ch_ != out_ch_) shortcut_.init_params(rng);
    }

    void collect(ParamRefs<T>& out) {
        norm1_.collect(out);
        conv1_.collect(out);
        norm2_.collect(out);
        conv2_.collect(out);
        if (in_ch_ != out_ch_) shortcut_.collect(out);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>* z = nullptr) {
        x_cache_ = x;
        Tensor<T> h = conv1_.forward(act1_.forward(norm1_.forward(x, z)));
        h = conv2_.forward(act2_.forward(norm2_.forward(h, z)));
        Tensor<T> s = (in_ch_ != out_ch_) ? shortcut_.forward(x) : x;
        h.add_(s);
        return h;
    }

    Tensor<T> backward(const Tensor<T>& gy, Tensor<T>* gz = nullptr) {
        Tensor<T> gh = norm2_.backward(act2_.backward(conv2_.backward(gy)), gz);
        Tensor<T> gx = norm1_.backward(act1_.backward(conv1_.backward(gh)), gz);
        if (in_ch_ != out_ch_)
            gx.add_(shortcut_.backward(gy));
        else
            gx.add_(gy);
        return gx;
    }

private:
    int in_ch_ = 0, out_ch_ = 0;
    CondNorm<T> norm1_, norm2_;
    SiLU<T> act1_, act2_;
    Conv2d<T> conv1_, conv2_, shortcut_;
    Tensor<T> x_cache_;
};

// Single-head self-attention over spatial positions with a residual
// connection. Intended for the low-resolution levels.
template <class T>
class AttnBlock {
public:
    using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    AttnBlock() = default;
    AttnBlock(const std::string& name, int channels, NormKind norm, int z_channels, int groups,
              PadPolicy policy)
        : ch_(channels),
          norm_(name + ".norm", norm, channels, z_channels, groups, policy),
          q_(name + ".q", channels, channels, 1, 1, 0, policy),
          k_(name + ".k", channels, channels, 1, 1, 0, policy),
          v_(name + ".v", channels, channels, 1, 1, 0, policy),
          proj_(name + ".proj", channels, channels, 1, 1, 0, policy) {}

    void init_params(Rng& rng) {
        norm_.init_params(rng);
        q_.init_params(rng);
        k_.init_params(rng);
        v_.init_params(rng);
        proj_.init_params(rng);
    }

    void collect(ParamRefs<T>& out) {
        norm_.collect(out);
        q_.collect(out);
        k_.collect(out);
        v_.collect(out);
        proj_.collect(out);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>* z = nullptr) {
        Tensor<T> nrm = norm_.forward(x, z);
        qt_ = q_.forward(nrm);
        kt_ = k_.forward(nrm);
        vt_ = v_.forward(nrm);
        const int p = x.h * x.w;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(ch_)));
        attn_.assign(x.n, MatRM());
        Tensor<T> o(x.n, ch_, x.h, x.w);
        for (int i = 0; i < x.n; ++i) {
            Eigen::Map<const MatRM> qm(qt_.plane(i, 0), ch_, p);
            Eigen::Map<const MatRM> km(kt_.plane(i, 0), ch_, p);
            Eigen::Map<const MatRM> vm(vt_.plane(i, 0), ch_, p);
            MatRM s = (qm.transpose() * km) * scale;  // (p, p)
            // row-wise softmax
            for (int r = 0; r < p; ++r) {
                T mx = s.row(r).maxCoeff();
                s.row(r) = (s.row(r).array() - mx).exp();
                s.row(r) /= s.row(r).sum();
            }
            attn_[i] = std::move(s);
            Eigen::Map<MatRM> om(o.plane(i, 0), ch_, p);
            om.noalias() = vm * attn_[i].transpose();
        }
        Tensor<T> out = proj_.forward(o);
        out.add_(x);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gy, Tensor<T>* gz = nullptr) {
        Tensor<T> go = proj_.backward(gy);
        const int p = go.h * go.w;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(ch_)));
        Tensor<T> gq(go.n, ch_, go.h, go.w), gk = gq.like_zeros(), gv = gq.like_zeros();
        for (int i = 0; i < go.n; ++i) {
            Eigen::Map<const MatRM> gom(go.plane(i, 0), ch_, p);
            Eigen::Map<const MatRM> qm(qt_.plane(i, 0), ch_, p);
            Eigen::Map<const MatRM> km(kt_.plane(i, 0), ch_, p);
            Eigen::Map<const MatRM> vm(vt_.plane(i, 0), ch_, p);
            const MatRM& a = attn_[i];
            Eigen::Map<MatRM> gqm(gq.plane(i, 0), ch_, p);
            Eigen::Map<MatRM> gkm(gk.plane(i, 0), ch_, p);
            Eigen::Map<MatRM> gvm(gv.plane(i, 0), ch_, p);
            gvm.noalias() = gom * a;
            MatRM ga = gom.transpose() * vm;  // (p, p)
            // softmax backward per row
            for (int r = 0; r < p; ++r) {
                T dot = ga.row(r).dot(a.row(r));
                ga.row(r) = a.row(r).array() * (ga.row(r).array() - dot);
            }
            gqm.noalias() = (km * ga.transpose()) * scale;
            gkm.noalias() = (qm * ga) * scale;
        }
        Tensor<T> gn = q_.backward(gq);
        gn.add_(k_.backward(gk));
        gn.add_(v_.backward(gv));
        Tensor<T> gx = norm_.backward(gn, gz);
        gx.add_(gy);
        return gx;
    }

private:
    int ch_ = 0;
    CondNorm<T> norm_;
    Conv2d<T> q_, k_, v_, proj_;
    Tensor<T> qt_, kt_, vt_;
    std::vector<MatRM> attn_;
};

// stride-2 conv
template <class T>
class Downsample {
public:
    Downsample() = default;
    Downsample(const std::string& name, int channels, PadPolicy policy)
        : conv_(name + ".conv", channels, channels, 3, 2, 1, policy) {}

    void init_params(Rng& rng) { conv_.init_params(rng); }
    void collect(ParamRefs<T>& out) { conv_.collect(out); }
    Tensor<T> forward(const Tensor<T>& x) { return conv_.forward(x); }
    Tensor<T> backward(const Tensor<T>& gy) { return conv_.backward(gy); }

private:
    Conv2d<T> conv_;
};

// nearest x2 followed by a 3x3 conv; avoids checkerboard patterns from
// transposed convolutions
template <class T>
class Upsample {
public:
    Upsample() = default;
    Upsample(const std::string& name, int channels, PadPolicy policy)
        : conv_(name + ".conv", channels, channels, 3, 1, 1, policy) {}

    void init_params(Rng& rng) { conv_.init_params(rng); }
    void collect(ParamRefs<T>& out) { conv_.collect(out); }
    Tensor<T> forward(const Tensor<T>& x) { return conv_.forward(upsample_nearest(x, 2)); }
    Tensor<T> backward(const Tensor<T>& gy) {
        return upsample_nearest_backward(conv_.backward(gy), 2);
    }

private:
    Conv2d<T> conv_;
};

}  // namespace vivat
