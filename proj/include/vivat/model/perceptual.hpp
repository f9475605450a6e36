#pragma once

#include "vivat/nn/blocks.hpp"

namespace vivat {

struct PerceptualConfig {
    int input_channels = 3;
    std::vector<int> level_channels = {16, 32, 64};
    std::vector<double> level_weights = {1.0, 1.0, 1.0};
    uint64_t seed = 1234;

    void validate() const {
        if (level_channels.empty() || level_channels.size() != level_weights.size())
            throw ConfigError("perceptual: level_channels/level_weights mismatch");
    }
};

// Frozen multi-scale feature pyramid: stride-2 convs with seeded random
// weights and leaky-relu. Deterministic stand-in for a pretrained feature
// backbone; the loss keeps its multi-level L1 structure either way.
template <class T>
class PerceptualExtractor {
public:
    PerceptualExtractor() = default;
    explicit PerceptualExtractor(const PerceptualConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        Rng rng(derive_seed(cfg.seed, 0x70657263ULL));
        int prev = cfg.input_channels;
        for (size_t l = 0; l < cfg.level_channels.size(); ++l) {
            convs_.emplace_back("perc.conv" + std::to_string(l), prev, cfg.level_channels[l], 3,
                                2, 1, PadPolicy::zero);
            convs_.back().init_params(rng);
            acts_.emplace_back(T(0.2));
            prev = cfg.level_channels[l];
        }
    }

    const PerceptualConfig& config() const { return cfg_; }

    std::vector<Tensor<T>> features(const Tensor<T>& x) const {
        std::vector<Tensor<T>> out;
        Tensor<T> h = x;
        // forward only; layers are stateless copies so the extractor stays const
        for (size_t l = 0; l < convs_.size(); ++l) {
            Conv2d<T> conv = convs_[l];
            LeakyReLU<T> act = acts_[l];
            h = act.forward(conv.forward(h));
            out.push_back(h);
        }
        return out;
    }

    // sum_l w_l * mean |phi_l(x) - phi_l(xhat)|
    double loss(const Tensor<T>& x, const Tensor<T>& xhat) const {
        x.require_same_shape(xhat, "perceptual_loss");
        auto fx = features(x);
        auto fy = features(xhat);
        double acc = 0;
        for (size_t l = 0; l < fx.size(); ++l) {
            double s = 0;
            for (size_t i = 0; i < fx[l].v.size(); ++i)
                s += std::abs(static_cast<double>(fx[l].v[i]) - fy[l].v[i]);
            acc += cfg_.level_weights[l] * s / static_cast<double>(fx[l].numel());
        }
        return acc;
    }

    // loss value plus weight * dL/dxhat accumulated into gxhat
    double loss_backward(const Tensor<T>& x, const Tensor<T>& xhat, double weight,
                         Tensor<T>& gxhat) {
        x.require_same_shape(xhat, "perceptual_loss");
        auto fx = features(x);
        // xhat branch needs caches, so run stateful layers bottom-up
        std::vector<Conv2d<T>> convs = convs_;
        std::vector<LeakyReLU<T>> acts = acts_;
        std::vector<Tensor<T>> fy;
        Tensor<T> h = xhat;
        for (size_t l = 0; l < convs.size(); ++l) {
            h = acts[l].forward(convs[l].forward(h));
            fy.push_back(h);
        }
        double acc = 0;
        std::vector<Tensor<T>> glevel(fy.size());
        for (size_t l = 0; l < fy.size(); ++l) {
            glevel[l] = fy[l].like_zeros();
            const double s = cfg_.level_weights[l] / static_cast<double>(fy[l].numel());
            double lsum = 0;
            for (size_t i = 0; i < fy[l].v.size(); ++i) {
                double d = static_cast<double>(fy[l].v[i]) - fx[l].v[i];
                lsum += std::abs(d);
                glevel[l].v[i] = static_cast<T>(s * weight * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)));
            }
            acc += cfg_.level_weights[l] * lsum / static_cast<double>(fy[l].numel());
        }
        Tensor<T> g = glevel.back();
        for (size_t l = convs.size(); l-- > 0;) {
            g = convs[l].backward(acts[l].backward(g));
            if (l > 0) g.add_(glevel[l - 1]);
        }
        gxhat.add_(g);
        return acc;
    }

private:
    PerceptualConfig cfg_;
    std::vector<Conv2d<T>> convs_;
    std::vector<LeakyReLU<T>> acts_;
};

// spec-style free function
template <class T>
double perceptual_loss(const PerceptualExtractor<T>& extractor, const Tensor<T>& x,
                       const Tensor<T>& xhat) {
    return extractor.loss(x, xhat);
}

}  // namespace vivat
