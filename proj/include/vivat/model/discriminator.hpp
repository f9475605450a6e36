#pragma once

#include "vivat/nn/blocks.hpp"

namespace vivat {

struct DiscConfig {
    int input_channels = 3;
    int base_channels = 32;
    int layers = 4;  // strided conv layers before the logit conv
    int group_norm_groups = 8;

    void validate() const {
        if (layers < 2) throw ConfigError("discriminator: needs at least 2 layers");
        if (base_channels % group_norm_groups != 0)
            throw ConfigError("discriminator: groups must divide base channels");
    }
};

// Patch-wise convolutional classifier: emits a spatial map of real/fake
// logits, one per receptive-field patch. 4x4 kernels, stride 2 except the
// final stride-1 logit layer; group norm keeps it batch-independent.
template <class T>
class PatchDiscriminator {
public:
    PatchDiscriminator() = default;
    explicit PatchDiscriminator(const DiscConfig& cfg, uint64_t seed = 0) : cfg_(cfg) {
        cfg.validate();
        int prev = cfg.input_channels;
        int width = cfg.base_channels;
        for (int i = 0; i < cfg.layers - 1; ++i) {
            convs_.emplace_back("disc.conv" + std::to_string(i), prev, width, 4, 2, 1,
                                PadPolicy::zero);
            if (i > 0) norms_.emplace_back("disc.norm" + std::to_string(i), width,
                                           cfg.group_norm_groups);
            acts_.emplace_back(T(0.2));
            prev = width;
            width *= 2;
        }
        logit_conv_ = Conv2d<T>("disc.logit", prev, 1, 4, 1, 1, PadPolicy::zero);
        Rng rng(derive_seed(seed, 0x64697363ULL));
        for (auto& c : convs_) c.init_params(rng);
        logit_conv_.init_params(rng);
        rebuild_params();
    }

    PatchDiscriminator(const PatchDiscriminator& o) : PatchDiscriminator(o.cfg_) {
        copy_params_from(o);
    }
    PatchDiscriminator& operator=(const PatchDiscriminator& o) {
        if (this != &o) {
            *this = PatchDiscriminator(o.cfg_);
            copy_params_from(o);
        }
        return *this;
    }
    PatchDiscriminator(PatchDiscriminator&& o) noexcept
        : cfg_(o.cfg_),
          convs_(std::move(o.convs_)),
          norms_(std::move(o.norms_)),
          acts_(std::move(o.acts_)),
          logit_conv_(std::move(o.logit_conv_)) {
        rebuild_params();
    }
    PatchDiscriminator& operator=(PatchDiscriminator&& o) noexcept {
        cfg_ = o.cfg_;
        convs_ = std::move(o.convs_);
        norms_ = std::move(o.norms_);
        acts_ = std::move(o.acts_);
        logit_conv_ = std::move(o.logit_conv_);
        rebuild_params();
        return *this;
    }

    const DiscConfig& config() const { return cfg_; }
    ParamRefs<T>& params() { return params_; }

    // logits map; spatial size follows the conv arithmetic of the config
    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> h = x;
        size_t ni = 0;
        for (size_t i = 0; i < convs_.size(); ++i) {
            h = convs_[i].forward(h);
            if (i > 0) h = norms_[ni++].forward(h);
            h = acts_[i].forward(h);
        }
        return logit_conv_.forward(h);
    }

    // accumulate_param_grads=false gives the generator its input gradient
    // without touching the discriminator's own grads
    Tensor<T> backward(const Tensor<T>& glogits, bool accumulate_param_grads = true) {
        struct GradGuard {
            PatchDiscriminator* d;
            std::vector<Tensor<T>> saved;
            explicit GradGuard(PatchDiscriminator* dd) : d(dd) {
                for (auto* p : d->params_) saved.push_back(p->g);
            }
            ~GradGuard() {
                for (size_t i = 0; i < saved.size(); ++i) d->params_[i]->g = std::move(saved[i]);
            }
        };
        std::unique_ptr<GradGuard> guard;
        if (!accumulate_param_grads) guard = std::make_unique<GradGuard>(this);
        Tensor<T> gh = logit_conv_.backward(glogits);
        size_t ni = norms_.size();
        for (size_t i = convs_.size(); i-- > 0;) {
            gh = acts_[i].backward(gh);
            if (i > 0) gh = norms_[--ni].backward(gh);
            gh = convs_[i].backward(gh);
        }
        return gh;
    }

    void zero_grads() { vivat::zero_grads(params_); }

    void copy_params_from(const PatchDiscriminator& o) {
        if (params_.size() != o.params_.size())
            throw ShapeError("discriminator copy: incompatible configs");
        for (size_t i = 0; i < params_.size(); ++i) params_[i]->w = o.params_[i]->w;
    }

private:
    void rebuild_params() {
        params_.clear();
        for (size_t i = 0; i < convs_.size(); ++i) {
            convs_[i].collect(params_);
            if (i > 0) norms_[i - 1].collect(params_);
        }
        logit_conv_.collect(params_);
    }

    DiscConfig cfg_;
    std::vector<Conv2d<T>> convs_;
    std::vector<GroupNorm<T>> norms_;
    std::vector<LeakyReLU<T>> acts_;
    Conv2d<T> logit_conv_;
    ParamRefs<T> params_;
};

}  // namespace vivat
