#pragma once

#include <memory>
#include <utility>

#include "vivat/model/config.hpp"
#include "vivat/nn/blocks.hpp"

namespace vivat {

template <class T>
struct LatentDistribution {
    Tensor<T> mu;
    Tensor<T> logvar;

    void validate() const {
        mu.require_same_shape(logvar, "latent distribution");
        if (!mu.all_finite() || !logvar.all_finite())
            throw ValidationError("latent distribution has non-finite entries");
    }
};

// z = mu + exp(0.5 * clamp(logvar)) * noise
inline constexpr double kLogvarMin = -30.0;
inline constexpr double kLogvarMax = 20.0;

template <class T>
Tensor<T> reparameterize(const LatentDistribution<T>& dist, const Tensor<T>& noise) {
    dist.mu.require_same_shape(dist.logvar, "reparameterize");
    dist.mu.require_same_shape(noise, "reparameterize: noise");
    Tensor<T> z = dist.mu;
    for (size_t i = 0; i < z.v.size(); ++i) {
        double lv = std::clamp(static_cast<double>(dist.logvar.v[i]), kLogvarMin, kLogvarMax);
        z.v[i] += static_cast<T>(std::exp(0.5 * lv)) * noise.v[i];
    }
    return z;
}

// chain rule of reparameterize: adds dL/dmu and dL/dlogvar given dL/dz
template <class T>
void reparameterize_backward(const LatentDistribution<T>& dist, const Tensor<T>& noise,
                             const Tensor<T>& gz, Tensor<T>& gmu, Tensor<T>& glogvar) {
    for (size_t i = 0; i < gz.v.size(); ++i) {
        gmu.v[i] += gz.v[i];
        double lv = static_cast<double>(dist.logvar.v[i]);
        if (lv >= kLogvarMin && lv <= kLogvarMax)
            glogvar.v[i] += gz.v[i] * noise.v[i] * static_cast<T>(0.5 * std::exp(0.5 * lv));
    }
}

// Per-layer spatial L2-norm maps captured while decoding.
struct ActivationTrace {
    std::vector<std::pair<std::string, TensorF>> layers;  // maps are (n,1,h,w)
    bool empty() const { return layers.empty(); }
};

template <class T>
TensorF channel_l2_map(const Tensor<T>& x) {
    TensorF out(x.n, 1, x.h, x.w);
    for (int i = 0; i < x.n; ++i)
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                double s = 0;
                for (int ci = 0; ci < x.c; ++ci) {
                    double v = x.at(i, ci, y, xx);
                    s += v * v;
                }
                out.at(i, 0, y, xx) = static_cast<float>(std::sqrt(s));
            }
    return out;
}

template <class T>
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(const ModelConfig& cfg) : cfg_(cfg) {
        const int g = cfg.group_norm_groups;
        const auto pol = cfg.padding_policy;
        conv_in_ = Conv2d<T>("enc.conv_in", cfg.input_channels, cfg.width(0), 3, 1, 1, pol);
        int prev = cfg.width(0);
        for (int level = 0; level < cfg.levels(); ++level) {
            LevelDown lv;
            const int w = cfg.width(level);
            for (int b = 0; b < cfg.blocks_per_level; ++b) {
                std::string nm = "enc.l" + std::to_string(level) + ".block" + std::to_string(b);
                lv.blocks.emplace_back(nm, b == 0 ? prev : w, w, NormKind::group_norm, 0, g, pol);
            }
            if (cfg.attention_levels.count(level))
                lv.attn = std::make_unique<AttnBlock<T>>("enc.l" + std::to_string(level) + ".attn",
                                                         w, NormKind::group_norm, 0, g, pol);
            if (level + 1 < cfg.levels())
                lv.down = std::make_unique<Downsample<T>>("enc.l" + std::to_string(level) + ".down",
                                                          w, pol);
            levels_.push_back(std::move(lv));
            prev = w;
        }
        const int top = cfg.top_width();
        mid1_ = ResnetBlock<T>("enc.mid.block1", top, top, NormKind::group_norm, 0, g, pol);
        mid_attn_ = AttnBlock<T>("enc.mid.attn", top, NormKind::group_norm, 0, g, pol);
        mid2_ = ResnetBlock<T>("enc.mid.block2", top, top, NormKind::group_norm, 0, g, pol);
        norm_out_ = GroupNorm<T>("enc.norm_out", top, g);
        mu_head_ = Conv2d<T>("enc.mu_head", top, cfg.latent_channels, 3, 1, 1, pol);
        logvar_head_ = Conv2d<T>("enc.logvar_head", top, cfg.latent_channels, 3, 1, 1, pol);
    }

    void init_params(Rng& rng) {
        conv_in_.init_params(rng);
        for (auto& lv : levels_) {
            for (auto& b : lv.blocks) b.init_params(rng);
            if (lv.attn) lv.attn->init_params(rng);
            if (lv.down) lv.down->init_params(rng);
        }
        mid1_.init_params(rng);
        mid_attn_.init_params(rng);
        mid2_.init_params(rng);
        mu_head_.init_params(rng);
        logvar_head_.init_params(rng);
    }

    void collect(ParamRefs<T>& out) {
        conv_in_.collect(out);
        for (auto& lv : levels_) {
            for (auto& b : lv.blocks) b.collect(out);
            if (lv.attn) lv.attn->collect(out);
            if (lv.down) lv.down->collect(out);
        }
        mid1_.collect(out);
        mid_attn_.collect(out);
        mid2_.collect(out);
        norm_out_.collect(out);
        mu_head_.collect(out);
        logvar_head_.collect(out);
    }

    LatentDistribution<T> forward(const Tensor<T>& x) {
        Tensor<T> h = conv_in_.forward(x);
        for (auto& lv : levels_) {
            for (auto& b : lv.blocks) h = b.forward(h);
            if (lv.attn) h = lv.attn->forward(h);
            if (lv.down) h = lv.down->forward(h);
        }
        h = mid1_.forward(h);
        h = mid_attn_.forward(h);
        h = mid2_.forward(h);
        h = act_out_.forward(norm_out_.forward(h));
        return {mu_head_.forward(h), logvar_head_.forward(h)};
    }

    Tensor<T> backward(const Tensor<T>& gmu, const Tensor<T>& glogvar) {
        Tensor<T> gh = mu_head_.backward(gmu);
        gh.add_(logvar_head_.backward(glogvar));
        gh = norm_out_.backward(act_out_.backward(gh));
        gh = mid2_.backward(gh);
        gh = mid_attn_.backward(gh);
        gh = mid1_.backward(gh);
        for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
            if (it->down) gh = it->down->backward(gh);
            if (it->attn) gh = it->attn->backward(gh);
            for (auto bit = it->blocks.rbegin(); bit != it->blocks.rend(); ++bit)
                gh = bit->backward(gh);
        }
        return conv_in_.backward(gh);
    }

private:
    struct LevelDown {
        std::vector<ResnetBlock<T>> blocks;
        std::unique_ptr<AttnBlock<T>> attn;
        std::unique_ptr<Downsample<T>> down;
    };

    ModelConfig cfg_;
    Conv2d<T> conv_in_;
    std::vector<LevelDown> levels_;
    ResnetBlock<T> mid1_, mid2_;
    AttnBlock<T> mid_attn_;
    GroupNorm<T> norm_out_;
    SiLU<T> act_out_;
    Conv2d<T> mu_head_, logvar_head_;
};

template <class T>
class Decoder {
public:
    Decoder() = default;
    explicit Decoder(const ModelConfig& cfg) : cfg_(cfg) {
        const int g = cfg.group_norm_groups;
        const auto pol = cfg.padding_policy;
        const auto nk = cfg.decoder_norm;
        const int zc = cfg.latent_channels;
        const int top = cfg.top_width();
        conv_in_ = Conv2d<T>("dec.conv_in", zc, top, 3, 1, 1, pol);
        mid1_ = ResnetBlock<T>("dec.mid.block1", top, top, nk, zc, g, pol);
        mid_attn_ = AttnBlock<T>("dec.mid.attn", top, nk, zc, g, pol);
        mid2_ = ResnetBlock<T>("dec.mid.block2", top, top, nk, zc, g, pol);
        int prev = top;
        for (int level = cfg.levels() - 1; level >= 0; --level) {
            LevelUp lv;
            lv.index = level;
            const int w = cfg.width(level);
            for (int b = 0; b < cfg.blocks_per_level; ++b) {
                std::string nm = "dec.l" + std::to_string(level) + ".block" + std::to_string(b);
                lv.blocks.emplace_back(nm, b == 0 ? prev : w, w, nk, zc, g, pol);
            }
            if (cfg.attention_levels.count(level))
                lv.attn = std::make_unique<AttnBlock<T>>("dec.l" + std::to_string(level) + ".attn",
                                                         w, nk, zc, g, pol);
            if (level > 0)
                lv.up = std::make_unique<Upsample<T>>("dec.l" + std::to_string(level) + ".up", w,
                                                      pol);
            levels_.push_back(std::move(lv));
            prev = w;
        }
        norm_out_ = CondNorm<T>("dec.norm_out", nk, cfg.width(0), zc, g, pol);
        conv_out_ = Conv2d<T>("dec.conv_out", cfg.width(0), cfg.input_channels, 3, 1, 1, pol);
    }

    void init_params(Rng& rng) {
        conv_in_.init_params(rng);
        mid1_.init_params(rng);
        mid_attn_.init_params(rng);
        mid2_.init_params(rng);
        for (auto& lv : levels_) {
            for (auto& b : lv.blocks) b.init_params(rng);
            if (lv.attn) lv.attn->init_params(rng);
            if (lv.up) lv.up->init_params(rng);
        }
        norm_out_.init_params(rng);
        conv_out_.init_params(rng);
    }

    void collect(ParamRefs<T>& out) {
        conv_in_.collect(out);
        mid1_.collect(out);
        mid_attn_.collect(out);
        mid2_.collect(out);
        for (auto& lv : levels_) {
            for (auto& b : lv.blocks) b.collect(out);
            if (lv.attn) lv.attn->collect(out);
            if (lv.up) lv.up->collect(out);
        }
        norm_out_.collect(out);
        conv_out_.collect(out);
    }

    // Raw (unclamped) reconstruction. Probes land after every resnet,
    // attention and upsample stage when trace is requested.
    Tensor<T> forward(const Tensor<T>& z, ActivationTrace* trace = nullptr) {
        if (z.c != cfg_.latent_channels)
            throw ShapeError("decode: latent has " + std::to_string(z.c) +
                             " channels, config expects " +
                             std::to_string(cfg_.latent_channels));
        z_cache_ = z;
        auto probe = [&](const char* name, const Tensor<T>& t) {
            if (trace) trace->layers.emplace_back(name, channel_l2_map(t));
        };
        Tensor<T> h = conv_in_.forward(z);
        h = mid1_.forward(h, &z_cache_);
        probe("dec.mid.block1", h);
        h = mid_attn_.forward(h, &z_cache_);
        probe("dec.mid.attn", h);
        h = mid2_.forward(h, &z_cache_);
        probe("dec.mid.block2", h);
        for (auto& lv : levels_) {
            for (size_t b = 0; b < lv.blocks.size(); ++b) {
                h = lv.blocks[b].forward(h, &z_cache_);
                if (trace)
                    trace->layers.emplace_back("dec.l" + std::to_string(lv.index) + ".block" +
                                                   std::to_string(b),
                                               channel_l2_map(h));
            }
            if (lv.attn) {
                h = lv.attn->forward(h, &z_cache_);
                if (trace)
                    trace->layers.emplace_back("dec.l" + std::to_string(lv.index) + ".attn",
                                               channel_l2_map(h));
            }
            if (lv.up) {
                h = lv.up->forward(h);
                if (trace)
                    trace->layers.emplace_back("dec.l" + std::to_string(lv.index) + ".up",
                                               channel_l2_map(h));
            }
        }
        h = act_out_.forward(norm_out_.forward(h, &z_cache_));
        return conv_out_.forward(h);
    }

    Tensor<T> backward(const Tensor<T>& gy) {
        Tensor<T> gz = z_cache_.like_zeros();
        Tensor<T> gh = norm_out_.backward(act_out_.backward(conv_out_.backward(gy)), &gz);
        for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
            if (it->up) gh = it->up->backward(gh);
            if (it->attn) gh = it->attn->backward(gh, &gz);
            for (auto bit = it->blocks.rbegin(); bit != it->blocks.rend(); ++bit)
                gh = bit->backward(gh, &gz);
        }
        gh = mid2_.backward(gh, &gz);
        gh = mid_attn_.backward(gh, &gz);
        gh = mid1_.backward(gh, &gz);
        gz.add_(conv_in_.backward(gh));
        return gz;
    }

private:
    struct LevelUp {
        int index = 0;
        std::vector<ResnetBlock<T>> blocks;
        std::unique_ptr<AttnBlock<T>> attn;
        std::unique_ptr<Upsample<T>> up;
    };

    ModelConfig cfg_;
    Conv2d<T> conv_in_;
    ResnetBlock<T> mid1_, mid2_;
    AttnBlock<T> mid_attn_;
    std::vector<LevelUp> levels_;
    CondNorm<T> norm_out_;
    SiLU<T> act_out_;
    Conv2d<T> conv_out_;
    Tensor<T> z_cache_;
};

template <class T>
class VAEModel {
public:
    VAEModel() = default;
    explicit VAEModel(const ModelConfig& cfg, uint64_t seed = 0) : cfg_(cfg) {
        cfg.validate();
        enc_ = Encoder<T>(cfg);
        dec_ = Decoder<T>(cfg);
        Rng rng(derive_seed(seed, 0x6d6f64656cULL));
        enc_.init_params(rng);
        dec_.init_params(rng);
        rebuild_params();
    }

    // params_ holds pointers into enc_/dec_, so every copy/move rebuilds it
    VAEModel(const VAEModel& o) : VAEModel(o.cfg_) { copy_params_from(o); }
    VAEModel& operator=(const VAEModel& o) {
        if (this != &o) {
            cfg_ = o.cfg_;
            enc_ = Encoder<T>(cfg_);
            dec_ = Decoder<T>(cfg_);
            rebuild_params();
            copy_params_from(o);
        }
        return *this;
    }
    VAEModel(VAEModel&& o) noexcept
        : cfg_(std::move(o.cfg_)), enc_(std::move(o.enc_)), dec_(std::move(o.dec_)) {
        rebuild_params();
    }
    VAEModel& operator=(VAEModel&& o) noexcept {
        cfg_ = std::move(o.cfg_);
        enc_ = std::move(o.enc_);
        dec_ = std::move(o.dec_);
        rebuild_params();
        return *this;
    }

    const ModelConfig& config() const { return cfg_; }
    ParamRefs<T>& params() { return params_; }
    // encoder + latent heads come first in the param list; used by freeze
    size_t encoder_param_count() const { return n_encoder_params_; }

    LatentDistribution<T> encode(const Tensor<T>& x) {
        validate_input(x);
        return enc_.forward(x);
    }

    // clamped to [0,1]; use decode_raw for the training path
    Tensor<T> decode(const Tensor<T>& z, ActivationTrace* trace = nullptr) {
        return clamp01(dec_.forward(z, trace));
    }
    Tensor<T> decode_raw(const Tensor<T>& z, ActivationTrace* trace = nullptr) {
        return dec_.forward(z, trace);
    }

    Tensor<T> encoder_backward(const Tensor<T>& gmu, const Tensor<T>& glogvar) {
        return enc_.backward(gmu, glogvar);
    }
    Tensor<T> decoder_backward(const Tensor<T>& gy) { return dec_.backward(gy); }

    std::pair<Tensor<T>, LatentDistribution<T>> forward(const Tensor<T>& x,
                                                        const Tensor<T>& noise) {
        LatentDistribution<T> dist = encode(x);
        Tensor<T> z = reparameterize(dist, noise);
        return {decode(z), dist};
    }

    void zero_grads() { vivat::zero_grads(params_); }

    void copy_params_from(const VAEModel& o) {
        if (params_.size() != o.params_.size())
            throw ShapeError("copy_params_from: incompatible models");
        for (size_t i = 0; i < params_.size(); ++i) {
            params_[i]->w = o.params_[i]->w;
            params_[i]->trainable = o.params_[i]->trainable;
        }
    }

private:
    void rebuild_params() {
        params_.clear();
        enc_.collect(params_);
        n_encoder_params_ = params_.size();
        dec_.collect(params_);
    }

    void validate_input(const Tensor<T>& x) const {
        if (x.c != cfg_.input_channels)
            throw ShapeError("encode: expected " + std::to_string(cfg_.input_channels) +
                             " channels, got " + std::to_string(x.c));
        const int f = cfg_.downscale_factor;
        if (x.h % f != 0 || x.w % f != 0)
            throw ShapeError("encode: input " + x.shape_str() +
                             " dims must be multiples of f=" + std::to_string(f));
        if (!x.all_finite()) throw ValidationError("encode: non-finite input");
    }

    ModelConfig cfg_;
    Encoder<T> enc_;
    Decoder<T> dec_;
    ParamRefs<T> params_;
    size_t n_encoder_params_ = 0;
};

// Spec-level op with explicit parameters; the Scn layer is the stateful form.
template <class T>
Tensor<T> scn_apply(Scn<T>& layer, const Tensor<T>& h, const Tensor<T>& z) {
    return layer.forward(h, z);
}

}  // namespace vivat
