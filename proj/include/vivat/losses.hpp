#pragma once

#include <json.hpp>

#include "vivat/model/vae.hpp"
#include "vivat/tensor.hpp"

namespace vivat {

struct LossWeights {
    double lambda_kl = 1e-4;
    double lambda_recon = 1.0;
    double lambda_adv = 0.01;
    double lambda_perc = 0.1;

    void validate() const {
        for (double w : {lambda_kl, lambda_recon, lambda_adv, lambda_perc})
            if (!(w >= 0) || !std::isfinite(w))
                throw ConfigError("loss weights must be non-negative and finite");
    }
};

inline void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"lambda_kl", w.lambda_kl},
                       {"lambda_recon", w.lambda_recon},
                       {"lambda_adv", w.lambda_adv},
                       {"lambda_perc", w.lambda_perc}};
}
inline void from_json(const nlohmann::json& j, LossWeights& w) {
    j.at("lambda_kl").get_to(w.lambda_kl);
    j.at("lambda_recon").get_to(w.lambda_recon);
    j.at("lambda_adv").get_to(w.lambda_adv);
    j.at("lambda_perc").get_to(w.lambda_perc);
}

// Unweighted components plus the weighted total.
struct LossBundle {
    double kl = 0;
    double recon = 0;
    double adv = 0;
    double perc = 0;
    double total = 0;

    // exact recomputation check for the bundle invariant
    double recompute_total(const LossWeights& w) const {
        return w.lambda_kl * kl + w.lambda_recon * recon + w.lambda_adv * adv +
               w.lambda_perc * perc;
    }
    bool all_finite() const {
        return std::isfinite(kl) && std::isfinite(recon) && std::isfinite(adv) &&
               std::isfinite(perc) && std::isfinite(total);
    }
};

inline void to_json(nlohmann::json& j, const LossBundle& b) {
    j = nlohmann::json{
        {"kl", b.kl}, {"recon", b.recon}, {"adv", b.adv}, {"perc", b.perc}, {"total", b.total}};
}

enum class AdvVariant { paper, non_saturating, hinge };
enum class DiscVariant { vanilla, hinge };

inline const char* to_string(AdvVariant v) {
    switch (v) {
        case AdvVariant::paper: return "paper";
        case AdvVariant::non_saturating: return "non_saturating";
        default: return "hinge";
    }
}
inline AdvVariant adv_variant_from_string(const std::string& s) {
    if (s == "paper") return AdvVariant::paper;
    if (s == "non_saturating") return AdvVariant::non_saturating;
    if (s == "hinge") return AdvVariant::hinge;
    throw ConfigError("unknown adversarial variant '" + s + "'");
}

template <class T>
double softplus(T x) {
    double xd = static_cast<double>(x);
    return xd > 0 ? xd + std::log1p(std::exp(-xd)) : std::log1p(std::exp(xd));
}

// D_KL(q || N(0,I)): sum over latent channels, mean over batch and positions.
template <class T>
double kl_loss(const LatentDistribution<T>& dist) {
    dist.validate();
    const auto& mu = dist.mu;
    const auto& lv = dist.logvar;
    double acc = 0;
    for (size_t i = 0; i < mu.v.size(); ++i) {
        double m = mu.v[i], l = lv.v[i];
        acc += -0.5 * (1.0 + l - m * m - std::exp(l));
    }
    const double positions = static_cast<double>(mu.n) * mu.h * mu.w;
    return acc / positions;
}

// adds weight * dKL/dmu, weight * dKL/dlogvar
template <class T>
void kl_loss_backward(const LatentDistribution<T>& dist, double weight, Tensor<T>& gmu,
                      Tensor<T>& glogvar) {
    const double positions = static_cast<double>(dist.mu.n) * dist.mu.h * dist.mu.w;
    const double s = weight / positions;
    for (size_t i = 0; i < dist.mu.v.size(); ++i) {
        gmu.v[i] += static_cast<T>(s * dist.mu.v[i]);
        glogvar.v[i] +=
            static_cast<T>(0.5 * s * (std::exp(static_cast<double>(dist.logvar.v[i])) - 1.0));
    }
}

// mean squared error over all elements
template <class T>
double recon_loss(const Tensor<T>& x, const Tensor<T>& xhat) {
    x.require_same_shape(xhat, "recon_loss");
    double acc = 0;
    for (size_t i = 0; i < x.v.size(); ++i) {
        double d = static_cast<double>(x.v[i]) - static_cast<double>(xhat.v[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(x.numel());
}

template <class T>
void recon_loss_backward(const Tensor<T>& x, const Tensor<T>& xhat, double weight,
                         Tensor<T>& gxhat) {
    const double s = 2.0 * weight / static_cast<double>(x.numel());
    for (size_t i = 0; i < x.v.size(); ++i)
        gxhat.v[i] += static_cast<T>(s * (static_cast<double>(xhat.v[i]) - x.v[i]));
}

// Generator-side adversarial loss over a map of discriminator logits.
// paper:            mean log(1 - sigmoid(l))  == mean  -softplus(l)
// non_saturating:   mean -log(sigmoid(l))     == mean   softplus(-l)
// hinge:            mean -l
template <class T>
double adv_generator_loss(const Tensor<T>& d_logits, AdvVariant variant) {
    if (!d_logits.all_finite()) throw ValidationError("adv_generator_loss: non-finite logits");
    double acc = 0;
    for (const auto& l : d_logits.v) {
        switch (variant) {
            case AdvVariant::paper: acc += -softplus(l); break;
            case AdvVariant::non_saturating: acc += softplus(-l); break;
            case AdvVariant::hinge: acc += -static_cast<double>(l); break;
        }
    }
    return acc / static_cast<double>(d_logits.numel());
}

template <class T>
void adv_generator_loss_backward(const Tensor<T>& d_logits, AdvVariant variant, double weight,
                                 Tensor<T>& glogits) {
    const double s = weight / static_cast<double>(d_logits.numel());
    for (size_t i = 0; i < d_logits.v.size(); ++i) {
        double sg = 1.0 / (1.0 + std::exp(-static_cast<double>(d_logits.v[i])));
        double d = 0;
        switch (variant) {
            case AdvVariant::paper: d = -sg; break;
            case AdvVariant::non_saturating: d = sg - 1.0; break;
            case AdvVariant::hinge: d = -1.0; break;
        }
        glogits.v[i] += static_cast<T>(s * d);
    }
}

// Discriminator objective over real/fake logit maps.
// vanilla: mean softplus(-real) + mean softplus(fake)
// hinge:   mean relu(1 - real)  + mean relu(1 + fake)
template <class T>
double discriminator_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake, DiscVariant variant) {
    if (!d_real.all_finite() || !d_fake.all_finite())
        throw ValidationError("discriminator_loss: non-finite logits");
    double acc = 0;
    for (const auto& l : d_real.v)
        acc += variant == DiscVariant::vanilla ? softplus(-l)
                                               : std::max(0.0, 1.0 - static_cast<double>(l));
    double acc_f = 0;
    for (const auto& l : d_fake.v)
        acc_f += variant == DiscVariant::vanilla ? softplus(l)
                                                 : std::max(0.0, 1.0 + static_cast<double>(l));
    return acc / static_cast<double>(d_real.numel()) + acc_f / static_cast<double>(d_fake.numel());
}

template <class T>
void discriminator_loss_backward(const Tensor<T>& d_real, const Tensor<T>& d_fake,
                                 DiscVariant variant, Tensor<T>& greal, Tensor<T>& gfake) {
    const double sr = 1.0 / static_cast<double>(d_real.numel());
    const double sf = 1.0 / static_cast<double>(d_fake.numel());
    for (size_t i = 0; i < d_real.v.size(); ++i) {
        double l = d_real.v[i];
        double d = variant == DiscVariant::vanilla ? -1.0 / (1.0 + std::exp(l))
                                                   : (1.0 - l > 0 ? -1.0 : 0.0);
        greal.v[i] += static_cast<T>(sr * d);
    }
    for (size_t i = 0; i < d_fake.v.size(); ++i) {
        double l = d_fake.v[i];
        double d = variant == DiscVariant::vanilla ? 1.0 / (1.0 + std::exp(-l))
                                                   : (1.0 + l > 0 ? 1.0 : 0.0);
        gfake.v[i] += static_cast<T>(sf * d);
    }
}

struct LossComponents {
    double kl = 0, recon = 0, adv = 0, perc = 0;
};

// Eq-style weighted total; throws naming the first non-finite component.
inline LossBundle total_loss(const LossComponents& c, const LossWeights& w) {
    w.validate();
    if (!std::isfinite(c.kl)) throw DivergenceError("kl");
    if (!std::isfinite(c.recon)) throw DivergenceError("recon");
    if (!std::isfinite(c.adv)) throw DivergenceError("adv");
    if (!std::isfinite(c.perc)) throw DivergenceError("perc");
    LossBundle b;
    b.kl = c.kl;
    b.recon = c.recon;
    b.adv = c.adv;
    b.perc = c.perc;
    b.total = b.recompute_total(w);
    if (!std::isfinite(b.total)) throw DivergenceError("total");
    return b;
}

}  // namespace vivat
