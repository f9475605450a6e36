#pragma once

#include <chrono>
#include <optional>
#include <ostream>

#include "vivat/io/checkpoint.hpp"
#include "vivat/losses.hpp"
#include "vivat/model/discriminator.hpp"
#include "vivat/model/perceptual.hpp"
#include "vivat/model/vae.hpp"
#include "vivat/train/adam.hpp"

namespace vivat {

enum class Phase { full, decoder_only };
enum class Precision { fp32, fp64 };

inline const char* to_string(Phase p) { return p == Phase::full ? "full" : "decoder_only"; }
inline const char* to_string(Precision p) { return p == Precision::fp32 ? "fp32" : "fp64"; }

struct TrainConfig {
    double learning_rate = 1e-4;
    double ema_decay = 0.9999;
    int batch_size = 4;
    int64_t max_steps = 1000;
    int64_t disc_start_step = 0;
    Phase phase = Phase::full;
    uint64_t seed = 0;
    LossWeights weights;
    Precision precision = Precision::fp32;
    AdvVariant adv_variant = AdvVariant::non_saturating;
    DiscVariant disc_variant = DiscVariant::vanilla;
    double disc_learning_rate = 1e-4;
    DiscConfig disc;
    PerceptualConfig perceptual;
    int64_t checkpoint_every = 0;  // 0: only final

    void validate() const {
        if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
        if (!(ema_decay >= 0 && ema_decay <= 1))
            throw ConfigError("train: ema_decay must be in [0,1]");
        if (disc_start_step < 0) throw ConfigError("train: disc_start_step must be >= 0");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
        weights.validate();
        disc.validate();
        perceptual.validate();
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate},
                       {"ema_decay", c.ema_decay},
                       {"batch_size", c.batch_size},
                       {"max_steps", c.max_steps},
                       {"disc_start_step", c.disc_start_step},
                       {"phase", to_string(c.phase)},
                       {"seed", c.seed},
                       {"weights", c.weights},
                       {"precision", to_string(c.precision)},
                       {"adv_variant", to_string(c.adv_variant)},
                       {"disc_variant", c.disc_variant == DiscVariant::vanilla ? "vanilla"
                                                                               : "hinge"},
                       {"disc_learning_rate", c.disc_learning_rate},
                       {"disc_base_channels", c.disc.base_channels},
                       {"disc_layers", c.disc.layers},
                       {"disc_groups", c.disc.group_norm_groups},
                       {"perc_channels", c.perceptual.level_channels},
                       {"perc_weights", c.perceptual.level_weights},
                       {"perc_seed", c.perceptual.seed},
                       {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("ema_decay").get_to(c.ema_decay);
    j.at("batch_size").get_to(c.batch_size);
    j.at("max_steps").get_to(c.max_steps);
    j.at("disc_start_step").get_to(c.disc_start_step);
    c.phase = j.at("phase").get<std::string>() == "full" ? Phase::full : Phase::decoder_only;
    j.at("seed").get_to(c.seed);
    j.at("weights").get_to(c.weights);
    c.precision =
        j.at("precision").get<std::string>() == "fp32" ? Precision::fp32 : Precision::fp64;
    c.adv_variant = adv_variant_from_string(j.at("adv_variant").get<std::string>());
    c.disc_variant = j.at("disc_variant").get<std::string>() == "vanilla" ? DiscVariant::vanilla
                                                                          : DiscVariant::hinge;
    j.at("disc_learning_rate").get_to(c.disc_learning_rate);
    j.at("disc_base_channels").get_to(c.disc.base_channels);
    j.at("disc_layers").get_to(c.disc.layers);
    j.at("disc_groups").get_to(c.disc.group_norm_groups);
    j.at("perc_channels").get_to(c.perceptual.level_channels);
    j.at("perc_weights").get_to(c.perceptual.level_weights);
    j.at("perc_seed").get_to(c.perceptual.seed);
    j.at("checkpoint_every").get_to(c.checkpoint_every);
}

template <class T>
struct TrainState {
    TrainConfig cfg;
    VAEModel<T> model;
    PatchDiscriminator<T> disc;
    PerceptualExtractor<T> perceptual;
    Adam<T> opt_g, opt_d;
    EmaTracker<T> ema;
    Rng rng;
    int64_t step = 0;
    double recon_smooth = -1;  // exponential moving average of recon loss

    TrainState(const ModelConfig& mc, const TrainConfig& tc)
        : cfg(tc),
          model(mc, tc.seed),
          disc(tc.disc, derive_seed(tc.seed, 0xd15cULL)),
          perceptual(tc.perceptual),
          opt_g(tc.learning_rate),
          opt_d(tc.disc_learning_rate),
          rng(derive_seed(tc.seed, 0x747261696eULL)) {
        tc.validate();
        opt_g.attach(model.params());
        opt_d.attach(disc.params());
        ema.init(model.params(), tc.ema_decay);
        if (tc.phase == Phase::decoder_only) apply_freeze();
    }

    void apply_freeze() {
        cfg.phase = Phase::decoder_only;
        for (size_t i = 0; i < model.encoder_param_count(); ++i) {
            model.params()[i]->trainable = false;
            model.params()[i]->zero_grad();
        }
    }

    // evaluation view: model clone carrying the EMA weights
    VAEModel<T> ema_model() {
        VAEModel<T> m(model.config());
        m.copy_params_from(model);
        ema.write_to(m.params());
        return m;
    }
};

struct StepResult {
    LossBundle bundle;
    double disc_loss = 0;
    double grad_norm = 0;
    double wall_ms = 0;
};

// One optimization step: generator update from the weighted total loss, then
// (from disc_start_step on) one discriminator update on detached
// reconstructions, then EMA. Throws DivergenceError before touching any
// parameter if a loss component is non-finite.
template <class T>
StepResult train_step(TrainState<T>& state, const Tensor<T>& batch) {
    auto t0 = std::chrono::steady_clock::now();
    const TrainConfig& cfg = state.cfg;
    if (batch.n != cfg.batch_size)
        throw ShapeError("train_step: batch size " + std::to_string(batch.n) +
                         " does not match config " + std::to_string(cfg.batch_size));
    if (!batch.all_finite()) throw ValidationError("train_step: non-finite batch");

    const bool decoder_only = cfg.phase == Phase::decoder_only;
    const bool disc_active = state.step >= cfg.disc_start_step;
    const double lambda_adv_eff = disc_active ? cfg.weights.lambda_adv : 0.0;

    // forward
    LatentDistribution<T> dist = state.model.encode(batch);
    Tensor<T> noise(dist.mu.n, dist.mu.c, dist.mu.h, dist.mu.w);
    for (auto& v : noise.v) v = static_cast<T>(state.rng.normal());
    Tensor<T> z = reparameterize(dist, noise);
    Tensor<T> xhat = state.model.decode_raw(z);

    LossComponents comps;
    comps.kl = kl_loss(dist);
    if (!std::isfinite(comps.kl)) throw DivergenceError("kl");
    comps.recon = recon_loss(batch, xhat);
    // catch a blown-up reconstruction before it reaches the other losses so
    // the error names the component that actually diverged
    if (!std::isfinite(comps.recon)) throw DivergenceError("recon");

    Tensor<T> gxhat = xhat.like_zeros();
    std::optional<Tensor<T>> fake_logits;
    if (lambda_adv_eff > 0) {
        fake_logits = state.disc.forward(xhat);
        comps.adv = adv_generator_loss(*fake_logits, cfg.adv_variant);
    }
    if (cfg.weights.lambda_perc > 0)
        comps.perc = state.perceptual.loss_backward(batch, xhat, cfg.weights.lambda_perc, gxhat);

    LossBundle bundle = total_loss(comps, cfg.weights);  // throws on divergence

    // generator backward
    state.model.zero_grads();
    recon_loss_backward(batch, xhat, cfg.weights.lambda_recon, gxhat);
    if (lambda_adv_eff > 0) {
        Tensor<T> glogits = fake_logits->like_zeros();
        adv_generator_loss_backward(*fake_logits, cfg.adv_variant, lambda_adv_eff, glogits);
        gxhat.add_(state.disc.backward(glogits, /*accumulate_param_grads=*/false));
    }
    Tensor<T> gz = state.model.decoder_backward(gxhat);
    if (!decoder_only) {
        Tensor<T> gmu = dist.mu.like_zeros();
        Tensor<T> glv = dist.logvar.like_zeros();
        reparameterize_backward(dist, noise, gz, gmu, glv);
        kl_loss_backward(dist, cfg.weights.lambda_kl, gmu, glv);
        state.model.encoder_backward(gmu, glv);
    }

    StepResult res;
    res.bundle = bundle;
    res.grad_norm = grad_norm(state.model.params());
    if (!std::isfinite(res.grad_norm)) throw DivergenceError("grad_norm");

    state.opt_g.step(state.model.params());
    state.ema.update(state.model.params());

    // discriminator update on detached reconstructions; real and fake run as
    // one stacked pass (group norm is per-item, so results match split passes)
    if (disc_active) {
        Tensor<T> logits = state.disc.forward(concat_batch(batch, xhat));
        Tensor<T> real_logits = slice_batch(logits, 0, batch.n);
        Tensor<T> fake_l = slice_batch(logits, batch.n, batch.n);
        res.disc_loss = discriminator_loss(real_logits, fake_l, cfg.disc_variant);
        if (!std::isfinite(res.disc_loss)) throw DivergenceError("disc");
        state.disc.zero_grads();
        Tensor<T> greal = real_logits.like_zeros(), gfake = fake_l.like_zeros();
        discriminator_loss_backward(real_logits, fake_l, cfg.disc_variant, greal, gfake);
        state.disc.backward(concat_batch(greal, gfake));
        state.opt_d.step(state.disc.params());
    }

    state.step += 1;
    state.recon_smooth = state.recon_smooth < 0
                             ? bundle.recon
                             : 0.98 * state.recon_smooth + 0.02 * bundle.recon;
    res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return res;
}

template <class T>
void freeze_encoder(TrainState<T>& state) {
    state.apply_freeze();
}

// ---- persistence ------------------------------------------------------

inline std::string rng_state_hex(const Rng& rng) {
    char buf[70];
    auto s = rng.state();
    std::snprintf(buf, sizeof(buf), "%016llx%016llx%016llx%016llx",
                  static_cast<unsigned long long>(s[0]), static_cast<unsigned long long>(s[1]),
                  static_cast<unsigned long long>(s[2]), static_cast<unsigned long long>(s[3]));
    return buf;
}

inline void rng_state_from_hex(Rng& rng, const std::string& hex) {
    if (hex.size() != 64) throw IntegrityError("checkpoint: bad rng state");
    std::array<uint64_t, 4> s{};
    for (int i = 0; i < 4; ++i) s[i] = std::stoull(hex.substr(i * 16, 16), nullptr, 16);
    rng.set_state(s);
}

template <class T>
void save_model(const std::string& path, VAEModel<T>& model) {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "model";
    ckpt.meta["model_config"] = model.config();
    ckpt.meta["dtype"] = dtype_name(dtype_of<T>());
    for (auto* p : model.params()) ckpt.tensors.push_back(NamedTensor::from(p->name, p->w));
    write_checkpoint(path, ckpt);
}

template <class T>
VAEModel<T> load_model_from(const Checkpoint& ckpt) {
    ModelConfig mc = ckpt.meta.at("model_config").get<ModelConfig>();
    VAEModel<T> model(mc);
    for (auto* p : model.params()) p->w = ckpt.find(p->name).template to<T>();
    return model;
}

template <class T>
void save_train_state(const std::string& path, TrainState<T>& state) {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "train_state";
    ckpt.meta["model_config"] = state.model.config();
    ckpt.meta["train_config"] = state.cfg;
    ckpt.meta["dtype"] = dtype_name(dtype_of<T>());
    ckpt.meta["step"] = state.step;
    ckpt.meta["recon_smooth"] = state.recon_smooth;
    ckpt.meta["rng"] = rng_state_hex(state.rng);
    ckpt.meta["opt_g_t"] = state.opt_g.step_count();
    ckpt.meta["opt_d_t"] = state.opt_d.step_count();
    auto& ps = state.model.params();
    for (size_t i = 0; i < ps.size(); ++i) {
        ckpt.tensors.push_back(NamedTensor::from("model/" + ps[i]->name, ps[i]->w));
        ckpt.tensors.push_back(NamedTensor::from("ema/" + ps[i]->name, state.ema.shadow()[i]));
        ckpt.tensors.push_back(
            NamedTensor::from("opt_g/m/" + ps[i]->name, state.opt_g.moments_m()[i]));
        ckpt.tensors.push_back(
            NamedTensor::from("opt_g/v/" + ps[i]->name, state.opt_g.moments_v()[i]));
    }
    auto& ds = state.disc.params();
    for (size_t i = 0; i < ds.size(); ++i) {
        ckpt.tensors.push_back(NamedTensor::from("disc/" + ds[i]->name, ds[i]->w));
        ckpt.tensors.push_back(
            NamedTensor::from("opt_d/m/" + ds[i]->name, state.opt_d.moments_m()[i]));
        ckpt.tensors.push_back(
            NamedTensor::from("opt_d/v/" + ds[i]->name, state.opt_d.moments_v()[i]));
    }
    write_checkpoint(path, ckpt);
}

template <class T>
TrainState<T> load_train_state_from(const Checkpoint& ckpt) {
    if (ckpt.meta.at("kind") != "train_state")
        throw VersionError("checkpoint: expected a train_state checkpoint");
    ModelConfig mc = ckpt.meta.at("model_config").get<ModelConfig>();
    TrainConfig tc = ckpt.meta.at("train_config").get<TrainConfig>();
    TrainState<T> state(mc, tc);
    state.step = ckpt.meta.at("step").get<int64_t>();
    state.recon_smooth = ckpt.meta.at("recon_smooth").get<double>();
    rng_state_from_hex(state.rng, ckpt.meta.at("rng").get<std::string>());
    state.opt_g.set_step_count(ckpt.meta.at("opt_g_t").get<int64_t>());
    state.opt_d.set_step_count(ckpt.meta.at("opt_d_t").get<int64_t>());
    auto& ps = state.model.params();
    for (size_t i = 0; i < ps.size(); ++i) {
        ps[i]->w = ckpt.find("model/" + ps[i]->name).template to<T>();
        state.ema.shadow()[i] = ckpt.find("ema/" + ps[i]->name).template to<T>();
        state.opt_g.moments_m()[i] = ckpt.find("opt_g/m/" + ps[i]->name).template to<T>();
        state.opt_g.moments_v()[i] = ckpt.find("opt_g/v/" + ps[i]->name).template to<T>();
    }
    auto& ds = state.disc.params();
    for (size_t i = 0; i < ds.size(); ++i) {
        ds[i]->w = ckpt.find("disc/" + ds[i]->name).template to<T>();
        state.opt_d.moments_m()[i] = ckpt.find("opt_d/m/" + ds[i]->name).template to<T>();
        state.opt_d.moments_v()[i] = ckpt.find("opt_d/v/" + ds[i]->name).template to<T>();
    }
    if (tc.phase == Phase::decoder_only) state.apply_freeze();
    return state;
}

template <class T>
TrainState<T> load_train_state(const std::string& path) {
    return load_train_state_from<T>(read_checkpoint(path));
}

// one metrics record per step, JSON-lines
inline void write_metrics_line(std::ostream& os, int64_t step, Phase phase,
                               const StepResult& r) {
    nlohmann::json j{{"step", step},
                     {"phase", to_string(phase)},
                     {"kl", r.bundle.kl},
                     {"recon", r.bundle.recon},
                     {"adv", r.bundle.adv},
                     {"perc", r.bundle.perc},
                     {"total", r.bundle.total},
                     {"disc", r.disc_loss},
                     {"grad_norm", r.grad_norm},
                     {"wall_ms", r.wall_ms}};
    os << j.dump() << "\n";
}

}  // namespace vivat
