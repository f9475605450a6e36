#pragma once

#include "vivat/diagnostics/detectors.hpp"
#include "vivat/diagnostics/probe.hpp"
#include "vivat/metrics.hpp"
#include "vivat/train/trainer.hpp"

namespace vivat {

struct AbSpec {
    int64_t steps = 0;  // 0: compare untrained models (mechanism probes)
    int eval_images = 16;
    int probe_size = 32;
    int downscale_f = 4;  // for the grid detector
    DetectorThresholds thresholds;
};

struct VariantSummary {
    std::string label;
    LossBundle last_bundle;
    double recon_smooth = 0;
    double psnr_mean = 0, ssim_mean = 0;
    double color_shift_mean = 0, grid_score_mean = 0, blur_ratio_mean = 0;
    double corner_ratio_mean = 0, droplet_score_mean = 0;
    double max_outlier_ratio_mean = 0;  // decoder norm-stats, mean over eval images
    double corner_probe_ratio = 1.0;    // constant-input border/interior probe
    double held_out_recon = 0;          // mean recon loss on the eval slice
};

void to_json(nlohmann::json& j, const VariantSummary& s);

struct ComparisonReport {
    VariantSummary a, b;
    nlohmann::json deltas;  // b minus a, per numeric field
};

void to_json(nlohmann::json& j, const ComparisonReport& r);

// Fields that two A/B variants are allowed to differ in.
const std::vector<std::string>& default_ablation_axes();

// throws ValidationError when configs differ outside the declared axes
void check_ablation_axes(const ModelConfig& ma, const TrainConfig& ta, const ModelConfig& mb,
                         const TrainConfig& tb, const std::vector<std::string>& axes);

namespace detail_ab {

template <class T>
VariantSummary run_variant(const std::string& label, const ModelConfig& mc,
                           const TrainConfig& tc, const Dataset& data, const AbSpec& spec,
                           std::ostream* metrics_sink) {
    VariantSummary s;
    s.label = label;
    TrainState<T> state(mc, tc);
    for (int64_t step = 0; step < spec.steps; ++step) {
        TensorF batch = data.batch(step, tc.batch_size);
        StepResult r = train_step(state, batch.template cast<T>());
        if (metrics_sink) write_metrics_line(*metrics_sink, state.step - 1, tc.phase, r);
        s.last_bundle = r.bundle;
    }
    s.recon_smooth = state.recon_smooth;

    VAEModel<T> eval_model = state.ema_model();
    const int n_eval = std::min<int>(spec.eval_images, static_cast<int>(data.size()));
    DetectorThresholds thr = spec.thresholds;
    // corner band must stay below a quarter of the eval image side
    thr.corner_band = std::max(1, std::min(thr.corner_band, data.spec().crop_size / 4 - 1));
    thr.droplet_window = std::min(thr.droplet_window, data.spec().crop_size / 2);
    double held_out = 0;
    for (int i = 0; i < n_eval; ++i) {
        Image x = data.item(i);
        Tensor<T> xt = x.template cast<T>();
        LatentDistribution<T> dist = eval_model.encode(xt);
        ActivationTrace trace;
        Tensor<T> yt = eval_model.decode(dist.mu, &trace);
        held_out += recon_loss(xt, yt);
        Image y = clamp01(yt).template cast<float>();
        s.psnr_mean += psnr(x, y);
        s.ssim_mean += ssim(x, y);
        ArtifactReport rep = diagnose(x, y, spec.downscale_f, thr);
        s.color_shift_mean += rep.color_shift.score;
        s.grid_score_mean += rep.grid.score;
        s.blur_ratio_mean += rep.blur.applicable ? rep.blur.ratio : 1.0;
        s.corner_ratio_mean += rep.corner.ratio;
        s.droplet_score_mean += rep.droplet.score;
        s.max_outlier_ratio_mean += norm_stats(trace).max_outlier_ratio();
    }
    for (double* v : {&s.psnr_mean, &s.ssim_mean, &s.color_shift_mean, &s.grid_score_mean,
                      &s.blur_ratio_mean, &s.corner_ratio_mean, &s.droplet_score_mean,
                      &s.max_outlier_ratio_mean})
        *v /= n_eval;
    s.held_out_recon = held_out / n_eval;

    double worst = 1.0;
    for (const auto& st : constant_input_probe(eval_model, spec.probe_size, T(0.5)))
        worst = std::max(worst, st.border_ratio);
    s.corner_probe_ratio = worst;
    return s;
}

}  // namespace detail_ab

// Trains (or just probes, when steps == 0) both variants with the shared
// seed/dataset and reports per-variant aggregates plus signed deltas.
template <class T>
ComparisonReport ab_compare(const ModelConfig& mc_a, const TrainConfig& tc_a,
                            const ModelConfig& mc_b, const TrainConfig& tc_b,
                            const Dataset& data, const AbSpec& spec,
                            const std::vector<std::string>& axes = default_ablation_axes(),
                            std::ostream* sink_a = nullptr, std::ostream* sink_b = nullptr) {
    check_ablation_axes(mc_a, tc_a, mc_b, tc_b, axes);
    ComparisonReport rep;
    rep.a = detail_ab::run_variant<T>("a", mc_a, tc_a, data, spec, sink_a);
    rep.b = detail_ab::run_variant<T>("b", mc_b, tc_b, data, spec, sink_b);

    nlohmann::json ja = rep.a, jb = rep.b;
    rep.deltas = nlohmann::json::object();
    for (auto& [key, va] : ja.items())
        if (va.is_number() && jb.contains(key))
            rep.deltas[key] = jb[key].template get<double>() - va.template get<double>();
    return rep;
}

}  // namespace vivat
