#include "vivat/diagnostics/ab.hpp"

namespace vivat {

void to_json(nlohmann::json& j, const VariantSummary& s) {
    j = nlohmann::json{{"label", s.label},
                       {"last_total", s.last_bundle.total},
                       {"last_recon", s.last_bundle.recon},
                       {"recon_smooth", s.recon_smooth},
                       {"psnr_mean", s.psnr_mean},
                       {"ssim_mean", s.ssim_mean},
                       {"color_shift_mean", s.color_shift_mean},
                       {"grid_score_mean", s.grid_score_mean},
                       {"blur_ratio_mean", s.blur_ratio_mean},
                       {"corner_ratio_mean", s.corner_ratio_mean},
                       {"droplet_score_mean", s.droplet_score_mean},
                       {"max_outlier_ratio_mean", s.max_outlier_ratio_mean},
                       {"corner_probe_ratio", s.corner_probe_ratio},
                       {"held_out_recon", s.held_out_recon}};
}

void to_json(nlohmann::json& j, const ComparisonReport& r) {
    j = nlohmann::json{{"variant_a", r.a}, {"variant_b", r.b}, {"deltas", r.deltas}};
}

const std::vector<std::string>& default_ablation_axes() {
    static const std::vector<std::string> axes = {
        "model.padding_policy",     "model.decoder_norm",
        "train.weights.lambda_kl",  "train.weights.lambda_adv",
        "train.weights.lambda_recon", "train.weights.lambda_perc",
        "train.phase",              "train.disc_start_step",
        "train.adv_variant",        "train.max_steps"};
    return axes;
}

namespace {

void flatten(const nlohmann::json& j, const std::string& prefix,
             std::map<std::string, nlohmann::json>& out) {
    if (j.is_object()) {
        for (auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out[prefix] = j;
    }
}

}  // namespace

void check_ablation_axes(const ModelConfig& ma, const TrainConfig& ta, const ModelConfig& mb,
                         const TrainConfig& tb, const std::vector<std::string>& axes) {
    nlohmann::json a{{"model", ma}, {"train", ta}};
    nlohmann::json b{{"model", mb}, {"train", tb}};
    std::map<std::string, nlohmann::json> fa, fb;
    flatten(a, "", fa);
    flatten(b, "", fb);
    std::vector<std::string> offending;
    for (const auto& [key, va] : fa) {
        auto it = fb.find(key);
        if (it == fb.end() || it->second != va) {
            if (std::find(axes.begin(), axes.end(), key) == axes.end())
                offending.push_back(key);
        }
    }
    if (!offending.empty()) {
        std::string msg = "ab_compare: configs differ outside declared ablation axes:";
        for (const auto& k : offending) msg += " " + k;
        throw ValidationError(msg);
    }
}

}  // namespace vivat
