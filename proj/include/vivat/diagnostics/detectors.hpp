#pragma once

#include <json.hpp>

#include "vivat/model/vae.hpp"
#include "vivat/tensor.hpp"

namespace vivat {

// All defaults were frozen after the synthetic injection-calibration studies
// in the test suite; every report stores the thresholds used so flags are
// recomputable from (score, threshold) alone.
struct DetectorThresholds {
    double color_shift = 0.02;
    double grid = 40.0;          // injection study: clean pairs top out near 14,
                                 // a 0.02-amplitude grid lands above 1400
    double blur = 0.75;          // flag when ratio drops below; sigma-1 blur
                                 // tops out near 0.70, clean pairs stay above 1
    double blur_cutoff = 0.125;  // cycles/px, Nyquist/4
    double corner = 2.0;
    int corner_band = 8;
    double droplet = 8.0;        // clean max-z stays under 5.5, a 0.3-amplitude
                                 // 4x4 spot scores above 80
    int droplet_window = 8;
};

void to_json(nlohmann::json& j, const DetectorThresholds& t);
void from_json(const nlohmann::json& j, DetectorThresholds& t);

struct ColorShiftResult {
    double shift[3] = {0, 0, 0};  // mean(xhat_c) - mean(x_c)
    double score = 0;             // max |shift_c|
    int dominant_channel = 0;
    bool flag = false;
    double threshold = 0;
};

struct GridResult {
    double score = 0;  // peak harmonic power / median off-peak power
    int period = 0;
    bool flag = false;
    double threshold = 0;
};

struct BlurResult {
    double ratio = 0;  // high-frequency energy of xhat relative to x
    bool flag = false;
    bool applicable = true;  // false when x has no high-frequency energy
    double threshold = 0;
    double cutoff = 0;
};

struct CornerResult {
    double ratio = 0;  // border-band mean |r| over interior mean |r|
    bool flag = false;
    double threshold = 0;
    int band = 0;
};

struct DropletResult {
    double score = 0;  // max robust z-score of window-mean |r|
    int loc_y = 0, loc_x = 0;
    bool flag = false;
    bool mad_fallback = false;  // MAD was zero, fell back to mean/std
    double threshold = 0;
    int window = 0;
};

struct ArtifactReport {
    ColorShiftResult color_shift;
    GridResult grid;
    BlurResult blur;
    CornerResult corner;
    DropletResult droplet;
    DetectorThresholds thresholds;
};

void to_json(nlohmann::json& j, const ArtifactReport& r);

ColorShiftResult detect_color_shift(const Image& x, const Image& xhat, double threshold);
GridResult detect_grid(const Image& x, const Image& xhat, int downscale_f, double threshold);
BlurResult detect_blur(const Image& x, const Image& xhat, double cutoff, double threshold);
CornerResult detect_corner(const Image& x, const Image& xhat, int band, double threshold);
DropletResult detect_droplet(const Image& x, const Image& xhat, int window, double threshold);

ArtifactReport diagnose(const Image& x, const Image& xhat, int downscale_f,
                        const DetectorThresholds& thr);

// Per-layer spatial-norm statistics of a decoder activation trace.
struct NormStats {
    struct Layer {
        std::string name;
        double max_norm = 0;
        double median_norm = 0;
        double outlier_ratio = 0;  // max / median
        int argmax_item = 0, argmax_y = 0, argmax_x = 0;
    };
    std::vector<Layer> layers;

    double max_outlier_ratio() const {
        double m = 0;
        for (const auto& l : layers) m = std::max(m, l.outlier_ratio);
        return m;
    }
};

NormStats norm_stats(const ActivationTrace& trace);

void to_json(nlohmann::json& j, const NormStats& s);

}  // namespace vivat
