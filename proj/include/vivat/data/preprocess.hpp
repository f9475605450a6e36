#pragma once

#include "vivat/rng.hpp"
#include "vivat/tensor.hpp"

namespace vivat {

enum class ResizeFilter { bicubic, bilinear, nearest };
enum class CropMode { random, center };

inline const char* to_string(ResizeFilter f) {
    switch (f) {
        case ResizeFilter::bicubic: return "bicubic";
        case ResizeFilter::bilinear: return "bilinear";
        default: return "nearest";
    }
}
inline const char* to_string(CropMode m) { return m == CropMode::random ? "random" : "center"; }

struct PreprocessSpec {
    int intermediate_short_side = 480;
    int crop_size = 240;
    ResizeFilter resize_filter = ResizeFilter::bicubic;
    CropMode crop_mode = CropMode::random;
    // ablation-only anti-pattern: crop the target window straight out of the
    // large source instead of resize-then-crop
    bool crop_before_resize = false;

    void validate() const {
        if (crop_size <= 0 || intermediate_short_side <= 0)
            throw ConfigError("preprocess: sizes must be positive");
        if (crop_size > intermediate_short_side)
            throw ConfigError("preprocess: crop_size must be <= intermediate_short_side");
    }
};

// separable resize to an exact target; bicubic is Catmull-Rom (a = -0.5)
Image resize(const Image& img, int out_h, int out_w, ResizeFilter filter);

// short side lands on `short_side`, the long side keeps the aspect ratio
// (rounded to nearest); identity when already at target
Image resize_proportional(const Image& img, int short_side, ResizeFilter filter);

Image crop(const Image& img, int size, CropMode mode, Rng& rng);

// resize-then-crop pipeline (or the ablation order when configured)
Image preprocess(const Image& img, const PreprocessSpec& spec, Rng& rng);

// separable gaussian blur with edge clamp; used by detector calibration
Image gaussian_blur(const Image& img, double sigma);

}  // namespace vivat
