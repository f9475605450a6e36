#include "vivat/data/preprocess.hpp"

#include <cmath>

namespace vivat {

namespace {

// Catmull-Rom kernel (bicubic with a = -0.5)
double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

double linear_weight(double t) {
    t = std::abs(t);
    return t < 1.0 ? 1.0 - t : 0.0;
}

struct Tap {
    int idx;
    double w;
};

// sample positions and kernel weights for one output coordinate
int taps_for(double src, ResizeFilter filter, int in_dim, Tap taps[4]) {
    switch (filter) {
        case ResizeFilter::nearest: {
            int i = static_cast<int>(std::floor(src + 0.5));
            taps[0] = {std::clamp(i, 0, in_dim - 1), 1.0};
            return 1;
        }
        case ResizeFilter::bilinear: {
            int i0 = static_cast<int>(std::floor(src));
            int count = 0;
            for (int i = i0; i <= i0 + 1; ++i) {
                double w = linear_weight(src - i);
                if (w > 0) taps[count++] = {std::clamp(i, 0, in_dim - 1), w};
            }
            return count;
        }
        default: {
            int i0 = static_cast<int>(std::floor(src)) - 1;
            int count = 0;
            for (int i = i0; i < i0 + 4; ++i)
                taps[count++] = {std::clamp(i, 0, in_dim - 1), cubic_weight(src - i)};
            return count;
        }
    }
}

}  // namespace

Image resize(const Image& img, int out_h, int out_w, ResizeFilter filter) {
    if (out_h <= 0 || out_w <= 0) throw ValidationError("resize: non-positive target size");
    if (img.h < 1 || img.w < 1) throw ValidationError("resize: empty source");
    if (out_h == img.h && out_w == img.w) return img;

    // horizontal pass
    Image mid(1, img.c, img.h, out_w);
    const double sx = static_cast<double>(img.w) / out_w;
    for (int x = 0; x < out_w; ++x) {
        Tap taps[4];
        int nt = taps_for((x + 0.5) * sx - 0.5, filter, img.w, taps);
        for (int ci = 0; ci < img.c; ++ci) {
            const float* src = img.plane(0, ci);
            float* dst = mid.plane(0, ci);
            for (int y = 0; y < img.h; ++y) {
                double acc = 0;
                for (int t = 0; t < nt; ++t) acc += taps[t].w * src[y * img.w + taps[t].idx];
                dst[y * out_w + x] = static_cast<float>(acc);
            }
        }
    }
    // vertical pass
    Image out(1, img.c, out_h, out_w);
    const double sy = static_cast<double>(img.h) / out_h;
    for (int y = 0; y < out_h; ++y) {
        Tap taps[4];
        int nt = taps_for((y + 0.5) * sy - 0.5, filter, img.h, taps);
        for (int ci = 0; ci < img.c; ++ci) {
            const float* src = mid.plane(0, ci);
            float* dst = out.plane(0, ci);
            for (int x = 0; x < out_w; ++x) {
                double acc = 0;
                for (int t = 0; t < nt; ++t) acc += taps[t].w * src[taps[t].idx * out_w + x];
                dst[y * out_w + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Image resize_proportional(const Image& img, int short_side, ResizeFilter filter) {
    if (short_side <= 0) throw ValidationError("resize_proportional: non-positive target");
    const int s = std::min(img.h, img.w);
    if (s == short_side) return img;
    const double scale = static_cast<double>(short_side) / s;
    int out_h, out_w;
    if (img.h <= img.w) {
        out_h = short_side;
        out_w = static_cast<int>(std::lround(img.w * scale));
    } else {
        out_w = short_side;
        out_h = static_cast<int>(std::lround(img.h * scale));
    }
    return resize(img, out_h, out_w, filter);
}

Image crop(const Image& img, int size, CropMode mode, Rng& rng) {
    if (img.h < size || img.w < size)
        throw ValidationError("crop: image " + img.shape_str() + " smaller than crop " +
                              std::to_string(size));
    int oy, ox;
    if (mode == CropMode::center) {
        oy = (img.h - size) / 2;
        ox = (img.w - size) / 2;
    } else {
        oy = static_cast<int>(rng.uniform_int(0, img.h - size));
        ox = static_cast<int>(rng.uniform_int(0, img.w - size));
    }
    Image out(1, img.c, size, size);
    for (int ci = 0; ci < img.c; ++ci)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                out.at(0, ci, y, x) = img.at(0, ci, oy + y, ox + x);
    return out;
}

Image preprocess(const Image& img, const PreprocessSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.crop_before_resize) return crop(img, spec.crop_size, spec.crop_mode, rng);
    Image mid = resize_proportional(img, spec.intermediate_short_side, spec.resize_filter);
    return crop(mid, spec.crop_size, spec.crop_mode, rng);
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    Image mid(1, img.c, img.h, img.w);
    for (int ci = 0; ci < img.c; ++ci)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * img.at(0, ci, y, std::clamp(x + i, 0, img.w - 1));
                mid.at(0, ci, y, x) = static_cast<float>(acc);
            }
    Image out(1, img.c, img.h, img.w);
    for (int ci = 0; ci < img.c; ++ci)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * mid.at(0, ci, std::clamp(y + i, 0, img.h - 1), x);
                out.at(0, ci, y, x) = static_cast<float>(acc);
            }
    return out;
}

}  // namespace vivat
