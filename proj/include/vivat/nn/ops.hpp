#pragma once

#include <cmath>

#include "vivat/tensor.hpp"

namespace vivat {

enum class PadPolicy { zero, reflect };

inline const char* to_string(PadPolicy p) {
    return p == PadPolicy::zero ? "zero" : "reflect";
}

// mirror without edge repeat: -1 -> 1, -2 -> 2, n -> n-2
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// Pads the spatial dims by `width` on each side. Reflect mirrors without
// repeating the edge sample: [1,2,3] width 1 -> [2,1,2,3,2].
template <class T>
Tensor<T> pad2d(const Tensor<T>& x, int width, PadPolicy policy) {
    if (width < 0) throw ValidationError("pad2d: negative width");
    if (width == 0) return x;
    if (policy == PadPolicy::reflect && (x.h <= width || x.w <= width))
        throw ValidationError("pad2d: reflect width " + std::to_string(width) +
                              " must be smaller than spatial dims " + x.shape_str());
    Tensor<T> out(x.n, x.c, x.h + 2 * width, x.w + 2 * width);
    for (int i = 0; i < x.n; ++i) {
        for (int ci = 0; ci < x.c; ++ci) {
            const T* src = x.plane(i, ci);
            T* dst = out.plane(i, ci);
            for (int y = 0; y < out.h; ++y) {
                int sy = y - width;
                if (policy == PadPolicy::reflect) sy = reflect_index(sy, x.h);
                for (int xx = 0; xx < out.w; ++xx) {
                    int sx = xx - width;
                    if (policy == PadPolicy::reflect) sx = reflect_index(sx, x.w);
                    T val = T(0);
                    if (sy >= 0 && sy < x.h && sx >= 0 && sx < x.w) val = src[sy * x.w + sx];
                    dst[y * out.w + xx] = val;
                }
            }
        }
    }
    return out;
}

// Scatters gradients of a padded tensor back onto the unpadded source.
template <class T>
Tensor<T> pad2d_backward(const Tensor<T>& gpad, int width, PadPolicy policy, int h, int w) {
    Tensor<T> gx(gpad.n, gpad.c, h, w);
    for (int i = 0; i < gpad.n; ++i) {
        for (int ci = 0; ci < gpad.c; ++ci) {
            const T* src = gpad.plane(i, ci);
            T* dst = gx.plane(i, ci);
            for (int y = 0; y < gpad.h; ++y) {
                int sy = y - width;
                if (policy == PadPolicy::reflect)
                    sy = reflect_index(sy, h);
                else if (sy < 0 || sy >= h)
                    continue;
                for (int xx = 0; xx < gpad.w; ++xx) {
                    int sx = xx - width;
                    if (policy == PadPolicy::reflect)
                        sx = reflect_index(sx, w);
                    else if (sx < 0 || sx >= w)
                        continue;
                    dst[sy * w + sx] += src[y * gpad.w + xx];
                }
            }
        }
    }
    return gx;
}

template <class T>
T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// silu(x) = x * sigmoid(x)
template <class T>
struct SiLU {
    Tensor<T> x_cache;

    Tensor<T> forward(const Tensor<T>& x) {
        x_cache = x;
        Tensor<T> out = x;
        for (auto& e : out.v) e = e * sigmoid(e);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gy) const {
        Tensor<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i) {
            T s = sigmoid(x_cache.v[i]);
            gx.v[i] *= s * (T(1) + x_cache.v[i] * (T(1) - s));
        }
        return gx;
    }
};

template <class T>
struct LeakyReLU {
    T slope;
    Tensor<T> x_cache;
    explicit LeakyReLU(T slope_ = T(0.2)) : slope(slope_) {}

    Tensor<T> forward(const Tensor<T>& x) {
        x_cache = x;
        Tensor<T> out = x;
        for (auto& e : out.v)
            if (e < T(0)) e *= slope;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gy) const {
        Tensor<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i)
            if (x_cache.v[i] < T(0)) gx.v[i] *= slope;
        return gx;
    }
};

// Nearest-neighbor upsample by an integer factor.
template <class T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
    if (factor < 1) throw ValidationError("upsample_nearest: factor must be >= 1");
    Tensor<T> out(x.n, x.c, x.h * factor, x.w * factor);
    for (int i = 0; i < x.n; ++i)
        for (int ci = 0; ci < x.c; ++ci) {
            const T* src = x.plane(i, ci);
            T* dst = out.plane(i, ci);
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    dst[y * out.w + xx] = src[(y / factor) * x.w + xx / factor];
        }
    return out;
}

template <class T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& gy, int factor) {
    Tensor<T> gx(gy.n, gy.c, gy.h / factor, gy.w / factor);
    for (int i = 0; i < gy.n; ++i)
        for (int ci = 0; ci < gy.c; ++ci) {
            const T* src = gy.plane(i, ci);
            T* dst = gx.plane(i, ci);
            for (int y = 0; y < gy.h; ++y)
                for (int xx = 0; xx < gy.w; ++xx)
                    dst[(y / factor) * gx.w + xx / factor] += src[y * gy.w + xx];
        }
    return gx;
}

}  // namespace vivat
