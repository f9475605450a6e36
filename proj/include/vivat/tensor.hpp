#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <new>
#include <string>
#include <vector>

#include "vivat/common.hpp"
#include "vivat/rng.hpp"

namespace vivat {

// 64-byte aligned storage. Keeping every tensor buffer identically aligned
// makes the vectorized GEMM kernels take the same code path for the same
// shapes, which is what makes training trajectories bit-reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}
    T* allocate(size_t n) {
        void* p = std::aligned_alloc(64, ((n * sizeof(T) + 63) / 64) * 64);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, size_t) { std::free(p); }
    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

template <class T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

// Dense NCHW tensor. Parameters reuse the same layout: a conv weight is
// (out_ch, in_ch, kh, kw), a bias is (1, ch, 1, 1).
template <class T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    AlignedVec<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t numel() const { return v.size(); }
    bool empty() const { return v.empty(); }

    T& at(int i, int ci, int y, int x) {
        return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
    }
    T at(int i, int ci, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
    }

    T* plane(int i, int ci) { return v.data() + (static_cast<size_t>(i) * c + ci) * h * w; }
    const T* plane(int i, int ci) const {
        return v.data() + (static_cast<size_t>(i) * c + ci) * h * w;
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
               "," + std::to_string(w) + ")";
    }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }
    void zero() { fill(T(0)); }

    Tensor like_zeros() const { return Tensor(n, c, h, w); }

    void add_(const Tensor& o) {
        require_same_shape(o, "add_");
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    }
    void axpy_(T a, const Tensor& o) {
        require_same_shape(o, "axpy_");
        for (size_t i = 0; i < v.size(); ++i) v[i] += a * o.v[i];
    }
    void scale_(T a) {
        for (auto& x : v) x *= a;
    }

    bool all_finite() const {
        for (const auto& x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    void fill_normal(Rng& rng, T stddev = T(1)) {
        for (auto& x : v) x = static_cast<T>(rng.normal() * static_cast<double>(stddev));
    }

    void require_same_shape(const Tensor& o, const char* who) const {
        if (!same_shape(o))
            throw ShapeError(std::string(who) + ": shape mismatch " + shape_str() + " vs " +
                             o.shape_str());
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Images are float tensors with n=1, c=3 (CHW), values in [0,1].
using Image = Tensor<float>;

// stack two tensors along the batch dim
template <class T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.c != b.c || a.h != b.h || a.w != b.w)
        throw ShapeError("concat_batch: " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> out(a.n + b.n, a.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

template <class T>
Tensor<T> slice_batch(const Tensor<T>& x, int start, int count) {
    if (start < 0 || start + count > x.n) throw ShapeError("slice_batch: out of range");
    Tensor<T> out(count, x.c, x.h, x.w);
    size_t item = static_cast<size_t>(x.c) * x.h * x.w;
    std::copy(x.v.begin() + start * item, x.v.begin() + (start + count) * item, out.v.begin());
    return out;
}

template <class T>
Tensor<T> clamp01(const Tensor<T>& x) {
    Tensor<T> out = x;
    for (auto& e : out.v) e = e < T(0) ? T(0) : (e > T(1) ? T(1) : e);
    return out;
}

}  // namespace vivat
