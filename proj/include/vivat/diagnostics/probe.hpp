#pragma once

#include "vivat/diagnostics/detectors.hpp"
#include "vivat/model/vae.hpp"

namespace vivat {

// Constant-input probe for the padding mechanism: runs a flat image through
// encoder and decoder and reports, per stage, how far activations deviate
// from spatial uniformity and how strongly the border band differs from the
// interior. Reflect padding keeps every stage uniform; zero padding does not.
struct ProbeStage {
    std::string name;
    double max_rel_deviation = 0;    // max |a - mean| / max(|mean|, eps) over positions
    double border_ratio = 1.0;       // direction-free: max(border/interior, interior/border)
};

namespace detail {

inline void probe_map(const TensorF& map, int band, ProbeStage& out) {
    const double eps = 1e-12;
    for (int i = 0; i < map.n; ++i) {
        double mean = 0;
        const float* p = map.plane(i, 0);
        const size_t hw = static_cast<size_t>(map.h) * map.w;
        for (size_t k = 0; k < hw; ++k) mean += p[k];
        mean /= static_cast<double>(hw);
        double dev = 0;
        for (size_t k = 0; k < hw; ++k) dev = std::max(dev, std::abs(p[k] - mean));
        out.max_rel_deviation =
            std::max(out.max_rel_deviation, dev / std::max(std::abs(mean), eps));

        const int b = std::max(1, std::min({band, map.h / 4, map.w / 4}));
        double border = 0, interior = 0;
        size_t nb = 0, ni = 0;
        for (int y = 0; y < map.h; ++y)
            for (int x = 0; x < map.w; ++x) {
                const int d = std::min({y, x, map.h - 1 - y, map.w - 1 - x});
                double v = p[static_cast<size_t>(y) * map.w + x];
                if (d < b) {
                    border += v;
                    ++nb;
                } else {
                    interior += v;
                    ++ni;
                }
            }
        if (nb == 0 || ni == 0) continue;
        border /= static_cast<double>(nb);
        interior /= static_cast<double>(ni);
        double ratio;
        if (border <= eps && interior <= eps)
            ratio = 1.0;
        else if (border <= eps || interior <= eps)
            ratio = 1e6;
        else
            ratio = std::max(border / interior, interior / border);
        out.border_ratio = std::max(out.border_ratio, ratio);
    }
}

}  // namespace detail

template <class T>
std::vector<ProbeStage> constant_input_probe(VAEModel<T>& model, int size, T value,
                                             int band = 2) {
    Tensor<T> x(1, model.config().input_channels, size, size, value);
    LatentDistribution<T> dist = model.encode(x);

    std::vector<ProbeStage> stages;
    ProbeStage enc;
    enc.name = "enc.mu";
    detail::probe_map(channel_l2_map(dist.mu), band, enc);
    stages.push_back(enc);

    ActivationTrace trace;
    model.decode(dist.mu, &trace);
    for (const auto& [name, map] : trace.layers) {
        ProbeStage st;
        st.name = name;
        detail::probe_map(map, band, st);
        stages.push_back(st);
    }
    return stages;
}

}  // namespace vivat
