#include "vivat/data/synth.hpp"

#include <cmath>

#include "vivat/rng.hpp"

namespace vivat {

Image synth_texture(const SynthConfig& cfg, uint64_t index) {
    cfg.validate();
    Image out(1, 3, cfg.size, cfg.size);

    double total_var = 0;
    for (int o = 0; o < cfg.octaves; ++o) total_var += std::pow(0.55, 2.0 * o);
    const double inv_rms = 1.0 / std::sqrt(total_var);

    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> field(static_cast<size_t>(cfg.size) * cfg.size, 0.0);
        for (int o = 0; o < cfg.octaves; ++o) {
            const int spacing = 1 << (cfg.octaves - o);
            const int nodes = cfg.size / spacing + 2;
            const double amp = std::pow(0.55, o);
            Rng rng(derive_seed(cfg.seed, (index << 8) ^ (static_cast<uint64_t>(ch) << 4) ^
                                              static_cast<uint64_t>(o)));
            std::vector<double> lattice(static_cast<size_t>(nodes) * nodes);
            for (auto& v : lattice) v = rng.normal();
            for (int y = 0; y < cfg.size; ++y) {
                const double fy = static_cast<double>(y) / spacing;
                const int y0 = static_cast<int>(fy);
                const double ty = fy - y0;
                for (int x = 0; x < cfg.size; ++x) {
                    const double fx = static_cast<double>(x) / spacing;
                    const int x0 = static_cast<int>(fx);
                    const double tx = fx - x0;
                    const double v00 = lattice[static_cast<size_t>(y0) * nodes + x0];
                    const double v01 = lattice[static_cast<size_t>(y0) * nodes + x0 + 1];
                    const double v10 = lattice[static_cast<size_t>(y0 + 1) * nodes + x0];
                    const double v11 = lattice[static_cast<size_t>(y0 + 1) * nodes + x0 + 1];
                    const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                                     ty * ((1 - tx) * v10 + tx * v11);
                    field[static_cast<size_t>(y) * cfg.size + x] += amp * v;
                }
            }
        }
        for (int y = 0; y < cfg.size; ++y)
            for (int x = 0; x < cfg.size; ++x) {
                double v = field[static_cast<size_t>(y) * cfg.size + x] * inv_rms;
                out.at(0, ch, y, x) = static_cast<float>(0.5 + 0.5 * std::tanh(0.9 * v));
            }
    }
    return out;
}

}  // namespace vivat
