#include "vivat/diagnostics/fft.hpp"

#include <fftw3.h>

#include "vivat/common.hpp"

namespace vivat {

std::vector<double> fft2_power(const std::vector<double>& data, int h, int w) {
    if (h < 1 || w < 1 || data.size() != static_cast<size_t>(h) * w)
        throw ValidationError("fft2_power: bad dimensions");
    const int wc = w / 2 + 1;
    std::vector<double> in = data;  // fftw may clobber input
    std::vector<fftw_complex> out(static_cast<size_t>(h) * wc);
    fftw_plan plan = fftw_plan_dft_r2c_2d(h, w, in.data(), out.data(), FFTW_ESTIMATE);
    if (!plan) throw Error("fft2_power: plan creation failed");
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    std::vector<double> power(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            int uu = u, vv = v;
            if (v >= wc) {  // hermitian mirror
                uu = (h - u) % h;
                vv = w - v;
            }
            const auto& c = out[static_cast<size_t>(uu) * wc + vv];
            power[static_cast<size_t>(u) * w + v] = c[0] * c[0] + c[1] * c[1];
        }
    return power;
}

}  // namespace vivat
