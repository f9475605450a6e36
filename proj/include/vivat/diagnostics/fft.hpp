#pragma once

#include <vector>

namespace vivat {

// 2D power spectrum |F|^2 of a real h x w map, full plane, DC at index (0,0).
std::vector<double> fft2_power(const std::vector<double>& data, int h, int w);

}  // namespace vivat
