#pragma once

#include <string>

#include "vivat/tensor.hpp"

namespace vivat {

// 8-bit RGB (color types gray / gray+alpha / RGB / RGBA, plus 16-bit gray),
// non-interlaced. Returns a (1,3,H,W) float image in [0,1].
Image read_png(const std::string& path);

void write_png_rgb8(const std::string& path, const Image& img);

// heatmap export: map values linearly from [lo,hi] onto the 16-bit range
void write_png_gray16(const std::string& path, const TensorF& map, float lo, float hi);

// raw float32 dump with a one-line text header "f32 <n> <c> <h> <w>\n"
void write_raw_f32(const std::string& path, const TensorF& t);

}  // namespace vivat
