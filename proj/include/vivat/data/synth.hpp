#pragma once

#include "vivat/tensor.hpp"

namespace vivat {

// Multi-octave band-limited value noise; keeps substantial energy up to half
// the Nyquist frequency (finest lattice spacing is 2 px).
struct SynthConfig {
    int size = 240;
    int octaves = 4;  // lattice spacings 2^octaves ... 2
    uint64_t seed = 0;

    void validate() const {
        if (size < 4) throw ConfigError("synth: size must be >= 4");
        if (octaves < 1 || octaves > 10) throw ConfigError("synth: octaves must be in [1,10]");
    }
};

// deterministic: same (seed, index) -> identical image, values in [0,1]
Image synth_texture(const SynthConfig& cfg, uint64_t index);

}  // namespace vivat
