#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vivat/data/preprocess.hpp"
#include "vivat/data/synth.hpp"

namespace vivat {

struct DatasetSource {
    enum class Kind { directory, synthetic };
    Kind kind = Kind::synthetic;
    std::string root;      // directory of PNGs
    std::string manifest;  // optional: one relative path per line
    SynthConfig synth;
    int count = 1000;  // synthetic item count
    uint64_t shuffle_seed = 0;
};

// Deterministic dataset: item order, per-epoch shuffles and random crop
// offsets are all pure functions of (seed, epoch, index), so resuming from a
// step counter reproduces the exact batch sequence.
class Dataset {
public:
    Dataset(const DatasetSource& src, const PreprocessSpec& spec);

    size_t size() const { return size_; }
    const PreprocessSpec& spec() const { return spec_; }
    const DatasetSource& source() const { return src_; }

    // preprocessed crop_size x crop_size image
    Image item(size_t index, uint64_t epoch = 0) const;
    std::string item_name(size_t index) const;

    // batch at a global step position; wraps epochs with per-epoch shuffles
    TensorF batch(int64_t step, int batch_size) const;

private:
    std::vector<size_t> epoch_perm(uint64_t epoch) const;

    DatasetSource src_;
    PreprocessSpec spec_;
    size_t size_ = 0;
    std::vector<std::string> files_;
    mutable std::vector<std::optional<Image>> cache_;  // synthetic items only
};

}  // namespace vivat
