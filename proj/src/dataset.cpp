#include "vivat/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "vivat/io/png.hpp"

namespace vivat {

namespace fs = std::filesystem;

Dataset::Dataset(const DatasetSource& src, const PreprocessSpec& spec)
    : src_(src), spec_(spec) {
    spec_.validate();
    if (src.kind == DatasetSource::Kind::synthetic) {
        if (src.count < 1) throw ConfigError("dataset: synthetic count must be >= 1");
        size_ = static_cast<size_t>(src.count);
        cache_.resize(size_);
    } else {
        if (!src.manifest.empty()) {
            std::ifstream f(src.manifest);
            if (!f) throw IoError("dataset: cannot open manifest: " + src.manifest);
            std::string line;
            while (std::getline(f, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (!line.empty()) files_.push_back(line);
            }
        } else {
            if (!fs::is_directory(src.root))
                throw IoError("dataset: not a directory: " + src.root);
            for (const auto& e : fs::directory_iterator(src.root)) {
                if (!e.is_regular_file()) continue;
                auto ext = e.path().extension().string();
                std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
                if (ext == ".png") files_.push_back(e.path().filename().string());
            }
            std::sort(files_.begin(), files_.end());
        }
        if (files_.empty()) throw IoError("dataset: no images found under " + src.root);
        size_ = files_.size();
    }
}

std::string Dataset::item_name(size_t index) const {
    if (src_.kind == DatasetSource::Kind::synthetic)
        return "synth_" + std::to_string(index);
    return files_.at(index);
}

Image Dataset::item(size_t index, uint64_t epoch) const {
    if (index >= size_) throw ValidationError("dataset: index out of range");
    if (src_.kind == DatasetSource::Kind::synthetic) {
        if (!cache_[index]) {
            SynthConfig cfg = src_.synth;
            cfg.size = spec_.crop_size;
            cache_[index] = synth_texture(cfg, index);
        }
        return *cache_[index];
    }
    Image img = read_png((fs::path(src_.root) / files_[index]).string());
    // crop offsets keyed by (seed, epoch, index): stateless and resumable
    Rng rng(derive_seed(src_.shuffle_seed ^ 0xc509ULL, epoch * 0x1000003ULL + index));
    return preprocess(img, spec_, rng);
}

std::vector<size_t> Dataset::epoch_perm(uint64_t epoch) const {
    std::vector<size_t> perm(size_);
    for (size_t i = 0; i < size_; ++i) perm[i] = i;
    Rng rng(derive_seed(src_.shuffle_seed, epoch));
    for (size_t i = size_; i > 1; --i)
        std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(0, i - 1))]);
    return perm;
}

TensorF Dataset::batch(int64_t step, int batch_size) const {
    if (batch_size < 1) throw ValidationError("dataset: batch_size must be >= 1");
    TensorF out(batch_size, 3, spec_.crop_size, spec_.crop_size);
    uint64_t cached_epoch = ~0ULL;
    std::vector<size_t> perm;
    for (int j = 0; j < batch_size; ++j) {
        const uint64_t g = static_cast<uint64_t>(step) * batch_size + j;
        const uint64_t epoch = g / size_;
        const size_t pos = g % size_;
        if (epoch != cached_epoch) {
            perm = epoch_perm(epoch);
            cached_epoch = epoch;
        }
        Image img = item(perm[pos], epoch);
        std::copy(img.v.begin(), img.v.end(), out.plane(j, 0));
    }
    return out;
}

}  // namespace vivat
