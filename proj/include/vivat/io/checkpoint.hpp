#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "vivat/common.hpp"
#include "vivat/tensor.hpp"

namespace vivat {

// Checkpoint container: "VIVATCKPT" magic, u32 format version, canonical JSON
// metadata, named tensors with explicit dtype and shape, all little-endian,
// closed by a crc32 of every preceding byte. Writes are atomic
// (temp file + rename).
inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[] = "VIVATCKPT";

enum class Dtype : uint8_t { f32 = 0, f64 = 1 };

template <class T>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() {
    return Dtype::f32;
}
template <>
constexpr Dtype dtype_of<double>() {
    return Dtype::f64;
}

inline const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

struct NamedTensor {
    std::string name;
    Dtype dtype = Dtype::f32;
    int dims[4] = {0, 0, 0, 0};
    std::vector<uint8_t> bytes;

    template <class T>
    static NamedTensor from(const std::string& name, const Tensor<T>& t) {
        NamedTensor out;
        out.name = name;
        out.dtype = dtype_of<T>();
        out.dims[0] = t.n;
        out.dims[1] = t.c;
        out.dims[2] = t.h;
        out.dims[3] = t.w;
        out.bytes.resize(t.v.size() * sizeof(T));
        std::memcpy(out.bytes.data(), t.v.data(), out.bytes.size());
        return out;
    }

    template <class T>
    Tensor<T> to() const {
        if (dtype != dtype_of<T>())
            throw VersionError("checkpoint tensor '" + name + "' has dtype " +
                               dtype_name(dtype) + ", expected " + dtype_name(dtype_of<T>()));
        Tensor<T> t(dims[0], dims[1], dims[2], dims[3]);
        if (bytes.size() != t.v.size() * sizeof(T))
            throw IntegrityError("checkpoint tensor '" + name + "' has inconsistent size");
        std::memcpy(t.v.data(), bytes.data(), bytes.size());
        return t;
    }
};

struct Checkpoint {
    nlohmann::json meta;
    std::vector<NamedTensor> tensors;

    const NamedTensor& find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw IntegrityError("checkpoint: missing tensor '" + name + "'");
    }
};

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

struct Reader {
    const uint8_t* p;
    size_t n, pos = 0;
    void need(size_t k) const {
        if (pos + k > n) throw IntegrityError("checkpoint: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    uint8_t u8() {
        need(1);
        return p[pos++];
    }
    std::string str(size_t k) {
        need(k);
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
    std::vector<uint8_t> blob(size_t k) {
        need(k);
        std::vector<uint8_t> b(p + pos, p + pos + k);
        pos += k;
        return b;
    }
};

uint32_t crc32_bytes(const uint8_t* data, size_t len);  // zlib-backed, in src/

}  // namespace detail

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace vivat
