#include "vivat/io/checkpoint.hpp"

#include <zlib.h>

namespace vivat {

namespace detail {

uint32_t crc32_bytes(const uint8_t* data, size_t len) {
    return static_cast<uint32_t>(crc32(0, data, static_cast<uInt>(len)));
}

}  // namespace detail

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 9);
    detail::put_u32(out, kCheckpointVersion);
    // nlohmann objects keep keys sorted, so dump() is canonical
    std::string meta = ckpt.meta.dump();
    detail::put_u64(out, meta.size());
    out.insert(out.end(), meta.begin(), meta.end());
    detail::put_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        detail::put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        out.push_back(static_cast<uint8_t>(t.dtype));
        for (int d : t.dims) detail::put_u32(out, static_cast<uint32_t>(d));
        detail::put_u64(out, t.bytes.size());
        out.insert(out.end(), t.bytes.begin(), t.bytes.end());
    }
    detail::put_u32(out, detail::crc32_bytes(out.data(), out.size()));

    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("checkpoint: cannot open for write: " + tmp);
        f.write(reinterpret_cast<const char*>(out.data()),
                static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("checkpoint: write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("checkpoint: rename failed: " + ec.message());
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 9 + 4 + 4) throw IntegrityError("checkpoint: file too short: " + path);
    if (std::memcmp(bytes.data(), kCheckpointMagic, 9) != 0)
        throw IntegrityError("checkpoint: bad magic: " + path);

    // checksum covers everything up to the trailing crc field
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    uint32_t actual = detail::crc32_bytes(bytes.data(), bytes.size() - 4);
    if (stored != actual)
        throw IntegrityError("checkpoint: checksum mismatch (file corrupt): " + path);

    detail::Reader r{bytes.data(), bytes.size() - 4};
    r.pos = 9;
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint: file has format version " + std::to_string(version) +
                           ", this reader supports version " +
                           std::to_string(kCheckpointVersion));

    Checkpoint ckpt;
    uint64_t meta_len = r.u64();
    std::string meta = r.str(meta_len);
    try {
        ckpt.meta = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("checkpoint: bad metadata json: ") + e.what());
    }
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.str(r.u32());
        uint8_t dt = r.u8();
        if (dt > 1) throw IntegrityError("checkpoint: unknown dtype tag");
        t.dtype = static_cast<Dtype>(dt);
        for (int d = 0; d < 4; ++d) t.dims[d] = static_cast<int>(r.u32());
        t.bytes = r.blob(r.u64());
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace vivat
