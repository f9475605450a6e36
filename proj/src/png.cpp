#include "vivat/io/png.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "vivat/common.hpp"

namespace vivat {

namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<uint8_t>& out, const char type[4], const uint8_t* data, size_t len) {
    put_u32be(out, static_cast<uint32_t>(len));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    uint32_t crc = crc32(0, out.data() + start, static_cast<uInt>(4 + len));
    put_u32be(out, crc);
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png: deflate failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& comp, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf len = static_cast<uLongf>(expected);
    int rc = uncompress(out.data(), &len, comp.data(), static_cast<uLong>(comp.size()));
    if (rc != Z_OK || len != expected) throw IoError("png: inflate failed or size mismatch");
    return out;
}

void save_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("png: cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("png: write failed: " + path);
}

const uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void write_png_impl(const std::string& path, int w, int h, int bit_depth, int color_type,
                    const std::vector<uint8_t>& pixels, int bytes_per_row) {
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (bytes_per_row + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), pixels.begin() + static_cast<size_t>(y) * bytes_per_row,
                   pixels.begin() + static_cast<size_t>(y + 1) * bytes_per_row);
    }
    std::vector<uint8_t> out(kSig, kSig + 8);
    uint8_t ihdr[13];
    ihdr[0] = static_cast<uint8_t>(w >> 24);
    ihdr[1] = static_cast<uint8_t>(w >> 16);
    ihdr[2] = static_cast<uint8_t>(w >> 8);
    ihdr[3] = static_cast<uint8_t>(w);
    ihdr[4] = static_cast<uint8_t>(h >> 24);
    ihdr[5] = static_cast<uint8_t>(h >> 16);
    ihdr[6] = static_cast<uint8_t>(h >> 8);
    ihdr[7] = static_cast<uint8_t>(h);
    ihdr[8] = static_cast<uint8_t>(bit_depth);
    ihdr[9] = static_cast<uint8_t>(color_type);
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    write_chunk(out, "IHDR", ihdr, 13);
    auto idat = zlib_deflate(raw);
    write_chunk(out, "IDAT", idat.data(), idat.size());
    write_chunk(out, "IEND", nullptr, 0);
    save_bytes(path, out);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png_rgb8(const std::string& path, const Image& img) {
    if (img.n != 1 || img.c != 3) throw ShapeError("write_png_rgb8: need a (1,3,H,W) image");
    std::vector<uint8_t> pixels(static_cast<size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ci = 0; ci < 3; ++ci) {
                float v = img.at(0, ci, y, x);
                v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
                pixels[(static_cast<size_t>(y) * img.w + x) * 3 + ci] =
                    static_cast<uint8_t>(v * 255.0f + 0.5f);
            }
    write_png_impl(path, img.w, img.h, 8, 2, pixels, img.w * 3);
}

void write_png_gray16(const std::string& path, const TensorF& map, float lo, float hi) {
    if (map.n != 1 || map.c != 1) throw ShapeError("write_png_gray16: need a (1,1,H,W) map");
    float span = hi - lo;
    if (span <= 0) span = 1.0f;
    std::vector<uint8_t> pixels(static_cast<size_t>(map.h) * map.w * 2);
    for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x) {
            float v = (map.at(0, 0, y, x) - lo) / span;
            v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
            uint16_t q = static_cast<uint16_t>(v * 65535.0f + 0.5f);
            size_t i = (static_cast<size_t>(y) * map.w + x) * 2;
            pixels[i] = static_cast<uint8_t>(q >> 8);  // PNG samples are big-endian
            pixels[i + 1] = static_cast<uint8_t>(q);
        }
    write_png_impl(path, map.w, map.h, 16, 0, pixels, map.w * 2);
}

void write_raw_f32(const std::string& path, const TensorF& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("raw dump: cannot open for write: " + path);
    f << "f32 " << t.n << " " << t.c << " " << t.h << " " << t.w << "\n";
    f.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!f) throw IoError("raw dump: write failed: " + path);
}

Image read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("png: cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0)
        throw IoError("png: bad signature: " + path);

    int w = 0, h = 0, bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool seen_ihdr = false;
    while (pos + 12 <= bytes.size()) {
        uint32_t len = get_u32be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw IoError("png: truncated chunk: " + path);
        std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        const uint8_t* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            w = static_cast<int>(get_u32be(data));
            h = static_cast<int>(get_u32be(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw IoError("png: interlaced images unsupported: " + path);
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || w <= 0 || h <= 0) throw IoError("png: missing IHDR: " + path);

    int samples = 0;
    switch (color_type) {
        case 0: samples = 1; break;  // gray
        case 2: samples = 3; break;  // rgb
        case 4: samples = 2; break;  // gray+alpha
        case 6: samples = 4; break;  // rgba
        default: throw IoError("png: unsupported color type: " + path);
    }
    if (bit_depth != 8 && !(bit_depth == 16 && color_type == 0))
        throw IoError("png: unsupported bit depth: " + path);

    const int sample_bytes = bit_depth / 8;
    const int bpp = samples * sample_bytes;
    const size_t row_bytes = static_cast<size_t>(w) * bpp;
    auto raw = zlib_inflate(idat, static_cast<size_t>(h) * (row_bytes + 1));

    std::vector<uint8_t> img(static_cast<size_t>(h) * row_bytes);
    for (int y = 0; y < h; ++y) {
        uint8_t filter = raw[static_cast<size_t>(y) * (row_bytes + 1)];
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (row_bytes + 1) + 1;
        uint8_t* dst = img.data() + static_cast<size_t>(y) * row_bytes;
        const uint8_t* up = y > 0 ? dst - row_bytes : nullptr;
        for (size_t x = 0; x < row_bytes; ++x) {
            int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
            int b = up ? up[x] : 0;
            int c = (up && x >= static_cast<size_t>(bpp)) ? up[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw IoError("png: bad filter byte: " + path);
            }
            dst[x] = static_cast<uint8_t>(v);
        }
    }

    Image out(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const uint8_t* px = img.data() + static_cast<size_t>(y) * row_bytes +
                                static_cast<size_t>(x) * bpp;
            float r, g, b;
            if (color_type == 0 && bit_depth == 16) {
                float v = static_cast<float>((px[0] << 8) | px[1]) / 65535.0f;
                r = g = b = v;
            } else if (samples == 1) {
                r = g = b = px[0] / 255.0f;
            } else if (samples == 2) {
                r = g = b = px[0] / 255.0f;
            } else {
                r = px[0] / 255.0f;
                g = px[1] / 255.0f;
                b = px[2] / 255.0f;
            }
            out.at(0, 0, y, x) = r;
            out.at(0, 1, y, x) = g;
            out.at(0, 2, y, x) = b;
        }
    return out;
}

}  // namespace vivat
