#include "ssr/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ssr/common.hpp"

namespace ssr {

void write_file_atomic(const std::string& path, const std::string& bytes) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) fail_runtime("cannot open for writing: " + tmp);
        os.write(bytes.data(), std::streamsize(bytes.size()));
        if (!os) fail_runtime("short write: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail_runtime("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_runtime("cannot open file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_ppm8(const std::string& path, const Rgb8& img) {
    if (img.h <= 0 || img.w <= 0 || img.px.size() != size_t(img.h) * size_t(img.w) * 3)
        fail_validation("write_ppm8: inconsistent raster");
    std::string out = strf("P6\n%d %d\n255\n", img.w, img.h);
    out.append(reinterpret_cast<const char*>(img.px.data()), img.px.size());
    write_file_atomic(path, out);
}

void write_pgm16(const std::string& path, const Gray16& img) {
    if (img.h <= 0 || img.w <= 0 || img.px.size() != size_t(img.h) * size_t(img.w))
        fail_validation("write_pgm16: inconsistent raster");
    std::string out = strf("P5\n%d %d\n65535\n", img.w, img.h);
    // 16-bit netpbm samples are big-endian
    for (uint16_t v : img.px) {
        out.push_back(char(v >> 8));
        out.push_back(char(v & 0xff));
    }
    write_file_atomic(path, out);
}

namespace {

// reads one whitespace-delimited netpbm header field, skipping '#' comments
int read_pnm_field(std::istream& is, const std::string& path) {
    int c = is.get();
    while (c == '#' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        if (c == '#')
            while (c != '\n' && c != EOF) c = is.get();
        c = is.get();
    }
    int val = 0;
    bool any = false;
    while (c >= '0' && c <= '9') {
        val = val * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) fail_runtime("malformed netpbm header: " + path);
    return val;
}

}  // namespace

Rgb8 read_ppm8(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_runtime("cannot open image: " + path);
    char m0 = char(is.get()), m1 = char(is.get());
    if (m0 != 'P' || m1 != '6') fail_runtime("not a P6 ppm: " + path);
    Rgb8 img;
    img.w = read_pnm_field(is, path);
    img.h = read_pnm_field(is, path);
    int maxv = read_pnm_field(is, path);
    if (maxv != 255) fail_runtime("unsupported ppm maxval: " + path);
    img.px.resize(size_t(img.h) * size_t(img.w) * 3);
    is.read(reinterpret_cast<char*>(img.px.data()), std::streamsize(img.px.size()));
    if (size_t(is.gcount()) != img.px.size()) fail_runtime("truncated ppm: " + path);
    return img;
}

Gray16 read_pgm16(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_runtime("cannot open image: " + path);
    char m0 = char(is.get()), m1 = char(is.get());
    if (m0 != 'P' || m1 != '5') fail_runtime("not a P5 pgm: " + path);
    Gray16 img;
    img.w = read_pnm_field(is, path);
    img.h = read_pnm_field(is, path);
    int maxv = read_pnm_field(is, path);
    if (maxv != 65535) fail_runtime("unsupported pgm maxval: " + path);
    size_t n = size_t(img.h) * size_t(img.w);
    std::vector<uint8_t> raw(n * 2);
    is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (size_t(is.gcount()) != raw.size()) fail_runtime("truncated pgm: " + path);
    img.px.resize(n);
    for (size_t i = 0; i < n; ++i) img.px[i] = uint16_t((raw[2 * i] << 8) | raw[2 * i + 1]);
    return img;
}

Gray16 depth_to_gray16(const std::vector<float>& depth, int h, int w, float dmin, float dmax) {
    if (depth.size() != size_t(h) * size_t(w)) fail_validation("depth_to_gray16: size mismatch");
    Gray16 img;
    img.h = h;
    img.w = w;
    img.px.resize(depth.size());
    float range = dmax - dmin;
    for (size_t i = 0; i < depth.size(); ++i) {
        if (range <= 0.0f) {
            img.px[i] = 0;
            continue;
        }
        float t = (depth[i] - dmin) / range;
        long v = lroundf(t * 65535.0f);
        if (v < 0) v = 0;
        if (v > 65535) v = 65535;
        img.px[i] = uint16_t(v);
    }
    return img;
}

std::vector<float> gray16_to_depth(const Gray16& img, float dmin, float dmax) {
    std::vector<float> out(img.px.size());
    float range = dmax - dmin;
    for (size_t i = 0; i < img.px.size(); ++i)
        out[i] = range <= 0.0f ? dmin : dmin + (float(img.px[i]) / 65535.0f) * range;
    return out;
}

}  // namespace ssr
