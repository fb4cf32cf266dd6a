#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssr {

// 8-bit RGB raster, row-major, 3 bytes per pixel
struct Rgb8 {
    int h = 0, w = 0;
    std::vector<uint8_t> px;  // h*w*3
};

// 16-bit grayscale raster, row-major
struct Gray16 {
    int h = 0, w = 0;
    std::vector<uint16_t> px;  // h*w
};

// Binary netpbm (P6 / P5 maxval 65535). Chosen over compressed formats so the
// emitted bytes are a pure function of the pixel data.
void write_ppm8(const std::string& path, const Rgb8& img);
Rgb8 read_ppm8(const std::string& path);
void write_pgm16(const std::string& path, const Gray16& img);
Gray16 read_pgm16(const std::string& path);

// linear quantization of a positive depth map onto the 16-bit grid
Gray16 depth_to_gray16(const std::vector<float>& depth, int h, int w, float dmin, float dmax);
std::vector<float> gray16_to_depth(const Gray16& img, float dmin, float dmax);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace ssr
