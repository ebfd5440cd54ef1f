#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hazerf {

/// Interleaved, row-major, top row first.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// Linear-light 16-bit PNG; values are clamped to [0, 1] and stored as
/// round(v * 65535). Also writes `<path>.txt` describing the encoding.
void write_png16(const std::filesystem::path& path, const Image& img);
/// Any 8- or 16-bit PNG, decoded as v / (2^bits - 1).
Image read_png(const std::filesystem::path& path);
/// Single-channel 8-bit PNG with values {0, 255}.
void write_mask_png(const std::filesystem::path& path, const Image& mask);

/// Single-channel little-endian PFM (scale -1), rows stored bottom to top.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

std::uint32_t file_crc32(const std::filesystem::path& path);

}  // namespace hazerf
