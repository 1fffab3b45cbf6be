#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace segpipe {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t& at(int col, int row) { return pixels[static_cast<std::size_t>(row) * width + col]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// 8-bit grayscale PNG. Colour inputs are converted to luminance on read.
GrayImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);

// (width, height) from the PNG header without decoding pixels.
std::pair<int, int> read_png_size(const std::filesystem::path& path);

}  // namespace segpipe
