#include "segpipe/image.hpp"

#include "segpipe/error.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace segpipe {

GrayImage::GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw Error(Errc::InvalidDimensions, "image dimensions must be positive");
    }
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw Error(Errc::IoFailure, "cannot open " + path.string());
    }
    return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what != nullptr) {
        *what = msg;
    }
    png_longjmp(png, 1);
}

struct ReadHandles {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~ReadHandles() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct WriteHandles {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~WriteHandles() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

}  // namespace

GrayImage read_png(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    std::string message;
    ReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    if (h.png == nullptr) {
        throw Error(Errc::IoFailure, "libpng init failed");
    }
    h.info = png_create_info_struct(h.png);
    GrayImage image;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(h.png))) {
        throw Error(Errc::IoFailure, path.string() + ": " + message);
    }
    png_init_io(h.png, file.get());
    png_read_info(h.png, h.info);

    const png_byte color = png_get_color_type(h.png, h.info);
    const png_byte depth = png_get_bit_depth(h.png, h.info);
    if (depth == 16) {
        png_set_strip_16(h.png);
    }
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(h.png);
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(h.png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(h.png);
    }
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(h.png, 1, -1, -1);
    }
    png_read_update_info(h.png, h.info);

    image = GrayImage(static_cast<int>(png_get_image_width(h.png, h.info)),
                      static_cast<int>(png_get_image_height(h.png, h.info)));
    rows.resize(static_cast<std::size_t>(image.height));
    for (int r = 0; r < image.height; ++r) {
        rows[r] = image.pixels.data() + static_cast<std::size_t>(r) * image.width;
    }
    png_read_image(h.png, rows.data());
    png_read_end(h.png, nullptr);
    return image;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    FilePtr file = open_file(path, "wb");
    std::string message;
    WriteHandles h;
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    if (h.png == nullptr) {
        throw Error(Errc::IoFailure, "libpng init failed");
    }
    h.info = png_create_info_struct(h.png);
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    if (setjmp(png_jmpbuf(h.png))) {
        throw Error(Errc::IoFailure, path.string() + ": " + message);
    }
    png_init_io(h.png, file.get());
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(h.png, h.info);
    for (int r = 0; r < image.height; ++r) {
        rows[r] = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(r) * image.width);
    }
    png_write_image(h.png, rows.data());
    png_write_end(h.png, nullptr);
    if (std::fflush(file.get()) != 0) {
        throw Error(Errc::IoFailure, "cannot flush " + path.string());
    }
}

std::pair<int, int> read_png_size(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    std::string message;
    ReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    if (h.png == nullptr) {
        throw Error(Errc::IoFailure, "libpng init failed");
    }
    h.info = png_create_info_struct(h.png);
    if (setjmp(png_jmpbuf(h.png))) {
        throw Error(Errc::IoFailure, path.string() + ": " + message);
    }
    png_init_io(h.png, file.get());
    png_read_info(h.png, h.info);
    return {static_cast<int>(png_get_image_width(h.png, h.info)), static_cast<int>(png_get_image_height(h.png, h.info))};
}

}  // namespace segpipe
