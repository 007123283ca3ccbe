#include "endo/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

namespace endo {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_warn(png_structp, png_const_charp) {}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open image " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw std::runtime_error("not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    png_infop info = png_create_info_struct(png);
    Raster out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("corrupt PNG file: " + path.string());
    }
    {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        png_set_strip_16(png);
        png_set_packing(png);
        if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        png_read_update_info(png, info);
        out.width = static_cast<int>(png_get_image_width(png, info));
        out.height = static_cast<int>(png_get_image_height(png, info));
        out.channels = png_get_channels(png, info);
        out.pixels.resize(std::size_t(out.width) * out.height * out.channels);
        rows.resize(static_cast<std::size_t>(out.height));
        for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + std::size_t(y) * out.width * out.channels;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::filesystem::path& path, const Raster& img) {
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("write_png: empty raster");
    int color_type;
    switch (img.channels) {
        case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
        case 2: color_type = PNG_COLOR_TYPE_GRAY_ALPHA; break;
        case 3: color_type = PNG_COLOR_TYPE_RGB; break;
        case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
        default: throw std::invalid_argument("write_png: unsupported channel count");
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        FilePtr f(std::fopen(tmp.c_str(), "wb"));
        if (!f) throw std::runtime_error("cannot write image " + path.string());
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
        png_infop info = png_create_info_struct(png);
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw std::runtime_error("failed encoding image " + path.string());
        }
        {
            png_init_io(png, f.get());
            png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                         color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
            png_write_info(png, info);
            for (int y = 0; y < img.height; ++y) {
                png_write_row(png, img.pixels.data() + std::size_t(y) * img.width * img.channels);
            }
            png_write_end(png, nullptr);
        }
        png_destroy_write_struct(&png, &info);
        if (std::fflush(f.get()) != 0) throw std::runtime_error("failed writing image " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace endo
