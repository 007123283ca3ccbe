#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace endo {

// 8-bit interleaved raster, row-major, `channels` samples per pixel.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    Raster() = default;
    Raster(int w, int h, int c = 3) : width(w), height(h), channels(c), pixels(std::size_t(w) * h * c, 0) {}

    std::uint8_t& at(int x, int y, int c) { return pixels[(std::size_t(y) * width + x) * channels + c]; }
    std::uint8_t at(int x, int y, int c) const { return pixels[(std::size_t(y) * width + x) * channels + c]; }

    bool operator==(const Raster&) const = default;
};

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool empty() const { return x1 <= x0 || y1 <= y0; }
    long area() const { return empty() ? 0 : long(x1 - x0) * (y1 - y0); }
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool operator==(const PixelBox&) const = default;
};

// PNG I/O through libpng. Grayscale/alpha/palette inputs are returned with
// their native channel count (1-4); 16-bit samples are stripped to 8.
Raster read_png(const std::filesystem::path& path);
// Writes to `<path>.tmp` then renames, so readers never see partial files.
void write_png(const std::filesystem::path& path, const Raster& img);

}  // namespace endo
