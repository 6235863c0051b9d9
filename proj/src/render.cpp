#include "tomopet/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "tomopet/error.hpp"

namespace tomopet {

Colormap parse_colormap(std::string_view name) {
    if (name == "gray" || name == "grey") return Colormap::gray;
    if (name == "hot") return Colormap::hot;
    throw ValidationError("unknown colormap \"" + std::string(name) + "\" (expected gray or hot)");
}

namespace {

void check_range(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ValidationError("invalid display range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

std::uint8_t level_of(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return std::uint8_t(std::lround(t * 255.0));
}

void write_cb(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

void flush_cb(png_structp) {}

[[noreturn]] void error_cb(png_structp, png_const_charp msg) { throw Error(std::string("png encoder: ") + msg); }

void warn_cb(png_structp, png_const_charp) {}

} // namespace

std::uint8_t display_level(double value, double lo, double hi) {
    check_range(lo, hi);
    return level_of((value - lo) / (hi - lo));
}

Bytes render_png(const Image& image, double lo, double hi, Colormap colormap) {
    check_range(lo, hi);
    if (image.size() == 0) throw ValidationError("render_png: empty image");
    const std::uint32_t w = image.width(), h = image.height();
    const int channels = colormap == Colormap::gray ? 1 : 3;
    std::vector<std::uint8_t> pixels(std::size_t(w) * h * channels);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double t = (image[i] - lo) / (hi - lo);
        if (colormap == Colormap::gray) {
            pixels[i] = level_of(t);
        } else {
            pixels[3 * i] = level_of(3.0 * t);
            pixels[3 * i + 1] = level_of(3.0 * t - 1.0);
            pixels[3 * i + 2] = level_of(3.0 * t - 2.0);
        }
    }

    Bytes out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warn_cb);
    if (!png) throw Error("png encoder: allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png encoder: allocation failed");
    }
    try {
        png_set_write_fn(png, &out, write_cb, flush_cb);
        png_set_compression_level(png, 9);
        png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        std::vector<png_bytep> rows(h);
        for (std::uint32_t r = 0; r < h; ++r) rows[r] = pixels.data() + std::size_t(r) * w * channels;
        png_set_rows(png, info, rows.data());
        png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

} // namespace tomopet
