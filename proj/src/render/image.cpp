#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hgr/render.hpp"

namespace hgr {

namespace {

struct Tap {
    int index;
    double weight;
};

// For each output cell, the source cells it overlaps and the overlap weights
// (summing to one).
std::vector<std::vector<Tap>> area_taps(int src, int dst) {
    if (src <= 0 || dst <= 0) throw std::invalid_argument("resample sizes must be positive");
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int o = 0; o < dst; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        auto& t = taps[static_cast<std::size_t>(o)];
        for (int s = static_cast<int>(std::floor(lo)); s < src && s < hi; ++s) {
            const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
            if (overlap > 0) t.push_back({s, overlap / scale});
        }
    }
    return taps;
}

// Planar (C, H, W) double buffer of the resampled image in 0..255.
std::vector<double> resample(const RasterImage& img, int width, int height) {
    const auto xt = area_taps(img.width, width);
    const auto yt = area_taps(img.height, height);
    const std::size_t W = static_cast<std::size_t>(width), H = static_cast<std::size_t>(height);
    // Horizontal pass: (src rows, W, 3)
    std::vector<double> rows(static_cast<std::size_t>(img.height) * W * 3, 0.0);
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t* src = &img.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) * 3];
        for (std::size_t x = 0; x < W; ++x) {
            double acc[3] = {0, 0, 0};
            for (const Tap& t : xt[x]) {
                for (int c = 0; c < 3; ++c) acc[c] += t.weight * src[t.index * 3 + c];
            }
            double* dst = &rows[(static_cast<std::size_t>(y) * W + x) * 3];
            for (int c = 0; c < 3; ++c) dst[c] = acc[c];
        }
    }
    std::vector<double> out(3 * H * W, 0.0);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            double acc[3] = {0, 0, 0};
            for (const Tap& t : yt[y]) {
                const double* src = &rows[(static_cast<std::size_t>(t.index) * W + x) * 3];
                for (int c = 0; c < 3; ++c) acc[c] += t.weight * src[c];
            }
            for (std::size_t c = 0; c < 3; ++c) out[(c * H + y) * W + x] = acc[c];
        }
    }
    return out;
}

}  // namespace

RasterImage resize_area(const RasterImage& img, int width, int height) {
    if (img.width == width && img.height == height) return img;
    const auto planar = resample(img, width, height);
    RasterImage out(width, height);
    const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(planar[c * plane + i], 0.0, 255.0)));
        }
    }
    return out;
}

std::vector<float> to_planar(const RasterImage& img, int width, int height) {
    std::vector<float> out;
    if (img.width == width && img.height == height) {
        const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        out.resize(plane * 3);
        for (std::size_t i = 0; i < plane; ++i) {
            for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = static_cast<float>(img.pixels[i * 3 + c] / 255.0);
        }
        return out;
    }
    const auto planar = resample(img, width, height);
    out.resize(planar.size());
    for (std::size_t i = 0; i < planar.size(); ++i) out[i] = static_cast<float>(planar[i] / 255.0);
    return out;
}

void write_png(const std::string& path, const RasterImage& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
        throw std::runtime_error("cannot write PNG " + path + ": " + image.message);
    }
}

RasterImage read_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw std::runtime_error("cannot read PNG " + path + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    RasterImage out(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw std::runtime_error("cannot decode PNG " + path + ": " + image.message);
    }
    return out;
}

}  // namespace hgr
