#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgr/skeleton.hpp"

namespace hgr {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB image, row-major, three bytes per pixel.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RasterImage() = default;
    RasterImage(int w, int h, Rgb fill = {});

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
    bool operator==(const RasterImage&) const = default;
};

enum class ViewKind { Top, Right };
enum class ViewMode { Top, Right, Double };

ViewMode parse_view_mode(std::string_view s);
std::string to_string(ViewMode m);
std::string to_string(ViewKind k);

struct Vec2 {
    double u = 0, v = 0;
    bool operator==(const Vec2&) const = default;
};

/// Axis-aligned world rectangle (mm) in view-plane coordinates.
struct WorldWindow {
    double u_min = 0, u_max = 0, v_min = 0, v_max = 0;
    bool operator==(const WorldWindow&) const = default;
};

struct PixelPos {
    int x = 0, y = 0;
    bool operator==(const PixelPos&) const = default;
};

struct RenderConfig {
    int width = 1920;
    int height = 1080;
    WorldWindow top_window{-300.0, 300.0, -168.75, 168.75};
    WorldWindow right_window{-300.0, 300.0, 0.0, 337.5};
    double alpha_min = 0.02;
    int point_radius = 8;
    int line_width = 4;
    std::array<Rgb, kFingertipCount> palette = default_palette();
    Rgb background{0, 0, 0};
    Rgb bone_color{176, 176, 176};
    Rgb joint_color{224, 224, 224};
    bool draw_final_skeleton = true;
    /// Supersampled disc and line edges. Not bit-exact across platforms.
    bool smooth = false;

    /// Defaults for a given output size; radius and width scale with the width.
    static RenderConfig for_size(int width, int height);
    static std::array<Rgb, kFingertipCount> default_palette();

    const WorldWindow& window(ViewKind k) const { return k == ViewKind::Top ? top_window : right_window; }
    void validate() const;
    bool operator==(const RenderConfig&) const = default;
};

void to_json(nlohmann::json& j, const RenderConfig& c);
void from_json(const nlohmann::json& j, RenderConfig& c);

/// Orthographic view-plane projection: Top (x, y, z) -> (x, -z); Right -> (z, y).
Vec2 project(const Vec3& p, ViewKind view);

/// Maps a view-plane point onto the pixel grid of a width x height image.
/// Returns nullopt for points outside the window; throws on a degenerate window.
std::optional<PixelPos> world_to_pixel(Vec2 p, const WorldWindow& window, int width, int height);

/// Opacity of frame tau (1-based) out of T.
double trace_alpha(std::size_t tau, std::size_t frames, double alpha_min);

/// Rasterizes a sample into a single image whose fingertip traces fade with age.
/// `warnings`, if given, receives diagnostics (e.g. no valid fingertip).
RasterImage render_gesture(const GestureSample& sample, const RenderConfig& config, ViewKind view,
                           std::vector<std::string>* warnings = nullptr);

/// Top, right, or the two stitched side by side (width doubles).
RasterImage render_view(const GestureSample& sample, const RenderConfig& config, ViewMode mode,
                        std::vector<std::string>* warnings = nullptr);

RasterImage stitch(const RasterImage& left, const RasterImage& right);

/// Area-averaging resample to `width` x `height`.
RasterImage resize_area(const RasterImage& img, int width, int height);

/// Area-averaged planar (C, H, W) float copy with values scaled to [0, 1].
std::vector<float> to_planar(const RasterImage& img, int width, int height);

void write_png(const std::string& path, const RasterImage& img);
RasterImage read_png(const std::string& path);

/// 64-bit FNV-1a over dimensions and pixels; used for golden image checks.
std::uint64_t image_digest(const RasterImage& img);

}  // namespace hgr
