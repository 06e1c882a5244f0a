#include "hgr/render.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace hgr {

RasterImage::RasterImage(int w, int h, Rgb fill) : width(w), height(h) {
    if (w < 0 || h < 0) throw std::invalid_argument("negative image size");
    pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill.r;
        pixels[i + 1] = fill.g;
        pixels[i + 2] = fill.b;
    }
}

Rgb RasterImage::at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    return {pixels.at(i), pixels.at(i + 1), pixels.at(i + 2)};
}

void RasterImage::set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    pixels.at(i) = c.r;
    pixels.at(i + 1) = c.g;
    pixels.at(i + 2) = c.b;
}

ViewMode parse_view_mode(std::string_view s) {
    if (s == "top") return ViewMode::Top;
    if (s == "right") return ViewMode::Right;
    if (s == "double") return ViewMode::Double;
    throw UsageError("unknown view '" + std::string(s) + "' (expected top, right or double)");
}

std::string to_string(ViewMode m) {
    switch (m) {
        case ViewMode::Top: return "top";
        case ViewMode::Right: return "right";
        case ViewMode::Double: return "double";
    }
    return "?";
}

std::string to_string(ViewKind k) { return k == ViewKind::Top ? "top" : "right"; }

std::array<Rgb, kFingertipCount> RenderConfig::default_palette() {
    // Five hues 72 degrees apart; left hand at value 160, right hand at 254.
    // Every channel is even so that half-opacity composites are exact.
    return {{
        {160, 0, 0},
        {128, 160, 0},
        {0, 160, 64},
        {0, 64, 160},
        {128, 0, 160},
        {254, 0, 0},
        {204, 254, 0},
        {0, 254, 102},
        {0, 102, 254},
        {204, 0, 254},
    }};
}

RenderConfig RenderConfig::for_size(int width, int height) {
    RenderConfig c;
    c.width = width;
    c.height = height;
    c.point_radius = std::max(1, static_cast<int>(std::lround(width / 240.0)));
    c.line_width = std::max(1, static_cast<int>(std::lround(width / 480.0)));
    return c;
}

void RenderConfig::validate() const {
    if (width < 16 || height < 16) {
        throw std::invalid_argument("render resolution must be at least 16x16, got " + std::to_string(width) + "x" +
                                    std::to_string(height));
    }
    if (!(alpha_min >= 0.0 && alpha_min < 1.0)) throw std::invalid_argument("alpha_min must lie in [0, 1)");
    if (point_radius < 0 || line_width < 0) throw std::invalid_argument("point radius and line width must be >= 0");
    for (const WorldWindow* w : {&top_window, &right_window}) {
        if (!(w->u_max > w->u_min) || !(w->v_max > w->v_min)) throw std::invalid_argument("degenerate world window");
    }
    std::set<std::array<std::uint8_t, 3>> seen;
    for (const Rgb& c : palette) {
        if (!seen.insert({c.r, c.g, c.b}).second) throw std::invalid_argument("palette entries must be distinct");
    }
}

namespace {

nlohmann::json rgb_json(Rgb c) { return nlohmann::json::array({c.r, c.g, c.b}); }

Rgb rgb_from(const nlohmann::json& j) {
    return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

nlohmann::json window_json(const WorldWindow& w) { return {w.u_min, w.u_max, w.v_min, w.v_max}; }

WorldWindow window_from(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

}  // namespace

void to_json(nlohmann::json& j, const RenderConfig& c) {
    nlohmann::json palette = nlohmann::json::array();
    for (const Rgb& p : c.palette) palette.push_back(rgb_json(p));
    j = nlohmann::json{{"width", c.width},
                       {"height", c.height},
                       {"top_window", window_json(c.top_window)},
                       {"right_window", window_json(c.right_window)},
                       {"alpha_ramp", "linear"},
                       {"alpha_min", c.alpha_min},
                       {"point_radius", c.point_radius},
                       {"line_width", c.line_width},
                       {"palette", palette},
                       {"background", rgb_json(c.background)},
                       {"bone_color", rgb_json(c.bone_color)},
                       {"joint_color", rgb_json(c.joint_color)},
                       {"draw_final_skeleton", c.draw_final_skeleton},
                       {"smooth", c.smooth}};
}

void from_json(const nlohmann::json& j, RenderConfig& c) {
    RenderConfig d = RenderConfig::for_size(j.at("width").get<int>(), j.at("height").get<int>());
    if (j.contains("top_window")) d.top_window = window_from(j.at("top_window"));
    if (j.contains("right_window")) d.right_window = window_from(j.at("right_window"));
    if (j.contains("alpha_ramp") && j.at("alpha_ramp") != "linear") {
        throw std::invalid_argument("unsupported alpha ramp " + j.at("alpha_ramp").dump());
    }
    d.alpha_min = j.value("alpha_min", d.alpha_min);
    d.point_radius = j.value("point_radius", d.point_radius);
    d.line_width = j.value("line_width", d.line_width);
    if (j.contains("palette")) {
        const auto& p = j.at("palette");
        if (p.size() != kFingertipCount) throw std::invalid_argument("palette must have 10 entries");
        for (std::size_t i = 0; i < kFingertipCount; ++i) d.palette[i] = rgb_from(p.at(i));
    }
    if (j.contains("background")) d.background = rgb_from(j.at("background"));
    if (j.contains("bone_color")) d.bone_color = rgb_from(j.at("bone_color"));
    if (j.contains("joint_color")) d.joint_color = rgb_from(j.at("joint_color"));
    d.draw_final_skeleton = j.value("draw_final_skeleton", d.draw_final_skeleton);
    d.smooth = j.value("smooth", d.smooth);
    c = d;
}

Vec2 project(const Vec3& p, ViewKind view) {
    if (!p.finite()) throw std::invalid_argument("cannot project a non-finite point");
    if (view == ViewKind::Top) return {p.x, -p.z};
    return {p.z, p.y};
}

namespace {

void check_window(const WorldWindow& w) {
    if (!(w.u_max > w.u_min) || !(w.v_max > w.v_min) || !std::isfinite(w.u_max - w.u_min) ||
        !std::isfinite(w.v_max - w.v_min)) {
        throw std::invalid_argument("degenerate world window");
    }
}

struct Continuous {
    double x, y;
};

// Continuous pixel-space position; the image spans [0, width] x [0, height].
Continuous to_continuous(Vec2 p, const WorldWindow& w, int width, int height) {
    return {(p.u - w.u_min) / (w.u_max - w.u_min) * width, (w.v_max - p.v) / (w.v_max - w.v_min) * height};
}

// Floating-point RGB accumulation buffer; quantized once at the end.
class Canvas {
public:
    Canvas(int w, int h, Rgb bg) : w_(w), h_(h), data_(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3) {
        for (std::size_t i = 0; i < data_.size(); i += 3) {
            data_[i] = bg.r;
            data_[i + 1] = bg.g;
            data_[i + 2] = bg.b;
        }
    }

    void blend(int x, int y, Rgb c, double alpha) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_ || alpha <= 0.0) return;
        double* px = &data_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x)) * 3];
        if (alpha >= 1.0) {
            px[0] = c.r;
            px[1] = c.g;
            px[2] = c.b;
            return;
        }
        px[0] += alpha * (c.r - px[0]);
        px[1] += alpha * (c.g - px[1]);
        px[2] += alpha * (c.b - px[2]);
    }

    RasterImage quantize() const {
        RasterImage img;
        img.width = w_;
        img.height = h_;
        img.pixels.resize(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) {
            img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(data_[i], 0.0, 255.0)));
        }
        return img;
    }

    int width() const { return w_; }
    int height() const { return h_; }

private:
    int w_, h_;
    std::vector<double> data_;
};

constexpr int kSuper = 4;

void draw_disc(Canvas& canvas, PixelPos c, Continuous exact, int radius, Rgb color, double alpha, bool smooth) {
    const int r = radius;
    for (int y = c.y - r - 1; y <= c.y + r + 1; ++y) {
        for (int x = c.x - r - 1; x <= c.x + r + 1; ++x) {
            if (!smooth) {
                const long dx = x - c.x, dy = y - c.y;
                if (dx * dx + dy * dy <= static_cast<long>(r) * r) canvas.blend(x, y, color, alpha);
                continue;
            }
            const double rr = (r + 0.5) * (r + 0.5);
            int hits = 0;
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double px = x + (sx + 0.5) / kSuper - exact.x;
                    const double py = y + (sy + 0.5) / kSuper - exact.y;
                    hits += px * px + py * py <= rr;
                }
            }
            if (hits) canvas.blend(x, y, color, alpha * hits / (kSuper * kSuper));
        }
    }
}

double segment_distance(double px, double py, Continuous a, Continuous b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
    const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
    return std::sqrt(ex * ex + ey * ey);
}

void draw_segment(Canvas& canvas, Continuous a, Continuous b, int width, Rgb color, bool smooth) {
    const double half = std::max(0.5, width / 2.0);
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half - 1)));
    const int x1 = std::min(canvas.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half - 1)));
    const int y1 = std::min(canvas.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half + 1)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (!smooth) {
                if (segment_distance(x + 0.5, y + 0.5, a, b) <= half) canvas.blend(x, y, color, 1.0);
                continue;
            }
            int hits = 0;
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    hits += segment_distance(x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper, a, b) <= half;
                }
            }
            if (hits) canvas.blend(x, y, color, static_cast<double>(hits) / (kSuper * kSuper));
        }
    }
}

struct Bone {
    JointId a, b;
    std::optional<std::size_t> finger_slot;
};

std::vector<Bone> skeleton_bones() {
    std::vector<Bone> bones;
    for (Hand h : {Hand::Left, Hand::Right}) {
        bones.push_back({JointId::elbow(h), JointId::wrist(h), std::nullopt});
        bones.push_back({JointId::wrist(h), JointId::palm(h), std::nullopt});
        for (int f = 0; f < 5; ++f) {
            const auto finger = static_cast<Finger>(f);
            const std::size_t slot = fingertip_slot(h, finger);
            bones.push_back({JointId::palm(h), JointId::finger_joint(h, finger, 0), std::nullopt});
            for (int j = 0; j < 3; ++j) {
                bones.push_back({JointId::finger_joint(h, finger, j), JointId::finger_joint(h, finger, j + 1), slot});
            }
        }
    }
    return bones;
}

}  // namespace

std::optional<PixelPos> world_to_pixel(Vec2 p, const WorldWindow& window, int width, int height) {
    check_window(window);
    if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) return std::nullopt;
    if (p.u < window.u_min || p.u > window.u_max || p.v < window.v_min || p.v > window.v_max) return std::nullopt;
    const Continuous c = to_continuous(p, window, width, height);
    const int x = std::min(width - 1, static_cast<int>(std::floor(c.x)));
    const int y = std::min(height - 1, static_cast<int>(std::floor(c.y)));
    return PixelPos{std::max(0, x), std::max(0, y)};
}

double trace_alpha(std::size_t tau, std::size_t frames, double alpha_min) {
    if (frames == 0 || tau == 0 || tau > frames) throw std::out_of_range("frame position outside 1..T");
    return alpha_min + (1.0 - alpha_min) * static_cast<double>(tau) / static_cast<double>(frames);
}

RasterImage render_gesture(const GestureSample& sample, const RenderConfig& config, ViewKind view,
                           std::vector<std::string>* warnings) {
    config.validate();
    if (sample.frames.empty()) throw std::invalid_argument("cannot render empty sample '" + sample.sample_id + "'");
    const WorldWindow& window = config.window(view);
    Canvas canvas(config.width, config.height, config.background);
    const std::size_t T = sample.frames.size();

    auto draw_point = [&](const Vec3& p, Rgb color, double alpha) {
        const Vec2 uv = project(p, view);
        if (auto px = world_to_pixel(uv, window, config.width, config.height)) {
            draw_disc(canvas, *px, to_continuous(uv, window, config.width, config.height), config.point_radius, color,
                      alpha, config.smooth);
        }
    };

    bool any_tip = false;
    for (std::size_t tau = 1; tau <= T; ++tau) {
        const Frame& f = sample.frames[tau - 1];
        const double alpha = trace_alpha(tau, T, config.alpha_min);
        for (std::size_t slot = 0; slot < kFingertipCount; ++slot) {
            const JointId tip = fingertip_from_slot(slot);
            if (!f.is_valid(tip)) continue;
            any_tip = true;
            draw_point(f.at(tip), config.palette[slot], alpha);
        }
    }
    if (!any_tip && warnings) {
        warnings->push_back("sample '" + sample.sample_id + "' has no valid fingertip observation");
    }

    if (config.draw_final_skeleton) {
        const Frame& last = sample.frames.back();
        for (const Bone& bone : skeleton_bones()) {
            if (!last.is_valid(bone.a) || !last.is_valid(bone.b)) continue;
            const auto a = to_continuous(project(last.at(bone.a), view), window, config.width, config.height);
            const auto b = to_continuous(project(last.at(bone.b), view), window, config.width, config.height);
            const Rgb color = bone.finger_slot ? config.palette[*bone.finger_slot] : config.bone_color;
            draw_segment(canvas, a, b, config.line_width, color, config.smooth);
        }
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const JointId id = JointId::from_index(j);
            if (!last.valid[j]) continue;
            const Rgb color = id.is_fingertip() ? config.palette[fingertip_slot(id.hand, id.finger)] : config.joint_color;
            draw_point(last.positions[j], color, 1.0);
        }
    }
    return canvas.quantize();
}

RasterImage render_view(const GestureSample& sample, const RenderConfig& config, ViewMode mode,
                        std::vector<std::string>* warnings) {
    switch (mode) {
        case ViewMode::Top: return render_gesture(sample, config, ViewKind::Top, warnings);
        case ViewMode::Right: return render_gesture(sample, config, ViewKind::Right, warnings);
        case ViewMode::Double: {
            RasterImage top = render_gesture(sample, config, ViewKind::Top, warnings);
            return stitch(top, render_gesture(sample, config, ViewKind::Right, nullptr));
        }
    }
    throw std::invalid_argument("unknown view mode");
}

RasterImage stitch(const RasterImage& left, const RasterImage& right) {
    if (left.height != right.height) {
        throw std::invalid_argument("cannot stitch images of heights " + std::to_string(left.height) + " and " +
                                    std::to_string(right.height));
    }
    RasterImage out(left.width + right.width, left.height);
    const std::size_t lrow = static_cast<std::size_t>(left.width) * 3;
    const std::size_t rrow = static_cast<std::size_t>(right.width) * 3;
    for (int y = 0; y < left.height; ++y) {
        auto dst = out.pixels.begin() + static_cast<std::ptrdiff_t>(y * (lrow + rrow));
        std::copy_n(left.pixels.begin() + static_cast<std::ptrdiff_t>(y * lrow), lrow, dst);
        std::copy_n(right.pixels.begin() + static_cast<std::ptrdiff_t>(y * rrow), rrow,
                    dst + static_cast<std::ptrdiff_t>(lrow));
    }
    return out;
}

std::uint64_t image_digest(const RasterImage& img) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (int v : {img.width, img.height}) {
        for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>((static_cast<std::uint32_t>(v) >> s) & 0xff));
    }
    for (std::uint8_t b : img.pixels) mix(b);
    return h;
}

}  // namespace hgr
