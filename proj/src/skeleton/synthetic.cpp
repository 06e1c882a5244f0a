#include "hgr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <numbers>

namespace hgr::synth {

namespace {

constexpr double kPi = std::numbers::pi;

struct FingerModel {
    Vec3 base;
    Vec3 dir;
    std::array<double, 3> segments;
};

// Right hand relative to the palm center, sensor axes (x right, y up, z toward the user).
constexpr std::array<FingerModel, 5> kFingers = {{
    {{-42, -4, 12}, {-0.6, 0.0, -0.8}, {32, 26, 21}},
    {{-24, 0, -42}, {-0.1, 0.0, -1.0}, {40, 25, 20}},
    {{-4, 0, -46}, {0.0, 0.0, -1.0}, {45, 28, 21}},
    {{15, 0, -41}, {0.1, 0.0, -1.0}, {42, 26, 19}},
    {{33, -2, -33}, {0.25, 0.0, -1.0}, {32, 20, 17}},
}};
constexpr Vec3 kWrist{0, -6, 58};
constexpr Vec3 kElbow{0, -70, 300};

Vec3 place(Vec3 local, Hand hand, Vec3 palm, double yaw) {
    if (hand == Hand::Left) local.x = -local.x;
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double x = c * local.x + s * local.z;
    const double z = -s * local.x + c * local.z;
    return {palm.x + x, palm.y + local.y, palm.z + z};
}

Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / n, v.y / n, v.z / n};
}

double triangle(double phase) {
    // Period 1, range [-1, 1], zero at phase 0.
    const double p = phase - std::floor(phase);
    if (p < 0.25) return 4 * p;
    if (p < 0.75) return 2 - 4 * p;
    return 4 * p - 4;
}

Vec3 trajectory(Kind kind, double s, const std::array<double, 6>& prm) {
    // prm: angle, length/radius, amplitude, zig count, phase, direction
    const double angle = prm[0];
    switch (kind) {
        case Kind::Line: {
            const double t = (s - 0.5) * prm[1] * prm[5];
            return {t * std::cos(angle), 0, t * std::sin(angle)};
        }
        case Kind::Circle: {
            const double a = prm[4] + prm[5] * 2 * kPi * s;
            return {prm[1] * std::cos(a), 0, prm[1] * std::sin(a)};
        }
        case Kind::Zigzag: {
            const double along = (s - 0.5) * prm[1] * prm[5];
            const double across = prm[2] * triangle(s * prm[3]);
            return {along * std::cos(angle) - across * std::sin(angle), 0,
                    along * std::sin(angle) + across * std::cos(angle)};
        }
        case Kind::Rest: return {0, 0, 0};
    }
    return {};
}

}  // namespace

Frame posed_frame(std::uint64_t index, double timestamp, Hand hand, Vec3 palm, double yaw) {
    Frame f;
    f.index = index;
    f.timestamp = timestamp;
    for (std::size_t j = 0; j < kJointCount; ++j) f.invalidate(JointId::from_index(j));
    f.set(JointId::palm(hand), place({0, 0, 0}, hand, palm, yaw));
    f.set(JointId::wrist(hand), place(kWrist, hand, palm, yaw));
    f.set(JointId::elbow(hand), place(kElbow, hand, palm, yaw));
    for (int fi = 0; fi < 5; ++fi) {
        const FingerModel& m = kFingers[static_cast<std::size_t>(fi)];
        const Vec3 d = normalized(m.dir);
        Vec3 p = m.base;
        for (int j = 0; j < 4; ++j) {
            f.set(JointId::finger_joint(hand, static_cast<Finger>(fi), j), place(p, hand, palm, yaw));
            if (j < 3) {
                const double len = m.segments[static_cast<std::size_t>(j)];
                p = {p.x + d.x * len, p.y + d.y * len, p.z + d.z * len};
            }
        }
    }
    return f;
}

GestureSample make_gesture(Kind kind, Rng& rng, std::string sample_id, std::uint64_t first_index, double fps) {
    const auto frames = static_cast<std::size_t>(40 + rng.below(61));
    // Palm well behind the origin so the fingertips, not the palm, sit mid-window in the top view.
    const Vec3 center{rng.uniform(-70, 70), rng.uniform(180, 240), rng.uniform(100, 150)};
    const double yaw = rng.uniform(-0.3, 0.3);
    std::array<double, 6> prm{};
    prm[0] = rng.uniform(0, kPi);
    prm[5] = rng.below(2) ? 1.0 : -1.0;
    switch (kind) {
        case Kind::Line: prm[1] = rng.uniform(140, 200); break;
        case Kind::Circle:
            prm[1] = rng.uniform(50, 85);
            prm[4] = rng.uniform(0, 2 * kPi);
            break;
        case Kind::Zigzag:
            prm[1] = rng.uniform(140, 200);
            prm[2] = rng.uniform(30, 45);
            prm[3] = static_cast<double>(3 + rng.below(2));
            break;
        case Kind::Rest: break;
    }

    GestureSample sample;
    sample.sample_id = std::move(sample_id);
    sample.source_id = "synthetic";
    sample.label = static_cast<std::size_t>(kind);
    Vec3 tremor{0, 0, 0};
    for (std::size_t i = 0; i < frames; ++i) {
        const double s = frames > 1 ? static_cast<double>(i) / static_cast<double>(frames - 1) : 0.0;
        Vec3 off = trajectory(kind, s, prm);
        tremor = {std::clamp(tremor.x + rng.uniform(-1.5, 1.5), -6.0, 6.0),
                  std::clamp(tremor.y + rng.uniform(-1.5, 1.5), -6.0, 6.0),
                  std::clamp(tremor.z + rng.uniform(-1.5, 1.5), -6.0, 6.0)};
        const Vec3 palm{center.x + off.x + tremor.x, center.y + off.y + tremor.y, center.z + off.z + tremor.z};
        const std::uint64_t index = first_index + i;
        sample.frames.push_back(posed_frame(index, static_cast<double>(index) / fps, Hand::Right, palm, yaw));
    }
    return sample;
}

std::vector<GestureSample> make_dataset(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GestureSample> out;
    out.reserve(per_class * kKindCount);
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t k = 0; k < kKindCount; ++k) {
            std::string id = "syn_" + std::to_string(k) + "_" + std::to_string(i);
            out.push_back(make_gesture(static_cast<Kind>(k), rng, std::move(id)));
        }
    }
    return out;
}

Recording make_recording(const std::string& id, std::size_t gestures, Rng& rng, double fps) {
    std::vector<Kind> kinds;
    for (std::size_t g = 0; g < gestures; ++g) kinds.push_back(static_cast<Kind>(rng.below(kKindCount)));
    return make_recording(id, kinds, rng, fps);
}

Recording make_recording(const std::string& id, const std::vector<Kind>& kinds, Rng& rng, double fps) {
    Recording rec;
    rec.sequence.source_id = id;
    const ClassSet classes = ClassSet::synthetic();
    std::uint64_t next = 0;
    for (std::size_t g = 0; g < kinds.size(); ++g) {
        const Kind kind = kinds[g];
        GestureSample s = make_gesture(kind, rng, id + "_" + std::to_string(g), next, fps);
        rec.intervals.push_back({classes.name(static_cast<std::size_t>(kind)), next, next + s.frames.size() - 1});
        next += s.frames.size();
        std::move(s.frames.begin(), s.frames.end(), std::back_inserter(rec.sequence.frames));
    }
    return rec;
}

GestureSample sinusoid_fixture() {
    constexpr std::size_t kFrames = 60;
    GestureSample sample;
    sample.sample_id = "sinusoid";
    sample.source_id = "fixture";
    const JointId tip = JointId::fingertip(Hand::Right, Finger::Index);
    for (std::size_t i = 0; i < kFrames; ++i) {
        Frame f = posed_frame(i, static_cast<double>(i) / 100.0, Hand::Right, {0, 200, 0}, 0.0);
        const double u = static_cast<double>(i) / static_cast<double>(kFrames - 1);
        f.set(tip, {-200.0 + 400.0 * u, 230.0 + 40.0 * std::cos(2 * kPi * u), -90.0 + 60.0 * std::sin(4 * kPi * u)});
        sample.frames.push_back(f);
    }
    return sample;
}

}  // namespace hgr::synth
