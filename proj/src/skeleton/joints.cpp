#include "hgr/skeleton.hpp"

#include <cmath>

namespace hgr {

namespace {

constexpr std::array<const char*, 5> kFingerNames = {"thumb", "index", "middle", "ring", "pinky"};

}  // namespace

JointId JointId::finger_joint(Hand h, Finger f, int j) {
    if (j < 0 || j > 3) {
        throw std::out_of_range("finger joint index must be in 0..3, got " + std::to_string(j));
    }
    return {h, Part::Finger, f, static_cast<std::uint8_t>(j)};
}

JointId JointId::from_index(std::size_t index) {
    if (index >= kJointCount) {
        throw std::out_of_range("joint index " + std::to_string(index) + " outside 0.." +
                                std::to_string(kJointCount - 1));
    }
    const auto hand = static_cast<Hand>(index / kJointsPerHand);
    const std::size_t local = index % kJointsPerHand;
    switch (local) {
        case 0: return elbow(hand);
        case 1: return wrist(hand);
        case 2: return palm(hand);
        default: {
            const std::size_t k = local - 3;
            return finger_joint(hand, static_cast<Finger>(k / kFingerJoints), static_cast<int>(k % kFingerJoints));
        }
    }
}

std::size_t JointId::index() const {
    const std::size_t base = static_cast<std::size_t>(hand) * kJointsPerHand;
    switch (part) {
        case Part::Elbow: return base;
        case Part::Wrist: return base + 1;
        case Part::Palm: return base + 2;
        case Part::Finger: break;
    }
    return base + 3 + static_cast<std::size_t>(finger) * kFingerJoints + joint;
}

std::string JointId::name() const {
    std::string out = hand == Hand::Left ? "L_" : "R_";
    switch (part) {
        case Part::Elbow: return out + "elbow";
        case Part::Wrist: return out + "wrist";
        case Part::Palm: return out + "palm";
        case Part::Finger: break;
    }
    return out + kFingerNames[static_cast<std::size_t>(finger)] + std::to_string(joint);
}

std::size_t fingertip_slot(Hand hand, Finger finger) {
    return static_cast<std::size_t>(hand) * 5 + static_cast<std::size_t>(finger);
}

JointId fingertip_from_slot(std::size_t slot) {
    if (slot >= kFingertipCount) throw std::out_of_range("fingertip slot out of range");
    return JointId::fingertip(static_cast<Hand>(slot / 5), static_cast<Finger>(slot % 5));
}

bool Vec3::finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

void Frame::set(JointId id, Vec3 p) {
    const std::size_t i = id.index();
    positions[i] = p;
    valid[i] = p.finite();
}

void Frame::invalidate(JointId id) {
    const std::size_t i = id.index();
    positions[i] = {NAN, NAN, NAN};
    valid[i] = false;
}

bool Frame::operator==(const Frame& other) const {
    if (index != other.index || timestamp != other.timestamp || valid != other.valid) return false;
    for (std::size_t i = 0; i < kJointCount; ++i) {
        if (valid[i] && !(positions[i] == other.positions[i])) return false;
    }
    return true;
}

void FrameSequence::check_invariants() const {
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const Frame& prev = frames[i - 1];
        const Frame& cur = frames[i];
        if (cur.index <= prev.index) {
            throw std::invalid_argument("frame indices must be strictly increasing: " + std::to_string(prev.index) +
                                        " followed by " + std::to_string(cur.index));
        }
        if (prev.timestamp && cur.timestamp && *cur.timestamp < *prev.timestamp) {
            throw std::invalid_argument("timestamps must be non-decreasing at frame " + std::to_string(cur.index));
        }
    }
}

}  // namespace hgr
