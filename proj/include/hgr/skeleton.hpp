#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hgr {

enum class Hand : std::uint8_t { Left = 0, Right = 1 };
enum class Part : std::uint8_t { Elbow, Wrist, Palm, Finger };
enum class Finger : std::uint8_t { Thumb = 0, Index, Middle, Ring, Pinky };

inline constexpr std::size_t kJointsPerHand = 23;
inline constexpr std::size_t kJointCount = 2 * kJointsPerHand;
inline constexpr std::size_t kFingerJoints = 4;
inline constexpr std::size_t kFingertipCount = 10;

/// One of the 46 tracked joint identities.
///
/// Canonical order (also the CSV column order): for each hand, Left first,
/// `elbow, wrist, palm`, then `thumb0..thumb3, index0..index3, ..., pinky0..pinky3`
/// where joint 0 is the finger base and joint 3 the fingertip.
struct JointId {
    Hand hand = Hand::Left;
    Part part = Part::Elbow;
    Finger finger = Finger::Thumb;  // meaningful only for Part::Finger
    std::uint8_t joint = 0;         // 0..3, meaningful only for Part::Finger

    static JointId elbow(Hand h) { return {h, Part::Elbow, Finger::Thumb, 0}; }
    static JointId wrist(Hand h) { return {h, Part::Wrist, Finger::Thumb, 0}; }
    static JointId palm(Hand h) { return {h, Part::Palm, Finger::Thumb, 0}; }
    static JointId finger_joint(Hand h, Finger f, int j);
    static JointId fingertip(Hand h, Finger f) { return finger_joint(h, f, 3); }
    static JointId from_index(std::size_t index);

    std::size_t index() const;
    bool is_fingertip() const { return part == Part::Finger && joint == 3; }
    std::string name() const;

    bool operator==(const JointId&) const = default;
};

/// Index 0..9 of a fingertip: hand * 5 + finger.
std::size_t fingertip_slot(Hand hand, Finger finger);
JointId fingertip_from_slot(std::size_t slot);

struct Vec3 {
    double x = 0, y = 0, z = 0;

    bool finite() const;
    bool operator==(const Vec3&) const = default;
};

struct Frame {
    std::uint64_t index = 0;
    std::optional<double> timestamp;  // seconds
    std::array<Vec3, kJointCount> positions{};
    std::array<bool, kJointCount> valid{};

    const Vec3& at(JointId id) const { return positions[id.index()]; }
    bool is_valid(JointId id) const { return valid[id.index()]; }

    /// Sets a joint; non-finite positions are stored but flagged invalid.
    void set(JointId id, Vec3 p);
    void invalidate(JointId id);

    /// Compares index, timestamp, validity, and the positions of valid joints.
    bool operator==(const Frame& other) const;
};

struct FrameSequence {
    std::string source_id;
    std::vector<Frame> frames;

    /// Throws if indices are not strictly increasing or timestamps decrease.
    void check_invariants() const;
    bool operator==(const FrameSequence&) const = default;
};

struct LabelInterval {
    std::string class_name;
    std::uint64_t start_frame = 0;
    std::uint64_t end_frame = 0;  // inclusive

    std::uint64_t length() const { return end_frame - start_frame + 1; }
    bool operator==(const LabelInterval&) const = default;
};

struct GestureSample {
    std::string sample_id;
    std::string source_id;
    std::optional<int> recording;  // dataset recording number, if known
    std::optional<std::size_t> label;  // index into the ClassSet
    std::vector<Frame> frames;

    std::size_t length() const { return frames.size(); }
};

/// Ordered gesture taxonomy. Lookup is tolerant of case, spacing and
/// punctuation, and of the known alternative dataset spellings.
class ClassSet {
public:
    ClassSet() = default;
    explicit ClassSet(std::vector<std::string> names);

    static ClassSet lmdhg();
    static ClassSet extended();
    static ClassSet synthetic();
    /// "lmdhg", "extended", "synthetic" or a comma-separated list.
    static ClassSet from_spec(std::string_view spec);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> find(std::string_view name) const;
    /// Like find(), but throws listing the valid names.
    std::size_t index_of(std::string_view name) const;
    std::string joined(std::string_view sep = ", ") const;

    bool operator==(const ClassSet& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
};

/// Lowercase and strip everything but letters and digits.
std::string normalize_class_key(std::string_view name);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class FrameFormat { Lmdhg, CanonicalCsv };
FrameFormat parse_frame_format(std::string_view tag);

FrameSequence parse_frames(std::string_view text, FrameFormat format, std::string source_id = {});
FrameSequence parse_frames(std::string_view text, std::string_view format_tag, std::string source_id = {});
std::string write_canonical_csv(const FrameSequence& seq);
std::string canonical_csv_header();

struct AnnotationResult {
    std::vector<LabelInterval> intervals;
    std::vector<std::string> warnings;
};

AnnotationResult parse_annotations(std::string_view text, const ClassSet& classes);
std::string write_annotations(const std::vector<LabelInterval>& intervals);

std::vector<GestureSample> segment(const FrameSequence& sequence,
                                   const std::vector<LabelInterval>& intervals,
                                   const ClassSet& classes);

struct SampleDiagnostics {
    std::vector<std::uint64_t> frames_with_invalid_joints;
    /// Per fingertip slot (hand * 5 + finger), fraction of frames where it is invalid.
    std::array<double, kFingertipCount> invalid_fingertip_fraction{};
    /// Fraction over all fingertip observations of the sample.
    double invalid_fingertip_overall = 0;
    bool renderable = false;

    bool clean() const { return frames_with_invalid_joints.empty(); }
};

SampleDiagnostics validate_sample(const GestureSample& sample);

}  // namespace hgr
