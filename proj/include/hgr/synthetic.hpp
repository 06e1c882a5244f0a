#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgr/dataset.hpp"
#include "hgr/rng.hpp"
#include "hgr/skeleton.hpp"

/// Parametric gesture generator used for desk-scale experiments, demos and
/// the golden rendering fixture. Trajectories move a rigid right-hand
/// skeleton in the horizontal (x, z) plane; the left hand is untracked.
namespace hgr::synth {

enum class Kind { Line = 0, Circle, Zigzag, Rest };

inline constexpr std::size_t kKindCount = 4;

/// Rigid hand skeleton with the palm at `palm`, rotated by `yaw` radians about +y.
Frame posed_frame(std::uint64_t index, double timestamp, Hand hand, Vec3 palm, double yaw);

/// One labeled sample of the given kind; label is the kind's index in ClassSet::synthetic().
GestureSample make_gesture(Kind kind, Rng& rng, std::string sample_id, std::uint64_t first_index = 0,
                           double fps = 100.0);

/// `per_class` samples of each kind, in interleaved class order.
std::vector<GestureSample> make_dataset(std::size_t per_class, std::uint64_t seed);

/// A continuous recording of `gestures` random gestures at `fps`, with the
/// matching label intervals. The source id is `id`.
Recording make_recording(const std::string& id, std::size_t gestures, Rng& rng, double fps = 100.0);
/// Same, with the gesture kinds given in order.
Recording make_recording(const std::string& id, const std::vector<Kind>& kinds, Rng& rng, double fps = 100.0);

/// Scripted 60-frame sample: static right hand, index fingertip tracing a sinusoid.
GestureSample sinusoid_fixture();

}  // namespace hgr::synth
