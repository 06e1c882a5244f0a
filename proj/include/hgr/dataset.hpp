#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hgr/skeleton.hpp"

namespace hgr {

/// One recording of a dataset: its frames plus the annotated intervals.
struct Recording {
    FrameSequence sequence;
    std::vector<LabelInterval> intervals;
    std::vector<std::string> warnings;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Loads `<root>/<recording_id>/frames.csv` and `labels.csv` for every
/// recording directory, sorted by natural order of the recording id.
/// A recording without labels.csv is loaded with no intervals.
std::vector<Recording> load_dataset(const std::filesystem::path& root, const ClassSet& classes);

void save_recording(const std::filesystem::path& root, const Recording& rec);

/// Finds `DataFile<k>.txt` (frames) and `DataFile<k>_labels.txt` (annotations)
/// pairs under `src` and parses them with the lmdhg adapter. Recordings are
/// named `DataFile<k>` so the recording number survives segmentation.
std::vector<Recording> import_lmdhg(const std::filesystem::path& src, const ClassSet& classes);

/// Segments every recording; samples keep the recording number from the id.
std::vector<GestureSample> segment_all(const std::vector<Recording>& recordings, const ClassSet& classes);

/// Natural ordering, so that "rec2" sorts before "rec10".
bool natural_less(std::string_view a, std::string_view b);

}  // namespace hgr
