#include "hgr/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace hgr {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            std::size_t ei = i, ej = j;
            while (ei < a.size() && std::isdigit(static_cast<unsigned char>(a[ei]))) ++ei;
            while (ej < b.size() && std::isdigit(static_cast<unsigned char>(b[ej]))) ++ej;
            std::string_view na = a.substr(i, ei - i), nb = b.substr(j, ej - j);
            while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
            while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ei;
            j = ej;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

std::vector<Recording> load_dataset(const fs::path& root, const ClassSet& classes) {
    if (!fs::is_directory(root)) throw std::runtime_error("dataset root is not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "frames.csv")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
        return natural_less(a.filename().string(), b.filename().string());
    });
    std::vector<Recording> out;
    out.reserve(dirs.size());
    for (const auto& dir : dirs) {
        Recording rec;
        const std::string id = dir.filename().string();
        try {
            rec.sequence = parse_frames(read_file(dir / "frames.csv"), FrameFormat::CanonicalCsv, id);
            if (fs::exists(dir / "labels.csv")) {
                auto ann = parse_annotations(read_file(dir / "labels.csv"), classes);
                rec.intervals = std::move(ann.intervals);
                rec.warnings = std::move(ann.warnings);
            }
        } catch (const ParseError& e) {
            throw std::runtime_error(id + ": " + e.what());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void save_recording(const fs::path& root, const Recording& rec) {
    const fs::path dir = root / rec.sequence.source_id;
    write_file(dir / "frames.csv", write_canonical_csv(rec.sequence));
    write_file(dir / "labels.csv", write_annotations(rec.intervals));
}

std::vector<Recording> import_lmdhg(const fs::path& src, const ClassSet& classes) {
    if (!fs::is_directory(src)) throw std::runtime_error("LMDHG source is not a directory: " + src.string());
    static const std::regex frames_re(R"((DataFile\d+)\.(txt|csv))", std::regex::icase);
    std::vector<std::pair<std::string, fs::path>> found;
    for (const auto& entry : fs::directory_iterator(src)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(name, m, frames_re)) found.emplace_back(m[1].str(), entry.path());
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return natural_less(a.first, b.first); });
    std::vector<Recording> out;
    for (const auto& [id, path] : found) {
        Recording rec;
        try {
            rec.sequence = parse_frames(read_file(path), FrameFormat::Lmdhg, id);
            fs::path labels = path.parent_path() / (id + "_labels" + path.extension().string());
            if (!fs::exists(labels)) labels = path.parent_path() / (id + "_labels.txt");
            if (!fs::exists(labels)) throw std::runtime_error("missing annotation file " + labels.string());
            auto ann = parse_annotations(read_file(labels), classes);
            rec.intervals = std::move(ann.intervals);
            rec.warnings = std::move(ann.warnings);
        } catch (const ParseError& e) {
            throw std::runtime_error(id + ": " + e.what());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<GestureSample> segment_all(const std::vector<Recording>& recordings, const ClassSet& classes) {
    std::vector<GestureSample> out;
    for (const auto& rec : recordings) {
        auto samples = segment(rec.sequence, rec.intervals, classes);
        std::move(samples.begin(), samples.end(), std::back_inserter(out));
    }
    return out;
}

}  // namespace hgr
