#include "hgr/skeleton.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace hgr {

namespace {

const std::vector<std::string>& lmdhg_names() {
    static const std::vector<std::string> names = {
        "Point to",
        "Catch",
        "Shake down",
        "Shake",
        "Scroll",
        "Draw Line",
        "Slice",
        "Rotate",
        "Draw C",
        "Shake with two hands",
        "Catch with two hands",
        "Point to with two hands",
        "Zoom",
        "Rest",
    };
    return names;
}

// Alternative spellings found in LMDHG annotation exports, keyed by
// normalize_class_key(). Values are canonical names.
const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> table = {
        {"pointtowithhandraised", "Point to with two hands"},
        {"pointwithhandraised", "Point to with two hands"},
        {"pointtotwohands", "Point to with two hands"},
        {"pointing", "Point to"},
        {"pointto", "Point to"},
        {"drawline", "Draw Line"},
        {"line", "Draw Line"},
        {"drawc", "Draw C"},
        {"shakewithtwohand", "Shake with two hands"},
        {"catchwithtwohand", "Catch with two hands"},
        {"null", "Rest"},
        {"nullgesture", "Rest"},
        {"inactive", "Rest"},
    };
    return table;
}

}  // namespace

std::string normalize_class_key(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

ClassSet::ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw std::invalid_argument("class names must be non-empty");
        if (!seen.insert(normalize_class_key(n)).second) {
            throw std::invalid_argument("duplicate class name: " + n);
        }
    }
}

ClassSet ClassSet::lmdhg() { return ClassSet(lmdhg_names()); }

ClassSet ClassSet::extended() {
    auto names = lmdhg_names();
    names.emplace_back("Blank");
    names.emplace_back("Noise");
    return ClassSet(std::move(names));
}

ClassSet ClassSet::synthetic() { return ClassSet({"Line", "Circle", "Zigzag", "Rest"}); }

ClassSet ClassSet::from_spec(std::string_view spec) {
    if (spec == "lmdhg") return lmdhg();
    if (spec == "extended") return extended();
    if (spec == "synthetic") return synthetic();
    std::vector<std::string> names;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string_view::npos) comma = spec.size();
        std::string_view item = spec.substr(pos, comma - pos);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
        if (!item.empty()) names.emplace_back(item);
        pos = comma + 1;
    }
    if (names.empty()) throw std::invalid_argument("empty class set specification");
    return ClassSet(std::move(names));
}

std::optional<std::size_t> ClassSet::find(std::string_view name) const {
    std::string key = normalize_class_key(name);
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (normalize_class_key(names_[i]) == key) return i;
    }
    if (auto it = aliases().find(key); it != aliases().end()) {
        const std::string canon = normalize_class_key(it->second);
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (normalize_class_key(names_[i]) == canon) return i;
        }
    }
    return std::nullopt;
}

std::size_t ClassSet::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw std::invalid_argument("unknown class name '" + std::string(name) + "'; valid names: " + joined());
}

std::string ClassSet::joined(std::string_view sep) const {
    std::string out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (i) out += sep;
        out += names_[i];
    }
    return out;
}

}  // namespace hgr
