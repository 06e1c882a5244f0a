#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "hgr/nn/model.hpp"
#include "hgr/skeleton.hpp"

namespace hgr::nn {

/// Trained weights plus everything needed to reproduce inference inputs.
///
/// File layout (all integers little-endian):
///
///     offset 0   8 bytes   magic "HGRCKPT\0"
///     offset 8   u32       format version (1)
///     offset 12  u32       header length L in bytes
///     offset 16  L bytes   UTF-8 JSON header
///     then       f32[]     every tensor listed in header["tensors"], in order
///
/// The header holds "model" (ModelSpec), "classes", "resolution", "seed",
/// "render" (render configuration), "view", "tensors" ([{name, shape}]) and
/// free-form "meta".
struct Checkpoint {
    Model<float> model;
    ClassSet classes;
    std::size_t resolution = 0;
    std::uint64_t seed = 0;
    nlohmann::json render = nlohmann::json::object();
    std::string view = "top";
    nlohmann::json meta = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Loads a checkpoint. A small text file of the form "checkpoint: <file>" is
/// followed as a pointer, relative to its own directory.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes a pointer file naming `target` (a path relative to the pointer's directory).
void write_checkpoint_pointer(const std::filesystem::path& pointer, const std::string& target);

}  // namespace hgr::nn
