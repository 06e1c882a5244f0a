#include "hgr/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "hgr/dataset.hpp"

namespace hgr::nn {

namespace {

constexpr char kMagic[8] = {'H', 'G', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::string_view kPointerPrefix = "checkpoint: ";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    return v;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& p : ckpt.model.parameters()) tensors.push_back({{"name", p.name}, {"shape", p.value.shape}});
    const nlohmann::json header{{"model", ckpt.model.spec()},
                                {"classes", ckpt.classes.names()},
                                {"resolution", ckpt.resolution},
                                {"seed", ckpt.seed},
                                {"render", ckpt.render},
                                {"view", ckpt.view},
                                {"tensors", tensors},
                                {"meta", ckpt.meta}};
    const std::string text = header.dump();
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& p : ckpt.model.parameters()) {
        for (float v : p.value.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = get_u32(bytes, 8);
    if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t len = get_u32(bytes, 12);
    if (bytes.size() < 16 + static_cast<std::size_t>(len)) throw std::runtime_error("truncated checkpoint header");
    const auto header = nlohmann::json::parse(bytes.substr(16, len));

    Checkpoint ckpt;
    ckpt.classes = ClassSet(header.at("classes").get<std::vector<std::string>>());
    ckpt.resolution = header.at("resolution").get<std::size_t>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.render = header.value("render", nlohmann::json::object());
    ckpt.view = header.value("view", std::string("top"));
    ckpt.meta = header.value("meta", nlohmann::json::object());
    ckpt.model = Model<float>(header.at("model").get<ModelSpec>(), 0);
    if (ckpt.model.spec().num_classes() != ckpt.classes.size()) {
        throw std::runtime_error("checkpoint head has " + std::to_string(ckpt.model.spec().num_classes()) +
                                 " outputs but " + std::to_string(ckpt.classes.size()) + " classes");
    }

    auto& params = ckpt.model.parameters();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size()) throw std::runtime_error("checkpoint tensor list does not match model");
    std::size_t off = 16 + len;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto shape = tensors[i].at("shape").get<Shape>();
        if (tensors[i].at("name").get<std::string>() != params[i].name || shape != params[i].value.shape) {
            throw std::runtime_error("checkpoint tensor " + std::to_string(i) + " does not match parameter " +
                                     params[i].name);
        }
        const std::size_t n = params[i].value.size();
        if (bytes.size() < off + 4 * n) throw std::runtime_error("truncated checkpoint weights");
        for (std::size_t k = 0; k < n; ++k) params[i].value[k] = std::bit_cast<float>(get_u32(bytes, off + 4 * k));
        off += 4 * n;
    }
    if (off != bytes.size()) throw std::runtime_error("trailing bytes after checkpoint weights");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::filesystem::path current = path;
    for (int hops = 0; hops < 4; ++hops) {
        const std::string bytes = read_file(current);
        if (bytes.starts_with(kPointerPrefix)) {
            std::string target = bytes.substr(kPointerPrefix.size());
            while (!target.empty() && (target.back() == '\n' || target.back() == '\r')) target.pop_back();
            current = current.parent_path() / target;
            continue;
        }
        return deserialize_checkpoint(bytes);
    }
    throw std::runtime_error("too many checkpoint pointer hops from " + path.string());
}

void write_checkpoint_pointer(const std::filesystem::path& pointer, const std::string& target) {
    write_file(pointer, std::string(kPointerPrefix) + target + "\n");
}

}  // namespace hgr::nn
