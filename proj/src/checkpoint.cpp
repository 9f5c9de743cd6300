#include "pavad/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace pavad {

namespace {
constexpr std::array<char, 8> kMagic = {'P', 'A', 'V', 'A', 'D', 'C', 'K', '\0'};
}

const Tensorf& Checkpoint::get(const std::string& name) const {
    const auto it = arrays.find(name);
    require(it != arrays.end(), ErrorKind::Checkpoint, "checkpoint has no array '" + name + "'");
    return it->second;
}

void Checkpoint::restore(const std::string& name, Tensorf& into) const {
    const Tensorf& src = get(name);
    require(src.shape() == into.shape(), ErrorKind::Checkpoint,
            "array '" + name + "' has shape " + shape_string(src.shape()) + ", model expects " +
                shape_string(into.shape()));
    into = src;
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
    static_assert(std::endian::native == std::endian::little);
    nlohmann::json header;
    header["kind"] = ckpt.kind;
    header["epoch"] = ckpt.epoch;
    header["meta"] = ckpt.meta;
    nlohmann::json table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.arrays) {
        table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += t.size();
    }
    header["arrays"] = table;
    const std::string text = header.dump();

    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    // Write to a sibling temp file first so a crash never leaves a torn checkpoint.
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), ErrorKind::Checkpoint, "cannot write " + tmp.string());
        out.write(kMagic.data(), kMagic.size());
        const std::uint32_t version = kCheckpointVersion;
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        const std::uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, t] : ckpt.arrays)
            out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
        require(out.good(), ErrorKind::Checkpoint, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    require(in.good(), ErrorKind::Checkpoint, "cannot open checkpoint " + file.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    require(in.good() && magic == kMagic, ErrorKind::Checkpoint, file.string() + " is not a checkpoint");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    require(version == kCheckpointVersion, ErrorKind::Checkpoint,
            "unsupported checkpoint version " + std::to_string(version));
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    require(in.good() && len < (1ULL << 32), ErrorKind::Checkpoint, "corrupt checkpoint header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    require(in.good(), ErrorKind::Checkpoint, "truncated checkpoint header");

    Checkpoint ckpt;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        ckpt.kind = header.at("kind").get<std::string>();
        ckpt.epoch = header.at("epoch").get<int>();
        ckpt.meta = header.at("meta");
        for (const auto& entry : header.at("arrays")) {
            Tensorf t(entry.at("shape").get<std::vector<int>>());
            in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
            require(in.gcount() == static_cast<std::streamsize>(t.size() * sizeof(float)), ErrorKind::Checkpoint,
                    "truncated checkpoint payload");
            ckpt.arrays.emplace(entry.at("name").get<std::string>(), std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Checkpoint, std::string("corrupt checkpoint header: ") + e.what());
    }
    return ckpt;
}

}  // namespace pavad
