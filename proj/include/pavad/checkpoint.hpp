#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "pavad/tensor.hpp"

namespace pavad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Versioned container: 8-byte magic "PAVADCK\0", uint32 version, uint64
// header length, JSON header (kind, epoch, meta, array table), then the
// float32 payload of every named array in table order.
struct Checkpoint {
    std::string kind;  // spatial-ae | temporal-ae | discriminator
    int epoch = 0;     // completed epochs
    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, Tensorf> arrays;

    // Prefix conventions: "param/", "buffer/", "optim/".
    template <typename Range>
    void put_all(const std::string& prefix, const Range& named) {
        for (const auto& [name, tensor] : named) arrays[prefix + name] = *tensor;
    }
    const Tensorf& get(const std::string& name) const;
    void restore(const std::string& name, Tensorf& into) const;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace pavad
