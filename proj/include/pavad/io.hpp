#pragma once

#include <cstdint>
#include <filesystem>

#include "pavad/tensor.hpp"

namespace pavad {

// Array file: uint32 rank, rank x uint32 dims, then float32 values, all
// little-endian. Used for adapter requests/responses and feature files.
void write_array(const std::filesystem::path& file, const Tensorf& array);
Tensorf read_array(const std::filesystem::path& file);

// SplitMix64 finaliser; used to derive independent per-sample seeds.
std::uint64_t mix_seed(std::uint64_t x);

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, Rest... rest) {
    std::uint64_t s = mix_seed(base);
    ((s = mix_seed(s ^ (static_cast<std::uint64_t>(rest) + 0x9e3779b97f4a7c15ULL))), ...);
    return s;
}

}  // namespace pavad
