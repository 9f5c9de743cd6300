#include "pavad/io.hpp"

#include <bit>
#include <fstream>

namespace pavad {

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

void write_array(const std::filesystem::path& file, const Tensorf& array) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    require(out.good(), ErrorKind::Ingestion, "cannot write " + file.string());
    const auto rank = static_cast<std::uint32_t>(array.rank());
    out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
    for (int d : array.shape()) {
        const auto u = static_cast<std::uint32_t>(d);
        out.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
    out.write(reinterpret_cast<const char*>(array.data()), static_cast<std::streamsize>(array.size() * sizeof(float)));
}

Tensorf read_array(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    require(in.good(), ErrorKind::Ingestion, "cannot open " + file.string());
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof rank);
    require(in.good() && rank >= 1 && rank <= 8, ErrorKind::Ingestion, "bad array header in " + file.string());
    std::vector<int> shape(rank);
    for (auto& d : shape) {
        std::uint32_t u = 0;
        in.read(reinterpret_cast<char*>(&u), sizeof u);
        d = static_cast<int>(u);
    }
    require(in.good(), ErrorKind::Ingestion, "truncated array header in " + file.string());
    Tensorf out(shape);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(float)));
    require(in.gcount() == static_cast<std::streamsize>(out.size() * sizeof(float)), ErrorKind::Ingestion,
            "truncated array data in " + file.string());
    return out;
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace pavad
