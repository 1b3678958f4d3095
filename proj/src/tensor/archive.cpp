#include "paratope/tensor/archive.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace paratope {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'T', 'P', 'W'};

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw ParseError(std::string("weight archive truncated while reading ") + what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

std::string get_bytes(std::istream& in, std::size_t n, const char* what) {
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw ParseError(std::string("weight archive truncated while reading ") + what);
    return s;
}

}  // namespace

const TensorArchive::Entry* TensorArchive::find(const std::string& name) const {
    for (const Entry& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

void write_archive(std::ostream& out, const TensorArchive& archive) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, TensorArchive::kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.metadata.size()));
    out.write(archive.metadata.data(), static_cast<std::streamsize>(archive.metadata.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.entries.size()));
    for (const auto& e : archive.entries) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
        for (std::size_t d : e.value.shape()) put_le<std::uint64_t>(out, d);
        for (float v : e.value.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
}

TensorArchive read_archive(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw VersionError("not a weight archive (bad magic)");
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != TensorArchive::kVersion) {
        throw VersionError("unsupported weight archive version " + std::to_string(version) + " (expected " +
                           std::to_string(TensorArchive::kVersion) + ")");
    }
    TensorArchive archive;
    archive.metadata = get_bytes(in, get_le<std::uint32_t>(in, "metadata length"), "metadata");
    const auto count = get_le<std::uint32_t>(in, "entry count");
    for (std::uint32_t t = 0; t < count; ++t) {
        TensorArchive::Entry e;
        e.name = get_bytes(in, get_le<std::uint32_t>(in, "name length"), "name");
        const auto rank = get_le<std::uint32_t>(in, "rank");
        if (rank > 8) throw ParseError("weight archive entry '" + e.name + "' has implausible rank");
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in, "dimension"));
        std::vector<float> values(shape_numel(shape));
        for (float& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(in, "values"));
        e.value = Tensor<float>(std::move(shape), std::move(values));
        archive.entries.push_back(std::move(e));
    }
    return archive;
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_archive(out, archive);
    if (!out) throw Error("failed writing " + path.string());
}

TensorArchive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open weight file " + path.string());
    return read_archive(in);
}

}  // namespace paratope
