#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "paratope/tensor/tensor.hpp"

namespace paratope {

/// Binary weight container.
///
/// Layout (all integers little-endian):
///   "PTPW" | u32 version | u32 meta_len | meta bytes | u32 count |
///   count x ( u32 name_len | name | u32 rank | rank x u64 dim | f32 values )
struct TensorArchive {
    static constexpr std::uint32_t kVersion = 1;

    struct Entry {
        std::string name;
        Tensor<float> value;
    };

    /// Free-form text describing what the tensors belong to.
    std::string metadata;
    std::vector<Entry> entries;

    const Entry* find(const std::string& name) const;
};

void write_archive(std::ostream& out, const TensorArchive& archive);
/// Throws VersionError on a foreign magic or version, ParseError on truncation.
TensorArchive read_archive(std::istream& in);

void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);

}  // namespace paratope
