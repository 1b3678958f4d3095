#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>

#include "paratope/data/residue.hpp"

namespace paratope {

inline constexpr std::size_t kMeilerFeatures = 7;
/// [amino-acid one-hot (21) | chain one-hot (6) | Meiler (7)]
inline constexpr std::size_t kAntibodyFeatures = kAminoAcidCount + kChainIdCount + kMeilerFeatures;
/// [amino-acid one-hot (21) | Meiler (7)]
inline constexpr std::size_t kAntigenFeatures = kAminoAcidCount + kMeilerFeatures;

static_assert(kAntibodyFeatures == 34);
static_assert(kAntigenFeatures == 28);

/// Seven physicochemical descriptors per amino acid (Meiler et al. 2001).
/// The UNK row is the column-wise mean of the 20 standard rows.
class MeilerTable {
public:
    using Row = std::array<double, kMeilerFeatures>;

    /// Built-in published values.
    static const MeilerTable& standard();

    /// CSV with a header line and 20 or 21 rows "code,v1..v7". A missing UNK
    /// row ("X") is filled with the column mean; a supplied one is kept.
    static MeilerTable load_csv(const std::filesystem::path& path);

    explicit MeilerTable(const std::array<Row, kAminoAcidCount - 1>& standard_rows);

    const Row& row(AminoAcid aa) const noexcept { return rows_[index_of(aa)]; }
    void set_row(AminoAcid aa, const Row& r) noexcept { rows_[index_of(aa)] = r; }

private:
    std::array<Row, kAminoAcidCount> rows_{};
};

using AntibodyFeatures = std::array<double, kAntibodyFeatures>;
using AntigenFeatures = std::array<double, kAntigenFeatures>;

AntibodyFeatures encode_antibody_residue(AminoAcid aa, ChainId chain, const MeilerTable& table);
AntigenFeatures encode_antigen_residue(AminoAcid aa, const MeilerTable& table);

/// Inverse of encode_antibody_residue on its one-hot blocks.
template <typename T>
std::pair<AminoAcid, ChainId> decode_antibody_residue(std::span<const T> features);

}  // namespace paratope
