#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "paratope/data/complex.hpp"

namespace paratope {

/// Chothia residue number with optional insertion code ("100A").
struct ChothiaPosition {
    int number = 0;
    char insertion = ' ';

    static ChothiaPosition parse(std::string_view text);
    std::string str() const;

    friend auto operator<=>(const ChothiaPosition&, const ChothiaPosition&) = default;
};

struct NumberedResidue {
    ChothiaPosition position;
    AminoAcid aa = AminoAcid::UNK;
    std::uint8_t label = 0;
    /// Optional representative point.
    std::optional<Point3> coord;
};

enum class ChainKind { heavy, light };

/// Inclusive Chothia number ranges of the six CDRs plus a symmetric extension.
struct CdrWindows {
    struct Window {
        int first = 0;
        int last = 0;
    };

    std::array<Window, kChainIdCount> windows{};
    /// Residues added on each side of every window.
    int extension = 0;

    /// H1 26-32, H2 52-56, H3 95-102, L1 24-34, L2 50-56, L3 89-97.
    static CdrWindows chothia();
    /// CSV "cdr,first,last" with one row per CDR.
    static CdrWindows load_csv(const std::filesystem::path& path);

    bool contains(ChainId cdr, const ChothiaPosition& pos) const noexcept;
};

/// Collects residues falling in each CDR window of the chain, in position
/// order. Empty windows are skipped. Throws ValidationError when positions
/// are not strictly increasing or a CDR exceeds kMaxCdrLength.
std::vector<CdrSequence> extract_cdrs(const std::vector<NumberedResidue>& chain, ChainKind kind,
                                      const CdrWindows& windows = CdrWindows::chothia());

}  // namespace paratope
