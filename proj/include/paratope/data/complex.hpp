#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paratope/data/residue.hpp"

namespace paratope {

inline constexpr std::size_t kMaxCdrLength = 32;
inline constexpr std::size_t kMaxAntigenLength = 1269;
inline constexpr std::size_t kDefaultNeighborhoodCap = 150;

struct CdrSequence {
    ChainId chain = ChainId::H1;
    std::vector<AminoAcid> residues;
    /// 1 = binding residue.
    std::vector<std::uint8_t> labels;
    /// Optional representative point per residue (Angstrom).
    std::vector<Point3> coords;

    std::size_t size() const noexcept { return residues.size(); }
    /// Throws ValidationError naming `context` when an invariant fails.
    void validate(const std::string& context) const;
};

struct AntigenSequence {
    std::vector<AminoAcid> residues;
    std::vector<Point3> coords;

    std::size_t size() const noexcept { return residues.size(); }
    bool empty() const noexcept { return residues.empty(); }
    bool has_coords() const noexcept { return !coords.empty(); }
    void validate(const std::string& context) const;
};

/// Per antibody residue, the antigen positions it may attend over
/// (sorted ascending, unique).
struct Neighborhood {
    std::vector<std::vector<std::uint32_t>> sets;

    std::size_t size() const noexcept { return sets.size(); }
    std::size_t total() const noexcept;
    void validate(std::size_t antibody_length, std::size_t antigen_length, std::size_t cap,
                  const std::string& context) const;
};

struct Complex {
    std::string id;
    std::optional<double> resolution;
    std::vector<CdrSequence> cdrs;
    AntigenSequence antigen;
    /// One per CDR once built; empty before.
    std::vector<Neighborhood> neighborhoods;

    std::size_t positives() const noexcept;
    std::size_t residue_count() const noexcept;
    bool has_antigen() const noexcept { return !antigen.empty(); }
    bool has_neighborhoods() const noexcept { return !cdrs.empty() && neighborhoods.size() == cdrs.size(); }
    /// All CDR residues concatenated in stored order.
    std::vector<AminoAcid> antibody_residues() const;
    void validate(std::size_t cap = kDefaultNeighborhoodCap) const;
};

}  // namespace paratope
