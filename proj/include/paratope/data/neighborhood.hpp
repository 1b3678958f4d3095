#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "paratope/data/complex.hpp"

namespace paratope {

enum class NeighborhoodPolicy {
    /// The cap nearest antigen residues by Euclidean distance.
    spatial,
    /// A contiguous window of at most cap antigen positions, placed
    /// proportionally to the residue's position within its CDR.
    window,
};

std::string_view policy_name(NeighborhoodPolicy p) noexcept;
std::optional<NeighborhoodPolicy> policy_from_name(std::string_view name) noexcept;

Neighborhood build_neighborhood(const CdrSequence& cdr, const AntigenSequence& antigen, NeighborhoodPolicy policy,
                                std::size_t cap = kDefaultNeighborhoodCap);

struct NeighborhoodConfig {
    /// nullopt: spatial when both sides have coordinates, window otherwise.
    std::optional<NeighborhoodPolicy> policy;
    std::size_t cap = kDefaultNeighborhoodCap;
    /// Rebuild even when the record supplied explicit neighborhoods.
    bool overwrite = false;
};

/// Fills Complex::neighborhoods for every complex that has an antigen.
void attach_neighborhoods(std::span<Complex> complexes, const NeighborhoodConfig& config = {});

/// Sorted union of all neighborhood sets of a complex.
std::vector<std::uint32_t> antigen_context(const Complex& complex);

}  // namespace paratope
