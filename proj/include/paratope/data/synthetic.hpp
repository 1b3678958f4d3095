#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "paratope/data/complex.hpp"

namespace paratope {

enum class SyntheticLabels {
    /// Binding iff the residue is Y or W, or follows a G.
    motif,
    /// Binding iff the residue's neighborhood holds an antigen W; the
    /// antibody sequence carries no information about the label.
    antigen,
};

struct SyntheticSpec {
    std::size_t complexes = 50;
    std::size_t cdrs_per_complex = 3;
    std::size_t min_cdr_length = 6;
    std::size_t max_cdr_length = 12;
    std::size_t antigen_length = 60;
    /// Neighborhood size (spatial policy over the generated coordinates).
    std::size_t cap = 8;
    /// Probability that an antigen residue is W (the only source of W in
    /// antigen-label mode).
    double antigen_marker_rate = 0.07;
    SyntheticLabels labels = SyntheticLabels::motif;
    std::uint64_t seed = 0;
};

/// Random complexes with coordinates, spatial neighborhoods and labels set
/// by spec.labels. Ids are "syn0000", "syn0001", ...
std::vector<Complex> make_synthetic(const SyntheticSpec& spec);

}  // namespace paratope
