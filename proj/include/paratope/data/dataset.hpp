#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paratope/data/chothia.hpp"
#include "paratope/data/complex.hpp"

namespace paratope {

struct ParseOptions {
    CdrWindows windows = CdrWindows::chothia();
    /// Used only for records that carry coordinates instead of labels.
    double contact_threshold = 4.5;
    std::size_t neighborhood_cap = kDefaultNeighborhoodCap;
};

/// Reads the line-delimited JSON dataset format: one complex per line,
///
///   {"id": "...", "resolution": 2.1,
///    "cdrs": [{"chain": "H1", "sequence": "GFTFSDYY", "labels": [0,1,...],
///              "coords": [[x,y,z], ...]}],
///    "antigen": {"sequence": "...", "coords": [[x,y,z], ...]},
///    "neighborhoods": [[[j, ...], ...], ...]}
///
/// Instead of "cdrs", a record may give Chothia-numbered chains as
/// "heavy"/"light": [["26", "G", label?, [x,y,z]?], ...]. Blank lines and
/// lines starting with '#' are skipped. Errors carry the line number.
std::vector<Complex> parse_dataset(const std::filesystem::path& path, const ParseOptions& options = {});
std::vector<Complex> parse_dataset(std::istream& in, const std::string& source, const ParseOptions& options = {});

void write_dataset(std::ostream& out, std::span<const Complex> complexes);
void write_dataset(const std::filesystem::path& path, std::span<const Complex> complexes);

/// label_i = 1 iff residue i lies strictly closer than threshold to some
/// antigen point. Throws ValidationError if either side lacks coordinates.
std::vector<std::uint8_t> label_contacts(std::span<const Point3> cdr_coords, std::span<const Point3> antigen_coords,
                                         double threshold = 4.5);

/// Global-alignment identity (matches / alignment length), match 1,
/// mismatch 0, linear gap penalty. Ties between equal-score alignments go to
/// more matches, then to the shorter alignment, which keeps it symmetric.
double seq_identity(std::span<const AminoAcid> a, std::span<const AminoAcid> b, double gap_penalty = 1.0);

struct FilterCriteria {
    /// Keep only resolution strictly below this (Angstrom).
    std::optional<double> max_resolution = 3.0;
    /// Drop a complex whose antibody identity with an earlier kept one exceeds this.
    std::optional<double> max_identity = 0.95;
    /// Keep only complexes with at least this many binding residues.
    std::optional<std::size_t> min_positives = 5;
    double gap_penalty = 1.0;
};

/// Order-preserving filter; on identity conflicts the later record goes.
std::vector<Complex> filter_complexes(std::span<const Complex> complexes, const FilterCriteria& criteria = {});

}  // namespace paratope
