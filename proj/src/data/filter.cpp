#include <limits>
#include <tuple>

#include "paratope/data/dataset.hpp"
#include "paratope/errors.hpp"

namespace paratope {

std::vector<std::uint8_t> label_contacts(std::span<const Point3> cdr_coords, std::span<const Point3> antigen_coords,
                                         double threshold) {
    if (cdr_coords.empty() || antigen_coords.empty()) {
        throw ValidationError(
            "contact labelling needs coordinates for both the CDR and the antigen; supply precomputed \"labels\" "
            "instead");
    }
    std::vector<std::uint8_t> labels(cdr_coords.size(), 0);
    for (std::size_t i = 0; i < cdr_coords.size(); ++i) {
        for (const Point3& p : antigen_coords) {
            if (distance(cdr_coords[i], p) < threshold) {
                labels[i] = 1;
                break;
            }
        }
    }
    return labels;
}

namespace {

// Alignment summary; ordered by score, then matches, then shorter length.
struct Cell {
    long matches = 0;
    long gaps = 0;
    long length = 0;

    double score(double gap_penalty) const { return static_cast<double>(matches) - gap_penalty * static_cast<double>(gaps); }
};

bool better(const Cell& a, const Cell& b, double gap_penalty) {
    const double sa = a.score(gap_penalty), sb = b.score(gap_penalty);
    if (sa != sb) return sa > sb;
    if (a.matches != b.matches) return a.matches > b.matches;
    return a.length < b.length;
}

}  // namespace

double seq_identity(std::span<const AminoAcid> a, std::span<const AminoAcid> b, double gap_penalty) {
    if (a.empty() || b.empty()) throw ValidationError("seq_identity: sequences must be non-empty");
    if (gap_penalty < 0) throw ValidationError("seq_identity: gap penalty must be non-negative");
    const std::size_t n = a.size(), m = b.size();
    std::vector<Cell> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = {0, static_cast<long>(j), static_cast<long>(j)};
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = {0, static_cast<long>(i), static_cast<long>(i)};
        for (std::size_t j = 1; j <= m; ++j) {
            Cell diag = prev[j - 1];
            diag.matches += a[i - 1] == b[j - 1] ? 1 : 0;
            diag.length += 1;
            Cell up = prev[j];
            up.gaps += 1;
            up.length += 1;
            Cell left = cur[j - 1];
            left.gaps += 1;
            left.length += 1;
            Cell best = diag;
            if (better(up, best, gap_penalty)) best = up;
            if (better(left, best, gap_penalty)) best = left;
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    const Cell& end = prev[m];
    return static_cast<double>(end.matches) / static_cast<double>(end.length);
}

std::vector<Complex> filter_complexes(std::span<const Complex> complexes, const FilterCriteria& criteria) {
    std::vector<Complex> kept;
    std::vector<std::vector<AminoAcid>> kept_seqs;
    for (const Complex& c : complexes) {
        if (criteria.max_resolution) {
            if (!c.resolution) {
                throw ValidationError("complex '" + c.id + "' has no resolution but the resolution filter is enabled");
            }
            if (!(*c.resolution < *criteria.max_resolution)) continue;
        }
        if (criteria.min_positives && c.positives() < *criteria.min_positives) continue;
        std::vector<AminoAcid> seq = c.antibody_residues();
        if (criteria.max_identity && !seq.empty()) {
            bool redundant = false;
            for (const auto& other : kept_seqs) {
                if (seq_identity(seq, other, criteria.gap_penalty) > *criteria.max_identity) {
                    redundant = true;
                    break;
                }
            }
            if (redundant) continue;
        }
        kept.push_back(c);
        kept_seqs.push_back(std::move(seq));
    }
    return kept;
}

}  // namespace paratope
