#include "paratope/data/complex.hpp"

#include <cmath>

#include "paratope/errors.hpp"

namespace paratope {

namespace {

void check_coords(const std::vector<Point3>& coords, std::size_t n, const std::string& context) {
    if (coords.empty()) return;
    if (coords.size() != n) {
        throw ValidationError(context + ": " + std::to_string(coords.size()) + " coordinates for " +
                              std::to_string(n) + " residues");
    }
    for (const Point3& p : coords) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            throw ValidationError(context + ": non-finite coordinate");
        }
    }
}

}  // namespace

void CdrSequence::validate(const std::string& context) const {
    if (residues.empty() || residues.size() > kMaxCdrLength) {
        throw ValidationError(context + ": CDR length " + std::to_string(residues.size()) + " outside [1, " +
                              std::to_string(kMaxCdrLength) + "]");
    }
    if (labels.size() != residues.size()) {
        throw ValidationError(context + ": " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(residues.size()) + " residues");
    }
    for (std::uint8_t l : labels) {
        if (l > 1) throw ValidationError(context + ": labels must be 0 or 1");
    }
    check_coords(coords, residues.size(), context);
}

void AntigenSequence::validate(const std::string& context) const {
    if (residues.size() > kMaxAntigenLength) {
        throw ValidationError(context + ": antigen length " + std::to_string(residues.size()) + " exceeds " +
                              std::to_string(kMaxAntigenLength));
    }
    check_coords(coords, residues.size(), context);
}

std::size_t Neighborhood::total() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sets) n += s.size();
    return n;
}

void Neighborhood::validate(std::size_t antibody_length, std::size_t antigen_length, std::size_t cap,
                            const std::string& context) const {
    if (sets.size() != antibody_length) {
        throw ValidationError(context + ": neighborhood has " + std::to_string(sets.size()) + " rows for " +
                              std::to_string(antibody_length) + " residues");
    }
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto& s = sets[i];
        if (s.size() > cap) {
            throw ValidationError(context + ": residue " + std::to_string(i) + " has " + std::to_string(s.size()) +
                                  " neighbors (cap " + std::to_string(cap) + ")");
        }
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k] >= antigen_length) {
                throw ValidationError(context + ": neighbor index " + std::to_string(s[k]) + " out of range");
            }
            if (k > 0 && s[k] <= s[k - 1]) {
                throw ValidationError(context + ": neighbor indices must be strictly increasing");
            }
        }
    }
}

std::size_t Complex::positives() const noexcept {
    std::size_t n = 0;
    for (const auto& c : cdrs)
        for (std::uint8_t l : c.labels) n += l;
    return n;
}

std::size_t Complex::residue_count() const noexcept {
    std::size_t n = 0;
    for (const auto& c : cdrs) n += c.size();
    return n;
}

std::vector<AminoAcid> Complex::antibody_residues() const {
    std::vector<AminoAcid> out;
    for (const auto& c : cdrs) out.insert(out.end(), c.residues.begin(), c.residues.end());
    return out;
}

void Complex::validate(std::size_t cap) const {
    const std::string ctx = "complex '" + id + "'";
    if (cdrs.empty()) throw ValidationError(ctx + ": no CDRs");
    for (std::size_t i = 0; i < cdrs.size(); ++i) cdrs[i].validate(ctx + " cdrs[" + std::to_string(i) + "]");
    antigen.validate(ctx + " antigen");
    if (!neighborhoods.empty()) {
        if (neighborhoods.size() != cdrs.size()) throw ValidationError(ctx + ": one neighborhood per CDR required");
        for (std::size_t i = 0; i < cdrs.size(); ++i) {
            neighborhoods[i].validate(cdrs[i].size(), antigen.size(), cap,
                                      ctx + " neighborhoods[" + std::to_string(i) + "]");
        }
    }
}

}  // namespace paratope
