#include "paratope/data/residue.hpp"

#include <cctype>
#include <cmath>

namespace paratope {

AminoAcid amino_acid_from_char(char c) noexcept {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (std::size_t i = 0; i < kAminoAcidCount - 1; ++i) {
        if (kAminoAcidLetters[i] == u) return static_cast<AminoAcid>(i);
    }
    return AminoAcid::UNK;
}

char amino_acid_letter(AminoAcid aa) noexcept {
    return kAminoAcidLetters[index_of(aa)];
}

std::vector<AminoAcid> parse_residues(std::string_view sequence) {
    std::vector<AminoAcid> out;
    out.reserve(sequence.size());
    for (char c : sequence) out.push_back(amino_acid_from_char(c));
    return out;
}

std::string residues_to_string(std::span<const AminoAcid> residues) {
    std::string s;
    s.reserve(residues.size());
    for (AminoAcid aa : residues) s.push_back(amino_acid_letter(aa));
    return s;
}

std::string_view chain_name(ChainId chain) noexcept {
    static constexpr std::array<std::string_view, kChainIdCount> names{"H1", "H2", "H3", "L1", "L2", "L3"};
    return names[index_of(chain)];
}

std::optional<ChainId> chain_from_name(std::string_view name) noexcept {
    for (ChainId c : kAllChainIds) {
        if (chain_name(c) == name) return c;
    }
    return std::nullopt;
}

double distance(const Point3& a, const Point3& b) noexcept {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace paratope
