#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace paratope {

/// The 20 standard amino acids in alphabetical one-letter order, then UNK.
enum class AminoAcid : std::uint8_t { A, C, D, E, F, G, H, I, K, L, M, N, P, Q, R, S, T, V, W, Y, UNK };

inline constexpr std::size_t kAminoAcidCount = 21;
inline constexpr std::string_view kAminoAcidLetters = "ACDEFGHIKLMNPQRSTVWYX";

/// Any unrecognised character maps to UNK. Case-insensitive.
AminoAcid amino_acid_from_char(char c) noexcept;
char amino_acid_letter(AminoAcid aa) noexcept;
std::vector<AminoAcid> parse_residues(std::string_view sequence);
std::string residues_to_string(std::span<const AminoAcid> residues);

enum class ChainId : std::uint8_t { H1, H2, H3, L1, L2, L3 };

inline constexpr std::size_t kChainIdCount = 6;
inline constexpr std::array<ChainId, kChainIdCount> kAllChainIds{ChainId::H1, ChainId::H2, ChainId::H3,
                                                                 ChainId::L1, ChainId::L2, ChainId::L3};

std::string_view chain_name(ChainId chain) noexcept;
std::optional<ChainId> chain_from_name(std::string_view name) noexcept;

inline constexpr std::size_t index_of(AminoAcid aa) noexcept { return static_cast<std::size_t>(aa); }
inline constexpr std::size_t index_of(ChainId c) noexcept { return static_cast<std::size_t>(c); }

struct Point3 {
    double x = 0;
    double y = 0;
    double z = 0;

    friend bool operator==(const Point3&, const Point3&) = default;
};

double distance(const Point3& a, const Point3& b) noexcept;

}  // namespace paratope
