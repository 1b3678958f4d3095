#include "paratope/data/features.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "paratope/errors.hpp"

namespace paratope {

namespace {

// Steric parameter, polarizability, volume, hydrophobicity, isoelectric
// point, helix probability, sheet probability. Rows in ACDEFGHIKLMNPQRSTVWY order.
constexpr std::array<MeilerTable::Row, kAminoAcidCount - 1> kMeilerRows{{
    {{1.28, 0.05, 1.00, 0.31, 6.11, 0.42, 0.23}},
    {{1.77, 0.13, 2.43, 1.54, 6.35, 0.17, 0.41}},
    {{1.60, 0.11, 2.78, -0.77, 2.95, 0.25, 0.20}},
    {{1.56, 0.15, 3.78, -0.64, 3.09, 0.42, 0.21}},
    {{2.94, 0.29, 5.89, 1.79, 5.67, 0.30, 0.38}},
    {{0.00, 0.00, 0.00, 0.00, 6.07, 0.13, 0.15}},
    {{2.99, 0.23, 4.66, 0.13, 7.69, 0.27, 0.30}},
    {{4.19, 0.19, 4.00, 1.80, 6.04, 0.30, 0.45}},
    {{1.89, 0.22, 4.77, -0.99, 9.99, 0.32, 0.27}},
    {{2.59, 0.19, 4.00, 1.70, 6.04, 0.39, 0.31}},
    {{2.35, 0.22, 4.43, 1.23, 5.71, 0.38, 0.32}},
    {{1.60, 0.13, 2.95, -0.60, 6.52, 0.21, 0.22}},
    {{2.67, 0.00, 2.72, 0.72, 6.80, 0.13, 0.34}},
    {{1.56, 0.18, 3.95, -0.22, 5.65, 0.36, 0.25}},
    {{2.34, 0.29, 6.13, -1.01, 10.74, 0.36, 0.25}},
    {{1.31, 0.06, 1.60, -0.04, 5.70, 0.20, 0.28}},
    {{3.03, 0.11, 2.60, 0.26, 5.60, 0.21, 0.36}},
    {{3.67, 0.14, 3.00, 1.22, 6.02, 0.27, 0.49}},
    {{3.21, 0.41, 8.08, 2.25, 5.94, 0.32, 0.42}},
    {{2.94, 0.30, 6.47, 0.96, 5.66, 0.25, 0.41}},
}};

template <typename T, std::size_t N>
std::size_t argmax_block(std::span<const T> v, std::size_t offset) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < N; ++i) {
        if (v[offset + i] > v[offset + best]) best = i;
    }
    return best;
}

}  // namespace

MeilerTable::MeilerTable(const std::array<Row, kAminoAcidCount - 1>& standard_rows) {
    Row mean{};
    for (std::size_t i = 0; i + 1 < kAminoAcidCount; ++i) {
        rows_[i] = standard_rows[i];
        for (std::size_t c = 0; c < kMeilerFeatures; ++c) mean[c] += standard_rows[i][c];
    }
    for (double& m : mean) m /= static_cast<double>(kAminoAcidCount - 1);
    rows_[index_of(AminoAcid::UNK)] = mean;
}

const MeilerTable& MeilerTable::standard() {
    static const MeilerTable table(kMeilerRows);
    return table;
}

MeilerTable MeilerTable::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open Meiler table " + path.string());
    std::array<Row, kAminoAcidCount - 1> rows{};
    std::array<bool, kAminoAcidCount> seen{};
    Row unk{};
    std::string line;
    std::getline(in, line);  // header
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string code;
        std::getline(ss, code, ',');
        if (code.size() != 1) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad amino-acid code");
        const AminoAcid aa = amino_acid_from_char(code[0]);
        Row r{};
        for (double& v : r) {
            std::string cell;
            if (!std::getline(ss, cell, ',')) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 7 values");
            }
            try {
                v = std::stod(cell);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
            }
        }
        seen[index_of(aa)] = true;
        if (aa == AminoAcid::UNK) {
            unk = r;
        } else {
            rows[index_of(aa)] = r;
        }
    }
    for (std::size_t i = 0; i + 1 < kAminoAcidCount; ++i) {
        if (!seen[i]) {
            throw ParseError(path.string() + ": missing row for '" + std::string(1, kAminoAcidLetters[i]) + "'");
        }
    }
    MeilerTable table(rows);
    if (seen[index_of(AminoAcid::UNK)]) table.set_row(AminoAcid::UNK, unk);
    return table;
}

AntibodyFeatures encode_antibody_residue(AminoAcid aa, ChainId chain, const MeilerTable& table) {
    AntibodyFeatures f{};
    f[index_of(aa)] = 1.0;
    f[kAminoAcidCount + index_of(chain)] = 1.0;
    const auto& m = table.row(aa);
    std::copy(m.begin(), m.end(), f.begin() + kAminoAcidCount + kChainIdCount);
    return f;
}

AntigenFeatures encode_antigen_residue(AminoAcid aa, const MeilerTable& table) {
    AntigenFeatures f{};
    f[index_of(aa)] = 1.0;
    const auto& m = table.row(aa);
    std::copy(m.begin(), m.end(), f.begin() + kAminoAcidCount);
    return f;
}

template <typename T>
std::pair<AminoAcid, ChainId> decode_antibody_residue(std::span<const T> features) {
    if (features.size() != kAntibodyFeatures) throw ShapeError("antibody feature vector must have 34 entries");
    const auto aa = argmax_block<T, kAminoAcidCount>(features, 0);
    const auto chain = argmax_block<T, kChainIdCount>(features, kAminoAcidCount);
    return {static_cast<AminoAcid>(aa), static_cast<ChainId>(chain)};
}

template std::pair<AminoAcid, ChainId> decode_antibody_residue<float>(std::span<const float>);
template std::pair<AminoAcid, ChainId> decode_antibody_residue<double>(std::span<const double>);

}  // namespace paratope
