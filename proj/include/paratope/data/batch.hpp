#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "paratope/data/complex.hpp"
#include "paratope/data/features.hpp"
#include "paratope/tensor/ops.hpp"

namespace paratope {

/// One training/prediction unit: a single CDR of a complex.
struct SampleRef {
    std::size_t complex = 0;
    std::size_t cdr = 0;

    friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

/// Every CDR of every complex, in dataset order.
std::vector<SampleRef> all_samples(std::span<const Complex> complexes);

/// Padded, masked model inputs for a list of CDRs.
///
/// CDRs of the same complex share one antigen row. Antigen residues outside
/// the union of the complex's neighborhoods are zeroed and masked, and each
/// antigen row is cropped to the span of that union; antigen_offset maps
/// column 0 of row g back to the original antigen index.
template <typename T>
struct Batch {
    std::vector<SampleRef> samples;
    Tensor<T> antibody;       ///< [B, L_ab, 34]
    Tensor<T> antibody_mask;  ///< [B, L_ab]
    Tensor<T> labels;         ///< [B, L_ab]

    Tensor<T> antigen;        ///< [G, L_ag, 28], empty for antibody-only batches
    Tensor<T> antigen_mask;   ///< [G, L_ag]
    std::vector<std::size_t> antigen_offset;
    /// Query (b, i) -> cropped antigen columns of row key_row[b].
    std::shared_ptr<const AttentionPattern> neighborhoods;

    std::size_t size() const noexcept { return samples.size(); }
    std::size_t max_cdr_length() const { return antibody.dim(1); }
    bool has_antigen() const noexcept { return !antigen.empty(); }
};

/// Throws ValidationError for an empty sample list, or when with_antigen is
/// set and a complex lacks an antigen or neighborhoods.
template <typename T>
Batch<T> pad_and_mask(std::span<const Complex> complexes, std::span<const SampleRef> samples,
                      bool with_antigen, const MeilerTable& table = MeilerTable::standard());

struct UnpaddedSample {
    std::vector<AminoAcid> residues;
    std::vector<ChainId> chains;
    std::vector<std::uint8_t> labels;
};

/// Recovers residues, chain tags and labels from the unmasked positions.
template <typename T>
std::vector<UnpaddedSample> unpad(const Batch<T>& batch);

}  // namespace paratope
