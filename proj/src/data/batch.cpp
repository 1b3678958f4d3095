#include "paratope/data/batch.hpp"

#include <algorithm>
#include <map>

#include "paratope/data/neighborhood.hpp"
#include "paratope/errors.hpp"

namespace paratope {

std::vector<SampleRef> all_samples(std::span<const Complex> complexes) {
    std::vector<SampleRef> out;
    for (std::size_t c = 0; c < complexes.size(); ++c)
        for (std::size_t k = 0; k < complexes[c].cdrs.size(); ++k) out.push_back({c, k});
    return out;
}

template <typename T>
Batch<T> pad_and_mask(std::span<const Complex> complexes, std::span<const SampleRef> samples, bool with_antigen,
                      const MeilerTable& table) {
    if (samples.empty()) throw ValidationError("pad_and_mask: empty batch");
    Batch<T> batch;
    batch.samples.assign(samples.begin(), samples.end());
    std::size_t max_len = 0;
    for (const SampleRef& s : samples) {
        if (s.complex >= complexes.size() || s.cdr >= complexes[s.complex].cdrs.size()) {
            throw ValidationError("pad_and_mask: sample reference out of range");
        }
        max_len = std::max(max_len, complexes[s.complex].cdrs[s.cdr].size());
    }
    const std::size_t B = samples.size();
    batch.antibody = Tensor<T>(Shape{B, max_len, kAntibodyFeatures});
    batch.antibody_mask = Tensor<T>(Shape{B, max_len});
    batch.labels = Tensor<T>(Shape{B, max_len});
    for (std::size_t b = 0; b < B; ++b) {
        const CdrSequence& cdr = complexes[samples[b].complex].cdrs[samples[b].cdr];
        for (std::size_t i = 0; i < cdr.size(); ++i) {
            const auto f = encode_antibody_residue(cdr.residues[i], cdr.chain, table);
            std::copy(f.begin(), f.end(), batch.antibody.raw() + (b * max_len + i) * kAntibodyFeatures);
            batch.antibody_mask[b * max_len + i] = T{1};
            batch.labels[b * max_len + i] = static_cast<T>(cdr.labels[i]);
        }
    }
    if (!with_antigen) return batch;

    // One antigen row per distinct complex, in first-appearance order.
    std::map<std::size_t, std::size_t> row_of;
    std::vector<std::size_t> row_complex;
    std::vector<std::vector<std::uint32_t>> contexts;
    std::size_t span = 0;
    for (const SampleRef& s : samples) {
        if (row_of.count(s.complex)) continue;
        const Complex& c = complexes[s.complex];
        if (!c.has_antigen()) throw ValidationError("complex '" + c.id + "' has no antigen sequence");
        if (!c.has_neighborhoods()) throw ValidationError("complex '" + c.id + "' has no neighborhoods built");
        auto ctx = antigen_context(c);
        if (ctx.empty()) throw ValidationError("complex '" + c.id + "' has empty neighborhoods");
        span = std::max<std::size_t>(span, ctx.back() - ctx.front() + 1);
        row_of[s.complex] = row_complex.size();
        row_complex.push_back(s.complex);
        contexts.push_back(std::move(ctx));
    }
    const std::size_t G = row_complex.size();
    batch.antigen = Tensor<T>(Shape{G, span, kAntigenFeatures});
    batch.antigen_mask = Tensor<T>(Shape{G, span});
    batch.antigen_offset.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        const Complex& c = complexes[row_complex[g]];
        const std::size_t lo = contexts[g].front();
        batch.antigen_offset[g] = lo;
        for (std::uint32_t j : contexts[g]) {
            const auto f = encode_antigen_residue(c.antigen.residues[j], table);
            std::copy(f.begin(), f.end(), batch.antigen.raw() + (g * span + (j - lo)) * kAntigenFeatures);
            batch.antigen_mask[g * span + (j - lo)] = T{1};
        }
    }

    auto pattern = std::make_shared<AttentionPattern>();
    pattern->batch = B;
    pattern->queries = max_len;
    pattern->key_rows = G;
    pattern->keys = span;
    pattern->key_row.resize(B);
    pattern->offsets.assign(1, 0);
    for (std::size_t b = 0; b < B; ++b) {
        const Complex& c = complexes[samples[b].complex];
        const std::size_t g = row_of.at(samples[b].complex);
        pattern->key_row[b] = g;
        const Neighborhood& nb = c.neighborhoods[samples[b].cdr];
        for (std::size_t i = 0; i < max_len; ++i) {
            if (i < nb.size()) {
                if (nb.sets[i].empty()) {
                    throw ValidationError("complex '" + c.id + "': residue " + std::to_string(i) +
                                          " has an empty neighborhood");
                }
                for (std::uint32_t j : nb.sets[i]) {
                    pattern->index.push_back(static_cast<std::uint32_t>(j - batch.antigen_offset[g]));
                }
            }
            pattern->offsets.push_back(pattern->index.size());
        }
    }
    pattern->validate();
    batch.neighborhoods = std::move(pattern);
    return batch;
}

template <typename T>
std::vector<UnpaddedSample> unpad(const Batch<T>& batch) {
    const std::size_t B = batch.size(), L = batch.max_cdr_length();
    std::vector<UnpaddedSample> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < L; ++i) {
            if (batch.antibody_mask[b * L + i] == T{0}) continue;
            const auto row = std::span<const T>(batch.antibody.raw() + (b * L + i) * kAntibodyFeatures, kAntibodyFeatures);
            const auto [aa, chain] = decode_antibody_residue<T>(row);
            out[b].residues.push_back(aa);
            out[b].chains.push_back(chain);
            out[b].labels.push_back(static_cast<std::uint8_t>(batch.labels[b * L + i]));
        }
    }
    return out;
}

template struct Batch<float>;
template struct Batch<double>;
template Batch<float> pad_and_mask<float>(std::span<const Complex>, std::span<const SampleRef>, bool, const MeilerTable&);
template Batch<double> pad_and_mask<double>(std::span<const Complex>, std::span<const SampleRef>, bool,
                                            const MeilerTable&);
template std::vector<UnpaddedSample> unpad<float>(const Batch<float>&);
template std::vector<UnpaddedSample> unpad<double>(const Batch<double>&);

}  // namespace paratope
