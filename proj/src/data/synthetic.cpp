#include "paratope/data/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "paratope/data/neighborhood.hpp"
#include "paratope/errors.hpp"

namespace paratope {

namespace {

AminoAcid random_standard(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 19);
    return static_cast<AminoAcid>(pick(rng));
}

Point3 jitter(const Point3& p, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, scale);
    return {p.x + d(rng), p.y + d(rng), p.z + d(rng)};
}

}  // namespace

std::vector<Complex> make_synthetic(const SyntheticSpec& spec) {
    if (spec.complexes == 0 || spec.cdrs_per_complex == 0 || spec.cdrs_per_complex > kChainIdCount) {
        throw ValidationError("synthetic spec: need at least one complex and 1..6 CDRs per complex");
    }
    if (spec.min_cdr_length == 0 || spec.min_cdr_length > spec.max_cdr_length || spec.max_cdr_length > kMaxCdrLength) {
        throw ValidationError("synthetic spec: CDR lengths must satisfy 1 <= min <= max <= 32");
    }
    if (spec.antigen_length == 0 || spec.antigen_length > kMaxAntigenLength || spec.cap == 0) {
        throw ValidationError("synthetic spec: antigen length must lie in 1..1269 and cap must be positive");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> cdr_len(spec.min_cdr_length, spec.max_cdr_length);
    std::bernoulli_distribution marker(spec.antigen_marker_rate);
    std::vector<Complex> out;
    out.reserve(spec.complexes);
    for (std::size_t c = 0; c < spec.complexes; ++c) {
        Complex cx;
        char id[16];
        std::snprintf(id, sizeof id, "syn%04zu", c);
        cx.id = id;
        cx.resolution = 2.0;

        Point3 at{};
        for (std::size_t j = 0; j < spec.antigen_length; ++j) {
            AminoAcid aa = AminoAcid::W;
            if (!marker(rng)) {
                do aa = random_standard(rng);
                while (spec.labels == SyntheticLabels::antigen && aa == AminoAcid::W);
            }
            cx.antigen.residues.push_back(aa);
            at = jitter(at, 2.2, rng);
            cx.antigen.coords.push_back(at);
        }
        std::uniform_int_distribution<std::size_t> anchor(0, spec.antigen_length - 1);
        for (std::size_t k = 0; k < spec.cdrs_per_complex; ++k) {
            CdrSequence cdr;
            cdr.chain = kAllChainIds[k];
            const std::size_t len = cdr_len(rng);
            for (std::size_t i = 0; i < len; ++i) {
                AminoAcid aa = random_standard(rng);
                if (spec.labels == SyntheticLabels::antigen && aa == AminoAcid::W) aa = AminoAcid::A;
                cdr.residues.push_back(aa);
                cdr.coords.push_back(jitter(cx.antigen.coords[anchor(rng)], 3.0, rng));
            }
            cx.cdrs.push_back(std::move(cdr));
        }
        for (const CdrSequence& cdr : cx.cdrs) {
            cx.neighborhoods.push_back(build_neighborhood(cdr, cx.antigen, NeighborhoodPolicy::spatial, spec.cap));
        }
        for (std::size_t k = 0; k < cx.cdrs.size(); ++k) {
            CdrSequence& cdr = cx.cdrs[k];
            cdr.labels.resize(cdr.size());
            for (std::size_t i = 0; i < cdr.size(); ++i) {
                bool bind = false;
                if (spec.labels == SyntheticLabels::motif) {
                    const AminoAcid aa = cdr.residues[i];
                    bind = aa == AminoAcid::Y || aa == AminoAcid::W || (i > 0 && cdr.residues[i - 1] == AminoAcid::G);
                } else {
                    const auto& nu = cx.neighborhoods[k].sets[i];
                    bind = std::any_of(nu.begin(), nu.end(),
                                       [&](std::uint32_t j) { return cx.antigen.residues[j] == AminoAcid::W; });
                }
                cdr.labels[i] = bind;
            }
        }
        out.push_back(std::move(cx));
    }
    return out;
}

}  // namespace paratope
