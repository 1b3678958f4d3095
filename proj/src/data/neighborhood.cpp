#include "paratope/data/neighborhood.hpp"

#include <algorithm>
#include <numeric>

#include "paratope/errors.hpp"

namespace paratope {

std::string_view policy_name(NeighborhoodPolicy p) noexcept {
    return p == NeighborhoodPolicy::spatial ? "spatial" : "window";
}

std::optional<NeighborhoodPolicy> policy_from_name(std::string_view name) noexcept {
    if (name == "spatial") return NeighborhoodPolicy::spatial;
    if (name == "window") return NeighborhoodPolicy::window;
    return std::nullopt;
}

Neighborhood build_neighborhood(const CdrSequence& cdr, const AntigenSequence& antigen, NeighborhoodPolicy policy,
                                std::size_t cap) {
    if (cap == 0) throw ValidationError("neighborhood cap must be positive");
    const std::size_t m = cdr.size();
    const std::size_t n = antigen.size();
    const std::size_t width = std::min(cap, n);
    Neighborhood out;
    out.sets.resize(m);

    if (policy == NeighborhoodPolicy::spatial) {
        if (cdr.coords.size() != m || antigen.coords.size() != n) {
            throw ValidationError("spatial neighborhoods need coordinates for every CDR and antigen residue");
        }
        std::vector<std::uint32_t> order(n);
        std::vector<double> dist(n);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) dist[j] = distance(cdr.coords[i], antigen.coords[j]);
            std::iota(order.begin(), order.end(), 0u);
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(width), order.end(),
                              [&](std::uint32_t a, std::uint32_t b) {
                                  return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
                              });
            out.sets[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(width));
            std::sort(out.sets[i].begin(), out.sets[i].end());
        }
        return out;
    }

    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t center = (2 * i + 1) * n / (2 * m);
        const std::size_t half = width / 2;
        std::size_t start = center > half ? center - half : 0;
        start = std::min(start, n - width);
        out.sets[i].resize(width);
        std::iota(out.sets[i].begin(), out.sets[i].end(), static_cast<std::uint32_t>(start));
    }
    return out;
}

void attach_neighborhoods(std::span<Complex> complexes, const NeighborhoodConfig& config) {
    for (Complex& c : complexes) {
        if (!c.has_antigen()) continue;
        if (c.has_neighborhoods() && !config.overwrite) continue;
        c.neighborhoods.clear();
        for (const CdrSequence& cdr : c.cdrs) {
            NeighborhoodPolicy policy = config.policy.value_or(
                c.antigen.has_coords() && !cdr.coords.empty() ? NeighborhoodPolicy::spatial : NeighborhoodPolicy::window);
            try {
                c.neighborhoods.push_back(build_neighborhood(cdr, c.antigen, policy, config.cap));
            } catch (const ValidationError& err) {
                throw ValidationError("complex '" + c.id + "': " + err.what());
            }
        }
    }
}

std::vector<std::uint32_t> antigen_context(const Complex& complex) {
    std::vector<std::uint32_t> all;
    for (const Neighborhood& n : complex.neighborhoods)
        for (const auto& s : n.sets) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

}  // namespace paratope
