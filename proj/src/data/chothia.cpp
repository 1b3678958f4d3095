#include "paratope/data/chothia.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "paratope/errors.hpp"

namespace paratope {

ChothiaPosition ChothiaPosition::parse(std::string_view text) {
    std::size_t end = 0;
    while (end < text.size() && (std::isdigit(static_cast<unsigned char>(text[end])) || (end == 0 && text[0] == '-'))) {
        ++end;
    }
    ChothiaPosition pos;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + end, pos.number);
    if (ec != std::errc{} || ptr != text.data() + end || end == 0) {
        throw ParseError("bad Chothia position '" + std::string(text) + "'");
    }
    if (end < text.size()) {
        if (end + 1 != text.size() || !std::isalpha(static_cast<unsigned char>(text[end]))) {
            throw ParseError("bad Chothia insertion code in '" + std::string(text) + "'");
        }
        pos.insertion = static_cast<char>(std::toupper(static_cast<unsigned char>(text[end])));
    }
    return pos;
}

std::string ChothiaPosition::str() const {
    std::string s = std::to_string(number);
    if (insertion != ' ') s.push_back(insertion);
    return s;
}

CdrWindows CdrWindows::chothia() {
    CdrWindows w;
    w.windows[index_of(ChainId::H1)] = {26, 32};
    w.windows[index_of(ChainId::H2)] = {52, 56};
    w.windows[index_of(ChainId::H3)] = {95, 102};
    w.windows[index_of(ChainId::L1)] = {24, 34};
    w.windows[index_of(ChainId::L2)] = {50, 56};
    w.windows[index_of(ChainId::L3)] = {89, 97};
    return w;
}

CdrWindows CdrWindows::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CDR window table " + path.string());
    CdrWindows w;
    std::array<bool, kChainIdCount> seen{};
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name, first, last;
        std::getline(ss, name, ',');
        std::getline(ss, first, ',');
        std::getline(ss, last, ',');
        const auto cdr = chain_from_name(name);
        if (!cdr) throw ParseError(path.string() + ": unknown CDR '" + name + "'");
        try {
            w.windows[index_of(*cdr)] = {std::stoi(first), std::stoi(last)};
        } catch (const std::exception&) {
            throw ParseError(path.string() + ": bad range for " + name);
        }
        seen[index_of(*cdr)] = true;
    }
    for (ChainId c : kAllChainIds) {
        if (!seen[index_of(c)]) throw ParseError(path.string() + ": missing window for " + std::string(chain_name(c)));
    }
    return w;
}

bool CdrWindows::contains(ChainId cdr, const ChothiaPosition& pos) const noexcept {
    const Window& w = windows[index_of(cdr)];
    return pos.number >= w.first - extension && pos.number <= w.last + extension;
}

std::vector<CdrSequence> extract_cdrs(const std::vector<NumberedResidue>& chain, ChainKind kind,
                                      const CdrWindows& windows) {
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (!(chain[i - 1].position < chain[i].position)) {
            throw ValidationError("Chothia positions not strictly increasing at " + chain[i].position.str());
        }
    }
    const std::array<ChainId, 3> cdrs = kind == ChainKind::heavy
                                            ? std::array<ChainId, 3>{ChainId::H1, ChainId::H2, ChainId::H3}
                                            : std::array<ChainId, 3>{ChainId::L1, ChainId::L2, ChainId::L3};
    std::vector<CdrSequence> out;
    for (ChainId id : cdrs) {
        CdrSequence cdr;
        cdr.chain = id;
        bool all_coords = true;
        for (const NumberedResidue& r : chain) {
            if (!windows.contains(id, r.position)) continue;
            cdr.residues.push_back(r.aa);
            cdr.labels.push_back(r.label);
            if (r.coord) {
                cdr.coords.push_back(*r.coord);
            } else {
                all_coords = false;
            }
        }
        if (cdr.residues.empty()) continue;
        if (!all_coords) cdr.coords.clear();
        if (cdr.residues.size() > kMaxCdrLength) {
            throw ValidationError(std::string(chain_name(id)) + " spans " + std::to_string(cdr.residues.size()) +
                                  " residues, more than " + std::to_string(kMaxCdrLength));
        }
        out.push_back(std::move(cdr));
    }
    return out;
}

}  // namespace paratope
