#include "paratope/data/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "paratope/errors.hpp"

namespace paratope {

namespace {

using nlohmann::json;

class RecordReader {
public:
    RecordReader(const std::string& source, std::size_t line) : where_(source + ":" + std::to_string(line)) {}

    void set_id(const std::string& id) { where_ += " record '" + id + "'"; }

    [[noreturn]] void fail(const std::string& field, const std::string& problem) const {
        throw ParseError(where_ + ": field '" + field + "': " + problem);
    }

    std::string context() const { return where_; }

    const json& require(const json& obj, const char* key, const std::string& field) const {
        auto it = obj.find(key);
        if (it == obj.end()) fail(field, "missing");
        return *it;
    }

    std::string string(const json& v, const std::string& field) const {
        if (!v.is_string()) fail(field, "expected a string");
        return v.get<std::string>();
    }

    double number(const json& v, const std::string& field) const {
        if (!v.is_number()) fail(field, "expected a number");
        return v.get<double>();
    }

    std::vector<std::uint8_t> labels(const json& v, const std::string& field) const {
        if (!v.is_array()) fail(field, "expected an array of 0/1");
        std::vector<std::uint8_t> out;
        for (const json& x : v) {
            if (!x.is_number_integer() || (x.get<int>() != 0 && x.get<int>() != 1)) fail(field, "labels must be 0 or 1");
            out.push_back(static_cast<std::uint8_t>(x.get<int>()));
        }
        return out;
    }

    Point3 point(const json& v, const std::string& field) const {
        if (!v.is_array() || v.size() != 3) fail(field, "expected [x, y, z]");
        return {number(v[0], field), number(v[1], field), number(v[2], field)};
    }

    std::vector<Point3> coords(const json& v, const std::string& field) const {
        if (!v.is_array()) fail(field, "expected a list of [x, y, z]");
        std::vector<Point3> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(point(v[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }

private:
    std::string where_;
};

// labelled is cleared when any residue omits its label (null or absent);
// such chains are labelled from antigen contacts instead.
std::vector<NumberedResidue> read_numbered(const RecordReader& r, const json& v, const std::string& field,
                                           bool& labelled) {
    labelled = true;
    if (!v.is_array()) r.fail(field, "expected a list of numbered residues");
    std::vector<NumberedResidue> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string f = field + "[" + std::to_string(i) + "]";
        const json& e = v[i];
        if (!e.is_array() || e.size() < 2 || e.size() > 4) r.fail(f, "expected [position, residue, label?, coord?]");
        NumberedResidue res;
        try {
            res.position = ChothiaPosition::parse(e[0].is_string() ? e[0].get<std::string>() : e[0].dump());
        } catch (const ParseError& err) {
            r.fail(f, err.what());
        }
        const std::string aa = r.string(e[1], f);
        if (aa.size() != 1) r.fail(f, "residue must be a one-letter code");
        res.aa = amino_acid_from_char(aa[0]);
        if (e.size() >= 3 && !e[2].is_null()) {
            res.label = r.labels(json::array({e[2]}), f).front();
        } else {
            labelled = false;
        }
        if (e.size() == 4) res.coord = r.point(e[3], f);
        out.push_back(res);
    }
    return out;
}

Complex read_record(const json& rec, RecordReader& r, const ParseOptions& options) {
    if (!rec.is_object()) r.fail("<record>", "expected a JSON object");
    Complex c;
    c.id = r.string(r.require(rec, "id", "id"), "id");
    r.set_id(c.id);
    if (auto it = rec.find("resolution"); it != rec.end() && !it->is_null()) c.resolution = r.number(*it, "resolution");

    if (auto it = rec.find("antigen"); it != rec.end() && !it->is_null()) {
        if (!it->is_object()) r.fail("antigen", "expected an object");
        c.antigen.residues = parse_residues(r.string(r.require(*it, "sequence", "antigen.sequence"), "antigen.sequence"));
        if (auto ct = it->find("coords"); ct != it->end()) c.antigen.coords = r.coords(*ct, "antigen.coords");
    }

    std::vector<bool> needs_labels;
    if (auto it = rec.find("cdrs"); it != rec.end()) {
        if (!it->is_array()) r.fail("cdrs", "expected a list");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string f = "cdrs[" + std::to_string(i) + "]";
            const json& e = (*it)[i];
            if (!e.is_object()) r.fail(f, "expected an object");
            CdrSequence cdr;
            const std::string chain = r.string(r.require(e, "chain", f + ".chain"), f + ".chain");
            const auto id = chain_from_name(chain);
            if (!id) r.fail(f + ".chain", "unknown chain '" + chain + "'");
            cdr.chain = *id;
            cdr.residues = parse_residues(r.string(r.require(e, "sequence", f + ".sequence"), f + ".sequence"));
            if (auto ct = e.find("coords"); ct != e.end()) cdr.coords = r.coords(*ct, f + ".coords");
            auto lt = e.find("labels");
            needs_labels.push_back(lt == e.end());
            if (lt != e.end()) cdr.labels = r.labels(*lt, f + ".labels");
            c.cdrs.push_back(std::move(cdr));
        }
    } else {
        bool any = false;
        for (const auto& [key, kind] : {std::pair{"heavy", ChainKind::heavy}, std::pair{"light", ChainKind::light}}) {
            auto it = rec.find(key);
            if (it == rec.end()) continue;
            any = true;
            std::vector<CdrSequence> found;
            bool labelled = true;
            try {
                found = extract_cdrs(read_numbered(r, *it, key, labelled), kind, options.windows);
            } catch (const ValidationError& err) {
                r.fail(key, err.what());
            }
            for (auto& cdr : found) {
                needs_labels.push_back(!labelled);
                c.cdrs.push_back(std::move(cdr));
            }
        }
        if (!any) r.fail("cdrs", "missing (and no 'heavy'/'light' numbered chains)");
    }

    for (std::size_t i = 0; i < c.cdrs.size(); ++i) {
        if (!needs_labels[i]) continue;
        try {
            c.cdrs[i].labels = label_contacts(c.cdrs[i].coords, c.antigen.coords, options.contact_threshold);
        } catch (const ValidationError& err) {
            throw ValidationError(r.context() + ": cdrs[" + std::to_string(i) + "]: " + err.what());
        }
    }

    if (auto it = rec.find("neighborhoods"); it != rec.end() && !it->is_null()) {
        if (!it->is_array()) r.fail("neighborhoods", "expected one list per CDR");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string f = "neighborhoods[" + std::to_string(i) + "]";
            const json& rows = (*it)[i];
            if (!rows.is_array()) r.fail(f, "expected one index list per residue");
            Neighborhood n;
            for (const json& row : rows) {
                if (!row.is_array()) r.fail(f, "expected index lists");
                std::vector<std::uint32_t> set;
                for (const json& j : row) {
                    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
                        r.fail(f, "indices must be non-negative integers");
                    }
                    set.push_back(j.get<std::uint32_t>());
                }
                n.sets.push_back(std::move(set));
            }
            c.neighborhoods.push_back(std::move(n));
        }
    }

    try {
        c.validate(options.neighborhood_cap);
    } catch (const ValidationError& err) {
        throw ValidationError(r.context() + ": " + err.what());
    }
    return c;
}

json points_json(const std::vector<Point3>& pts) {
    json a = json::array();
    for (const Point3& p : pts) a.push_back({p.x, p.y, p.z});
    return a;
}

}  // namespace

std::vector<Complex> parse_dataset(std::istream& in, const std::string& source, const ParseOptions& options) {
    std::vector<Complex> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        RecordReader reader(source, line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& err) {
            throw ParseError(source + ":" + std::to_string(line_no) + ": malformed JSON: " + err.what());
        }
        out.push_back(read_record(rec, reader, options));
    }
    return out;
}

std::vector<Complex> parse_dataset(const std::filesystem::path& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset " + path.string());
    return parse_dataset(in, path.string(), options);
}

void write_dataset(std::ostream& out, std::span<const Complex> complexes) {
    for (const Complex& c : complexes) {
        json rec;
        rec["id"] = c.id;
        if (c.resolution) rec["resolution"] = *c.resolution;
        json cdrs = json::array();
        for (const CdrSequence& cdr : c.cdrs) {
            json e;
            e["chain"] = std::string(chain_name(cdr.chain));
            e["sequence"] = residues_to_string(cdr.residues);
            e["labels"] = cdr.labels;
            if (!cdr.coords.empty()) e["coords"] = points_json(cdr.coords);
            cdrs.push_back(std::move(e));
        }
        rec["cdrs"] = std::move(cdrs);
        if (c.has_antigen()) {
            json ag;
            ag["sequence"] = residues_to_string(c.antigen.residues);
            if (c.antigen.has_coords()) ag["coords"] = points_json(c.antigen.coords);
            rec["antigen"] = std::move(ag);
        }
        if (!c.neighborhoods.empty()) {
            json ns = json::array();
            for (const Neighborhood& n : c.neighborhoods) ns.push_back(n.sets);
            rec["neighborhoods"] = std::move(ns);
        }
        out << rec.dump() << '\n';
    }
}

void write_dataset(const std::filesystem::path& path, std::span<const Complex> complexes) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_dataset(out, complexes);
}

}  // namespace paratope
