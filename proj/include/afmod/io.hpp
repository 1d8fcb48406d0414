#pragma once

// Artifact serialization: mesh and field JSON, holonomy JSON, continuation
// and curvature-sweep CSV. All emitters are deterministic: fixed key order,
// fixed iteration order, and fixed floating-point formatting.

#include <afmod/germ.hpp>
#include <afmod/higgs.hpp>
#include <afmod/surface.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace afmod::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kMeshSchema = "afmod-mesh-v1";
inline constexpr const char* kConfigSchema = "afmod-config-v1";

/// Fixed-width round-trip formatting for CSV cells.
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline json mesh_to_json(const FundamentalMesh& m,
                         const std::map<std::string, std::vector<double>>& fields = {}) {
    json j;
    j["schema"] = kMeshSchema;
    json verts = json::array();
    for (const cplx& z : m.vertices) verts.push_back({z.real(), z.imag()});
    j["vertices"] = std::move(verts);
    json tris = json::array();
    for (const auto& t : m.triangles) tris.push_back({t[0], t[1], t[2]});
    j["triangles"] = std::move(tris);
    json ids = json::array();
    for (const auto& id : m.identifications) ids.push_back({id.i, id.j, id.gen});
    j["identifications"] = std::move(ids);
    json f = json::object();
    for (const auto& [name, values] : fields) f[name] = values;
    j["fields"] = std::move(f);
    return j;
}

/// Raw mesh artifact contents, as stored; geometric reconstruction is the
/// caller's job (the mesh is rebuilt from config and cross-checked).
struct MeshArtifact {
    std::vector<cplx> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<int, 3>> identifications; // (i, j, gen)
    std::map<std::string, std::vector<double>> fields;
};

inline MeshArtifact mesh_from_json(const json& j) {
    if (!j.contains("schema") || j["schema"] != kMeshSchema)
        throw InvalidState("mesh artifact: wrong or missing schema tag");
    MeshArtifact a;
    for (const auto& v : j.at("vertices"))
        a.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    for (const auto& t : j.at("triangles"))
        a.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    for (const auto& id : j.at("identifications"))
        a.identifications.push_back(
            {id.at(0).get<int>(), id.at(1).get<int>(), id.at(2).get<int>()});
    for (const auto& [name, values] : j.at("fields").items())
        a.fields[name] = values.get<std::vector<double>>();
    return a;
}

inline json holonomy_to_json(const HolonomyRep& rep) {
    json j;
    j["basepoint"] = {rep.basepoint.real(), rep.basepoint.imag()};
    json gens = json::array();
    for (const Mat2C& g : rep.rho) {
        json entries = json::array();
        for (const cplx& e : {g.a, g.b, g.c, g.d})
            entries.push_back({e.real(), e.imag()});
        gens.push_back(std::move(entries));
    }
    j["generators"] = std::move(gens);
    json traces = json::array();
    for (const cplx& t : rep.traces()) traces.push_back({t.real(), t.imag()});
    j["traces"] = std::move(traces);
    j["relator_residual"] = rep.relator_residual;
    j["branch_bits"] = rep.branch_bits;
    return j;
}

inline std::string trace_to_csv(const ContinuationTrace& trace) {
    std::ostringstream out;
    out << "t,iters,residual,max_sigma_norm,positivity_margin\n";
    for (const auto& s : trace.steps)
        out << fmt(s.t) << ',' << s.newton_iters << ',' << fmt(s.residual)
            << ',' << fmt(s.max_sigma_norm) << ',' << fmt(s.positivity_margin)
            << '\n';
    return out.str();
}

struct SweepRow {
    double z_x, z_y, t, value, fd_error_estimate;
};

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "z_x,z_y,t,value,fd_error_estimate\n";
    for (const auto& r : rows)
        out << fmt(r.z_x) << ',' << fmt(r.z_y) << ',' << fmt(r.t) << ','
            << fmt(r.value) << ',' << fmt(r.fd_error_estimate) << '\n';
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidState("cannot open for writing: " + path.string());
    f << body;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArtifactNotFound("missing artifact: " + path.string());
    std::ostringstream body;
    body << f.rdbuf();
    return body.str();
}

inline json load_json(const std::filesystem::path& path) {
    return json::parse(read_text(path));
}

} // namespace afmod::io
