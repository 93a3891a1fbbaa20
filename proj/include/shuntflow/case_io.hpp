#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shuntflow/bfm.hpp"
#include "shuntflow/bim.hpp"
#include "shuntflow/detail/format.hpp"
#include "shuntflow/lindistflow.hpp"
#include "shuntflow/network.hpp"
#include "shuntflow/socp.hpp"

namespace shuntflow {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Case documents
//
// A case file is a single JSON object:
//
//   {
//     "format_version": "1",
//     "base_mva": 100.0,          // optional, default 100
//     "slack": 1,
//     "length_ratio": 1.0,        // optional, default 1
//     "buses": [ {"id": 1, "p_min": "-inf", ... , "v_min": 0.81, "v_max": 1.21} ],
//     "lines": [ {"from": 1, "to": 2, "r": 0.05, "x": 0.1,
//                 "b_shunt_from": 0.02, "b_shunt_to": 0.02, "i_sq_max": "inf"} ]
//   }
//
// Quantities are per-unit on base_mva; voltage bounds apply to the squared
// magnitude. Unbounded entries are the strings "inf" / "-inf". A line may
// give "b_charging" (total charging susceptance, split half per end) instead
// of the four explicit shunt fields. Unknown keys are rejected.
// ---------------------------------------------------------------------------

struct CaseDocument {
    std::string format_version = "1";
    double base_mva = 100.0;
    int slack = 1;
    double length_ratio = 1.0;
    std::vector<Bus> buses;
    struct LineRecord {
        int from = 0, to = 0;
        double r = 0.0, x = 0.0;
        double g_shunt_from = 0.0, b_shunt_from = 0.0;
        double g_shunt_to = 0.0, b_shunt_to = 0.0;
        double i_sq_max = kInf;
    };
    std::vector<LineRecord> lines;
};

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& where, const std::string& what) {
    fail(Errc::schema_violation, where + ": " + what);
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known) schema_fail(where, "unknown key \"" + item.key() + "\"");
    }
}

/// A finite number, or the strings "inf" / "-inf".
inline double read_extended(const json& v, const std::string& where) {
    if (v.is_number()) {
        double d = v.get<double>();
        if (std::isnan(d)) schema_fail(where, "NaN is not a value");
        return d;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
        schema_fail(where, "expected a number or \"inf\"/\"-inf\", got \"" + s + "\"");
    }
    schema_fail(where, "expected a number or \"inf\"/\"-inf\"");
}

inline json write_extended(double v) {
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    return v;
}

inline double read_number(const json& obj, const char* key, const std::string& where,
                          double fallback, bool required = false) {
    if (!obj.contains(key)) {
        if (required) schema_fail(where, std::string("missing required key \"") + key + "\"");
        return fallback;
    }
    return read_extended(obj.at(key), where + "." + key);
}

inline int read_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) schema_fail(where, std::string("missing required key \"") + key + "\"");
    const json& v = obj.at(key);
    if (!v.is_number_integer()) schema_fail(where + "." + key, "expected an integer");
    return v.get<int>();
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        fail(Errc::parse_error, origin + ": line " + std::to_string(line) + ": " + e.what());
    } catch (const json::exception& e) {  // e.g. number overflow
        fail(Errc::parse_error, origin + ": " + e.what());
    }
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(Errc::io_error, "read failure on " + path);
    return ss.str();
}

inline void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot open " + path + " for writing");
    out << text;
    if (!out) fail(Errc::io_error, "write failure on " + path);
}

}  // namespace detail

inline CaseDocument parse_case_document(const std::string& text,
                                        const std::string& origin = "<case>") {
    using namespace detail;
    json root = parse_json_text(text, origin);
    if (!root.is_object()) schema_fail(origin, "top level must be an object");
    reject_unknown_keys(root,
                        {"format_version", "base_mva", "slack", "length_ratio", "buses", "lines"},
                        origin);

    CaseDocument doc;
    if (!root.contains("format_version") || !root.at("format_version").is_string())
        schema_fail(origin, "missing required key \"format_version\" (string)");
    doc.format_version = root.at("format_version").get<std::string>();
    if (doc.format_version != "1")
        schema_fail(origin + ".format_version",
                    "unsupported version \"" + doc.format_version + "\" (expected \"1\")");
    doc.base_mva = read_number(root, "base_mva", origin, 100.0);
    if (!(doc.base_mva > 0.0) || std::isinf(doc.base_mva))
        schema_fail(origin + ".base_mva", "must be a positive finite number");
    doc.slack = read_int(root, "slack", origin);
    doc.length_ratio = read_number(root, "length_ratio", origin, 1.0);
    if (!(doc.length_ratio > 0.0) || std::isinf(doc.length_ratio))
        schema_fail(origin + ".length_ratio", "must be a positive finite number");

    if (!root.contains("buses") || !root.at("buses").is_array())
        schema_fail(origin, "missing required key \"buses\" (array)");
    int bi = 0;
    for (const json& jb : root.at("buses")) {
        std::string where = origin + ".buses[" + std::to_string(bi++) + "]";
        if (!jb.is_object()) schema_fail(where, "expected an object");
        reject_unknown_keys(jb, {"id", "p_min", "p_max", "q_min", "q_max", "v_min", "v_max"},
                            where);
        Bus b;
        b.id = read_int(jb, "id", where);
        b.p_min = read_number(jb, "p_min", where, -kInf);
        b.p_max = read_number(jb, "p_max", where, kInf);
        b.q_min = read_number(jb, "q_min", where, -kInf);
        b.q_max = read_number(jb, "q_max", where, kInf);
        b.v_min = read_number(jb, "v_min", where, 0.81);
        b.v_max = read_number(jb, "v_max", where, 1.21);
        doc.buses.push_back(b);
    }

    if (!root.contains("lines") || !root.at("lines").is_array())
        schema_fail(origin, "missing required key \"lines\" (array)");
    int li = 0;
    for (const json& jl : root.at("lines")) {
        std::string where = origin + ".lines[" + std::to_string(li++) + "]";
        if (!jl.is_object()) schema_fail(where, "expected an object");
        reject_unknown_keys(jl,
                            {"from", "to", "r", "x", "g_shunt_from", "b_shunt_from", "g_shunt_to",
                             "b_shunt_to", "b_charging", "i_sq_max"},
                            where);
        CaseDocument::LineRecord rec;
        rec.from = read_int(jl, "from", where);
        rec.to = read_int(jl, "to", where);
        rec.r = read_number(jl, "r", where, 0.0, true);
        rec.x = read_number(jl, "x", where, 0.0, true);
        if (std::isinf(rec.r) || std::isinf(rec.x))
            schema_fail(where, "series impedance must be finite");
        if (jl.contains("b_charging")) {
            for (const char* k : {"g_shunt_from", "b_shunt_from", "g_shunt_to", "b_shunt_to"})
                if (jl.contains(k))
                    schema_fail(where, std::string("\"b_charging\" excludes \"") + k + "\"");
            double bc = read_number(jl, "b_charging", where, 0.0);
            if (std::isinf(bc)) schema_fail(where + ".b_charging", "must be finite");
            rec.b_shunt_from = bc / 2.0;
            rec.b_shunt_to = bc / 2.0;
        } else {
            rec.g_shunt_from = read_number(jl, "g_shunt_from", where, 0.0);
            rec.b_shunt_from = read_number(jl, "b_shunt_from", where, 0.0);
            rec.g_shunt_to = read_number(jl, "g_shunt_to", where, 0.0);
            rec.b_shunt_to = read_number(jl, "b_shunt_to", where, 0.0);
            for (double v : {rec.g_shunt_from, rec.b_shunt_from, rec.g_shunt_to, rec.b_shunt_to})
                if (std::isinf(v)) schema_fail(where, "shunt admittances must be finite");
        }
        rec.i_sq_max = read_number(jl, "i_sq_max", where, kInf);
        if (rec.i_sq_max < 0.0) schema_fail(where + ".i_sq_max", "must be nonnegative");
        doc.lines.push_back(rec);
    }
    return doc;
}

inline Network to_network(const CaseDocument& doc) {
    std::vector<LineParams> lines;
    lines.reserve(doc.lines.size());
    int li = 0;
    for (const auto& rec : doc.lines) {
        Complex z(rec.r, rec.x);
        if (z == Complex(0.0, 0.0))
            fail(Errc::zero_series_admittance,
                 "lines[" + std::to_string(li) + "] (" + std::to_string(rec.from) + "-" +
                     std::to_string(rec.to) + "): zero series impedance is not representable");
        LineParams ln;
        ln.from = rec.from;
        ln.to = rec.to;
        ln.y_series = 1.0 / z;
        ln.y_shunt_from = Complex(rec.g_shunt_from, rec.b_shunt_from);
        ln.y_shunt_to = Complex(rec.g_shunt_to, rec.b_shunt_to);
        ln.i_sq_max = rec.i_sq_max;
        lines.push_back(ln);
        ++li;
    }
    return Network(doc.buses, lines, doc.slack);
}

inline CaseDocument load_case_document(const std::string& path) {
    return parse_case_document(detail::slurp(path), path);
}

inline Network load_case(const std::string& path) { return to_network(load_case_document(path)); }

inline json case_to_json(const CaseDocument& doc) {
    using detail::write_extended;
    json root;
    root["format_version"] = doc.format_version;
    root["base_mva"] = doc.base_mva;
    root["slack"] = doc.slack;
    root["length_ratio"] = doc.length_ratio;
    root["buses"] = json::array();
    for (const Bus& b : doc.buses) {
        json jb;
        jb["id"] = b.id;
        jb["p_min"] = write_extended(b.p_min);
        jb["p_max"] = write_extended(b.p_max);
        jb["q_min"] = write_extended(b.q_min);
        jb["q_max"] = write_extended(b.q_max);
        jb["v_min"] = b.v_min;
        jb["v_max"] = b.v_max;
        root["buses"].push_back(jb);
    }
    root["lines"] = json::array();
    for (const auto& rec : doc.lines) {
        json jl;
        jl["from"] = rec.from;
        jl["to"] = rec.to;
        jl["r"] = rec.r;
        jl["x"] = rec.x;
        jl["g_shunt_from"] = rec.g_shunt_from;
        jl["b_shunt_from"] = rec.b_shunt_from;
        jl["g_shunt_to"] = rec.g_shunt_to;
        jl["b_shunt_to"] = rec.b_shunt_to;
        jl["i_sq_max"] = write_extended(rec.i_sq_max);
        root["lines"].push_back(jl);
    }
    return root;
}

inline void save_case(const CaseDocument& doc, const std::string& path) {
    detail::spill(path, case_to_json(doc).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Solution files
//
// One JSON object per file, discriminated by "kind": "phasor",
// "branch_flow", or "socp". Complex vectors are stored as re/im array pairs;
// doubles round-trip exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline json complex_array(const std::vector<Complex>& v, bool imag) {
    json a = json::array();
    for (Complex c : v) a.push_back(imag ? c.imag() : c.real());
    return a;
}

inline std::vector<double> read_double_array(const json& obj, const char* key,
                                             std::size_t expected, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_array())
        schema_fail(where, std::string("missing array \"") + key + "\"");
    const json& a = obj.at(key);
    if (a.size() != expected)
        schema_fail(where + "." + key, "expected " + std::to_string(expected) + " entries, got " +
                                           std::to_string(a.size()));
    std::vector<double> out;
    out.reserve(a.size());
    int i = 0;
    for (const json& v : a) {
        out.push_back(read_extended(v, where + "." + key + "[" + std::to_string(i) + "]"));
        ++i;
    }
    return out;
}

inline std::vector<Complex> read_complex_array(const json& obj, const std::string& base,
                                               std::size_t expected, const std::string& where) {
    std::vector<double> re = read_double_array(obj, (base + "_re").c_str(), expected, where);
    std::vector<double> im = read_double_array(obj, (base + "_im").c_str(), expected, where);
    std::vector<Complex> out(expected);
    for (std::size_t i = 0; i < expected; ++i) out[i] = {re[i], im[i]};
    return out;
}

inline std::string expect_kind(const json& root, const std::string& origin) {
    if (!root.is_object() || !root.contains("kind") || !root.at("kind").is_string())
        schema_fail(origin, "missing \"kind\"");
    return root.at("kind").get<std::string>();
}

}  // namespace detail

inline void save_solution(const Network& net, const PhasorSolution& sol,
                          const std::string& path) {
    json root;
    root["kind"] = "phasor";
    root["bus_ids"] = json::array();
    for (int j = 0; j < net.num_buses(); ++j) root["bus_ids"].push_back(net.id_of(j));
    root["V_re"] = detail::complex_array(sol.V, false);
    root["V_im"] = detail::complex_array(sol.V, true);
    root["s_re"] = detail::complex_array(sol.s, false);
    root["s_im"] = detail::complex_array(sol.s, true);
    root["I_re"] = detail::complex_array(sol.I, false);
    root["I_im"] = detail::complex_array(sol.I, true);
    root["S_re"] = detail::complex_array(sol.S, false);
    root["S_im"] = detail::complex_array(sol.S, true);
    root["iterations"] = sol.iterations;
    root["max_mismatch"] = sol.max_mismatch;
    detail::spill(path, root.dump(2) + "\n");
}

inline PhasorSolution load_phasor_solution(const Network& net, const std::string& path) {
    using namespace detail;
    json root = parse_json_text(slurp(path), path);
    if (expect_kind(root, path) != "phasor")
        schema_fail(path, "expected kind \"phasor\", got \"" + expect_kind(root, path) + "\"");
    const std::size_t n = static_cast<std::size_t>(net.num_buses());
    const std::size_t m = static_cast<std::size_t>(net.num_ends());
    PhasorSolution sol;
    sol.V = read_complex_array(root, "V", n, path);
    sol.s = read_complex_array(root, "s", n, path);
    sol.I = read_complex_array(root, "I", m, path);
    sol.S = read_complex_array(root, "S", m, path);
    if (root.contains("iterations")) sol.iterations = root.at("iterations").get<int>();
    if (root.contains("max_mismatch")) sol.max_mismatch = root.at("max_mismatch").get<double>();
    return sol;
}

namespace detail {

inline void write_point_fields(const Network& net, const BranchFlowPoint& x, json& root) {
    auto arr = [](const std::vector<double>& v) {
        json a = json::array();
        for (double d : v) a.push_back(d);
        return a;
    };
    root["bus_ids"] = json::array();
    for (int j = 0; j < net.num_buses(); ++j) root["bus_ids"].push_back(net.id_of(j));
    root["p"] = arr(x.p);
    root["q"] = arr(x.q);
    root["v"] = arr(x.v);
    root["ell"] = arr(x.ell);
    root["P"] = arr(x.P);
    root["Q"] = arr(x.Q);
}

inline BranchFlowPoint read_point_fields(const Network& net, const json& root,
                                         const std::string& origin) {
    const std::size_t n = static_cast<std::size_t>(net.num_buses());
    const std::size_t m = static_cast<std::size_t>(net.num_ends());
    BranchFlowPoint x;
    x.p = read_double_array(root, "p", n, origin);
    x.q = read_double_array(root, "q", n, origin);
    x.v = read_double_array(root, "v", n, origin);
    x.ell = read_double_array(root, "ell", m, origin);
    x.P = read_double_array(root, "P", m, origin);
    x.Q = read_double_array(root, "Q", m, origin);
    return x;
}

}  // namespace detail

inline void save_solution(const Network& net, const BranchFlowPoint& x, const std::string& path) {
    json root;
    root["kind"] = "branch_flow";
    detail::write_point_fields(net, x, root);
    detail::spill(path, root.dump(2) + "\n");
}

inline BranchFlowPoint load_branch_flow_point(const Network& net, const std::string& path) {
    using namespace detail;
    json root = parse_json_text(slurp(path), path);
    if (expect_kind(root, path) != "branch_flow")
        schema_fail(path, "expected kind \"branch_flow\"");
    return read_point_fields(net, root, path);
}

inline void save_solution(const Network& net, const SocpSolution& sol, const std::string& path) {
    json root;
    root["kind"] = "socp";
    detail::write_point_fields(net, sol.x, root);
    root["objective"] = sol.objective;
    json gaps = json::array();
    for (double g : sol.cone_gap) gaps.push_back(g);
    root["cone_gap"] = gaps;
    root["iterations"] = sol.iterations;
    root["kkt"] = {{"primal_residual", sol.kkt.primal_residual},
                   {"dual_residual", sol.kkt.dual_residual},
                   {"gap", sol.kkt.gap},
                   {"relative_gap", sol.kkt.relative_gap}};
    detail::spill(path, root.dump(2) + "\n");
}

inline SocpSolution load_socp_solution(const Network& net, const std::string& path) {
    using namespace detail;
    json root = parse_json_text(slurp(path), path);
    if (expect_kind(root, path) != "socp") schema_fail(path, "expected kind \"socp\"");
    SocpSolution sol;
    sol.x = read_point_fields(net, root, path);
    sol.objective = root.at("objective").get<double>();
    sol.cone_gap =
        read_double_array(root, "cone_gap", static_cast<std::size_t>(net.num_ends()), path);
    sol.iterations = root.at("iterations").get<int>();
    const json& kkt = root.at("kkt");
    sol.kkt.primal_residual = kkt.at("primal_residual").get<double>();
    sol.kkt.dual_residual = kkt.at("dual_residual").get<double>();
    sol.kkt.gap = kkt.at("gap").get<double>();
    sol.kkt.relative_gap = kkt.at("relative_gap").get<double>();
    return sol;
}

// ---------------------------------------------------------------------------
// Flat CSV exports: one row per bus, one row per directed end.
// ---------------------------------------------------------------------------

inline void write_bus_csv(const Network& net, const PhasorSolution& sol, std::ostream& os) {
    using detail::fmt_double;
    os << "bus,V_re,V_im,V_mag,V_angle_rad,p,q\n";
    for (int j = 0; j < net.num_buses(); ++j)
        os << net.id_of(j) << "," << fmt_double(sol.V[j].real()) << ","
           << fmt_double(sol.V[j].imag()) << "," << fmt_double(std::abs(sol.V[j])) << ","
           << fmt_double(std::arg(sol.V[j])) << "," << fmt_double(sol.s[j].real()) << ","
           << fmt_double(sol.s[j].imag()) << "\n";
}

inline void write_end_csv(const Network& net, const PhasorSolution& sol, std::ostream& os) {
    using detail::fmt_double;
    os << "line,tail,head,I_re,I_im,P,Q\n";
    for (int e = 0; e < net.num_ends(); ++e)
        os << net.end_line(e) << "," << net.id_of(net.end_tail(e)) << ","
           << net.id_of(net.end_head(e)) << "," << fmt_double(sol.I[e].real()) << ","
           << fmt_double(sol.I[e].imag()) << "," << fmt_double(sol.S[e].real()) << ","
           << fmt_double(sol.S[e].imag()) << "\n";
}

inline void write_bus_csv(const Network& net, const BranchFlowPoint& x, std::ostream& os) {
    using detail::fmt_double;
    os << "bus,p,q,v\n";
    for (int j = 0; j < net.num_buses(); ++j)
        os << net.id_of(j) << "," << fmt_double(x.p[j]) << "," << fmt_double(x.q[j]) << ","
           << fmt_double(x.v[j]) << "\n";
}

inline void write_end_csv(const Network& net, const BranchFlowPoint& x, std::ostream& os) {
    using detail::fmt_double;
    os << "line,tail,head,ell,P,Q,cone_gap\n";
    for (int e = 0; e < net.num_ends(); ++e)
        os << net.end_line(e) << "," << net.id_of(net.end_tail(e)) << ","
           << net.id_of(net.end_head(e)) << "," << fmt_double(x.ell[e]) << ","
           << fmt_double(x.P[e]) << "," << fmt_double(x.Q[e]) << ","
           << fmt_double(x.v[net.end_tail(e)] * x.ell[e] - std::norm(x.S(e))) << "\n";
}

inline void write_approximation_csv(const Network& net, const ApproximationReport& rep,
                                    std::ostream& os) {
    using detail::fmt_double;
    os << "bus,v_exact,v_lin,rel_err\n";
    for (int j = 0; j < net.num_buses(); ++j)
        os << net.id_of(j) << "," << fmt_double(rep.v_exact[j]) << ","
           << fmt_double(rep.v_lin[j]) << "," << fmt_double(rep.v_rel_err[j]) << "\n";
}

}  // namespace shuntflow
