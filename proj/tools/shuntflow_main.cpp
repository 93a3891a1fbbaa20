// Batch front end: validate cases, run power flow, solve the conic
// relaxation, and compare against the linearised model. Output is plain
// "key: value" text, one block per case, printed in argument order even
// when cases run in parallel.
//
// Exit codes: 0 success, 1 usage, 2 case/file error, 3 power-flow failure,
// 4 relaxation solver failure, 5 out of scope for the requested operation.
// With several cases the worst (largest) code wins.

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shuntflow/shuntflow.hpp"

namespace {

using namespace shuntflow;

std::string fmt(double v) { return detail::fmt_double(v); }

int exit_class(Errc c) {
    switch (c) {
        case Errc::disconnected_graph:
        case Errc::zero_series_admittance:
        case Errc::duplicate_bus_id:
        case Errc::dangling_endpoint:
        case Errc::invalid_bus:
        case Errc::parse_error:
        case Errc::schema_violation:
        case Errc::io_error:
            return 2;
        case Errc::non_convergence:
        case Errc::singular_jacobian:
            return 3;
        case Errc::infeasible:
        case Errc::numerical_failure:
        case Errc::iteration_limit:
            return 4;
        default:
            return 5;  // model-scope errors: NotRadial, CostViolatesA2, ...
    }
}

struct RunOptions {
    std::string model = "bim";   // pf: bim | bfm-check
    std::string cost = "loss";   // opf: loss | gen | <json file>
    bool certify = false;        // opf
    bool single_cone = false;    // opf
    bool compare = false;        // lindist
    std::string out;             // solution JSON (single case only)
    std::string csv;             // CSV path prefix (single case only)
    std::string export_path;     // conic program dump (single case only)
    std::optional<double> tol;   // --tol beats SHUNTFLOW_TOL beats defaults
};

double pick_tol(const RunOptions& o, double fallback) { return o.tol ? *o.tol : fallback; }

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot open " + path + " for writing");
    body(f);
    f.flush();
    if (!f) fail(Errc::io_error, "short write to " + path);
}

/// Fixed injections for simulation commands: every non-slack bus consumes or
/// produces exactly (p_max, q_max).
std::vector<Complex> fixed_injections(const Network& net) {
    std::vector<Complex> s(net.num_buses());
    for (int j = 0; j < net.num_buses(); ++j) {
        if (j == net.slack_index()) continue;
        const Bus& b = net.bus(j);
        if (!std::isfinite(b.p_max) || !std::isfinite(b.q_max))
            fail(Errc::invalid_bus, "bus " + std::to_string(b.id) +
                                        ": power flow takes (p_max, q_max) as the fixed "
                                        "injection, which must be finite");
        s[j] = Complex(b.p_max, b.q_max);
    }
    return s;
}

CostSpec cost_from_file(const Network& net, const std::string& path) {
    json doc = detail::parse_json_text(detail::slurp(path), path);
    if (!doc.is_object()) fail(Errc::schema_violation, path + ": cost file must be an object");
    for (const auto& item : doc.items())
        if (item.key() != "c_ell" && item.key() != "c_p" && item.key() != "c_q" &&
            item.key() != "constant")
            fail(Errc::schema_violation, path + ": unknown key \"" + item.key() + "\"");
    auto read_vec = [&](const char* key, std::size_t n, double def) {
        std::vector<double> out(n, def);
        if (!doc.contains(key)) return out;
        const json& arr = doc[key];
        if (!arr.is_array() || arr.size() != n)
            fail(Errc::schema_violation, path + ": \"" + key + "\" must be an array of " +
                                             std::to_string(n) + " numbers");
        for (std::size_t i = 0; i < n; ++i) {
            if (!arr[i].is_number())
                fail(Errc::schema_violation, path + ": \"" + key + "\" must be numeric");
            out[i] = arr[i].get<double>();
        }
        return out;
    };
    CostSpec cost;
    cost.c_ell = read_vec("c_ell", static_cast<std::size_t>(net.num_ends()), 0.0);
    if (!doc.contains("c_ell"))
        fail(Errc::schema_violation, path + ": missing required key \"c_ell\"");
    cost.c_p = read_vec("c_p", static_cast<std::size_t>(net.num_buses()), 0.0);
    cost.c_q = read_vec("c_q", static_cast<std::size_t>(net.num_buses()), 0.0);
    if (doc.contains("constant")) {
        if (!doc["constant"].is_number())
            fail(Errc::schema_violation, path + ": \"constant\" must be a number");
        cost.constant = doc["constant"].get<double>();
    }
    return cost;
}

CostSpec resolve_cost(const Network& net, const std::string& spec) {
    if (spec == "loss") return CostSpec::loss(net);
    if (spec == "gen") return CostSpec::generation(net);
    return cost_from_file(net, spec);
}

std::string line_tag(const Network& net, int l) {
    const LineParams& ln = net.line(l);
    return std::to_string(ln.from) + "-" + std::to_string(ln.to);
}

// ---------------------------------------------------------------- commands

int cmd_validate(const std::string& path, const RunOptions&, std::ostream& os) {
    Network net = load_case(path);
    os << "buses: " << net.num_buses() << "\n";
    os << "lines: " << net.num_lines() << "\n";
    os << "slack bus: " << net.id_of(net.slack_index()) << "\n";
    os << "radial: " << (net.is_radial() ? "yes" : "no") << "\n";
    os << "nonnegative impedance: " << (nonnegative_impedance(net) ? "yes" : "no") << "\n";

    C1Report c1 = check_c1(net);
    os << "injection floors open (C1): " << (c1.holds ? "yes" : "no");
    if (!c1.holds) os << " (bus " << c1.offending_bus << ")";
    os << "\n";

    C2Report c2 = check_c2(net);
    os << "shunt-adjusted taps positive (C2): " << (c2.all_ok ? "yes" : "no");
    if (!c2.all_ok) {
        os << " (lines";
        for (const auto& lr : c2.lines)
            if (!lr.ok) os << " " << line_tag(net, lr.line);
        os << ")";
    }
    os << "\n";

    std::vector<int> atypical = atypical_shunt_lines(net);
    os << "atypical shunt lines: ";
    if (atypical.empty()) {
        os << "none";
    } else {
        for (std::size_t i = 0; i < atypical.size(); ++i)
            os << (i ? " " : "") << line_tag(net, atypical[i]);
    }
    os << "\nok\n";
    return 0;
}

int cmd_pf(const std::string& path, const RunOptions& opt, std::ostream& os) {
    Network net = load_case(path);
    std::vector<Complex> s = fixed_injections(net);
    NewtonOptions nopt;
    nopt.tol = pick_tol(opt, nopt.tol);
    PhasorSolution sol = solve_pf_newton(net, s, nopt);

    os << "model: " << opt.model << "\n";
    os << "iterations: " << sol.iterations << "\n";
    os << "max mismatch: " << fmt(sol.max_mismatch) << "\n";
    const Complex slack = sol.s[net.slack_index()];
    os << "slack injection: p=" << fmt(slack.real()) << " q=" << fmt(slack.imag()) << "\n";
    double vlo = kInf, vhi = -kInf;
    for (const Complex& V : sol.V) {
        vlo = std::min(vlo, std::abs(V));
        vhi = std::max(vhi, std::abs(V));
    }
    os << "voltage magnitude range: [" << fmt(vlo) << ", " << fmt(vhi) << "]\n";

    if (opt.model == "bfm-check") {
        const double gate = pick_tol(opt, 1e-8);
        BranchFlowPoint x = phi1(net, sol, gate);
        double resid = bfm_residual(net, x).max_abs();
        CycleCheck cc = cycle_condition(net, beta(net, x), gate);
        RoundtripReport rt = roundtrip_phasor(net, sol, gate);
        os << "branch residual: " << fmt(resid) << "\n";
        os << "cycle check: " << (cc.ok ? "pass" : "fail") << "\n";
        os << "roundtrip discrepancy: " << fmt(rt.discrepancy) << "\n";
        bool ok = resid <= gate && cc.ok && rt.pass;
        os << "within tolerance: " << (ok ? "yes" : "no") << "\n";
        if (!ok) fail(Errc::non_convergence, "branch-flow check exceeded tolerance");
    }

    if (!opt.out.empty()) save_solution(net, sol, opt.out);
    if (!opt.csv.empty()) {
        write_file(opt.csv + "_bus.csv", [&](std::ostream& f) { write_bus_csv(net, sol, f); });
        write_file(opt.csv + "_end.csv", [&](std::ostream& f) { write_end_csv(net, sol, f); });
    }
    return 0;
}

int cmd_opf(const std::string& path, const RunOptions& opt, std::ostream& os) {
    Network net = load_case(path);
    CostSpec cost = resolve_cost(net, opt.cost);
    SocpBuildOptions build;
    build.single_cone = opt.single_cone;
    SocpProgram prog = build_socp(net, cost, build);

    if (!opt.export_path.empty())
        write_file(opt.export_path, [&](std::ostream& f) { export_program(prog, f); });

    conic::Options copt;
    if (opt.tol) copt.feastol = copt.abstol = copt.reltol = *opt.tol;
    SocpSolution sol = solve_socp(net, prog, copt);

    os << "cost: " << opt.cost << "\n";
    os << "objective: " << fmt(sol.objective) << "\n";
    os << "iterations: " << sol.iterations << "\n";
    os << "kkt residuals: primal=" << fmt(sol.kkt.primal_residual)
       << " dual=" << fmt(sol.kkt.dual_residual) << " gap=" << fmt(sol.kkt.gap) << "\n";
    double max_gap = 0.0;
    for (double g : sol.cone_gap) max_gap = std::max(max_gap, std::abs(g));
    os << "max cone gap: " << fmt(max_gap) << "\n";

    if (opt.certify) {
        ExactnessReport rep = certify_exactness(net, sol, pick_tol(opt, 1e-6));
        os << "injection floors open (C1): " << (rep.c1_holds ? "yes" : "no") << "\n";
        os << "shunt-adjusted taps positive (C2): " << (rep.c2_holds ? "yes" : "no") << "\n";
        os << "lemma gap spread: " << fmt(rep.lemma_gap_spread) << "\n";
        os << "exact: " << (rep.exact ? "yes" : "no") << "\n";
        if (rep.exact) os << "recovered injection residual: " << fmt(rep.recovered_residual) << "\n";
    }

    if (!opt.out.empty()) save_solution(net, sol, opt.out);
    if (!opt.csv.empty()) {
        write_file(opt.csv + "_bus.csv", [&](std::ostream& f) { write_bus_csv(net, sol.x, f); });
        write_file(opt.csv + "_end.csv", [&](std::ostream& f) { write_end_csv(net, sol.x, f); });
    }
    return 0;
}

int cmd_lindist(const std::string& path, const RunOptions& opt, std::ostream& os) {
    CaseDocument doc = load_case_document(path);
    Network net = to_network(doc);
    std::vector<Complex> s = fixed_injections(net);
    LinDistResult lin = solve_lindistflow(net, s);

    double vlo = kInf, vhi = -kInf;
    for (double v : lin.v) {
        vlo = std::min(vlo, v);
        vhi = std::max(vhi, v);
    }
    os << "linear squared-voltage range: [" << fmt(vlo) << ", " << fmt(vhi) << "]\n";

    if (opt.compare) {
        NewtonOptions nopt;
        nopt.tol = pick_tol(opt, nopt.tol);
        PhasorSolution ph = solve_pf_newton(net, s, nopt);
        BranchFlowPoint x = phi1(net, ph, pick_tol(opt, 1e-8));
        ApproximationReport rep = approximation_report(net, x, lin, doc.length_ratio);
        os << "newton iterations: " << ph.iterations << "\n";
        os << "max rel voltage error: " << fmt(rep.max_rel_error) << "\n";
        os << "total loss: " << fmt(rep.total_loss) << "\n";
        os << "loss fraction: " << fmt(rep.loss_fraction) << "\n";
        os << "linear dominates: " << (rep.v_lin_dominates ? "yes" : "no") << "\n";
        os << "max bookkeeping residual: " << fmt(rep.max_bookkeeping_residual) << "\n";
        os << "lines outside advisory band: ";
        bool any = false;
        for (std::size_t l = 0; l < rep.lines.size(); ++l)
            if (!rep.lines[l].ratio_within || !rep.lines[l].drop_within) {
                os << (any ? " " : "") << line_tag(net, static_cast<int>(l));
                any = true;
            }
        os << (any ? "" : "none") << "\n";
        if (!opt.csv.empty())
            write_file(opt.csv + "_approx.csv",
                       [&](std::ostream& f) { write_approximation_csv(net, rep, f); });
    }
    return 0;
}

// ------------------------------------------------------------------ driver

int run_one(const std::string& cmd, const std::string& path, const RunOptions& opt,
            std::ostream& os) {
    os << "case: " << path << "\n";
    try {
        if (cmd == "validate") return cmd_validate(path, opt, os);
        if (cmd == "pf") return cmd_pf(path, opt, os);
        if (cmd == "opf") return cmd_opf(path, opt, os);
        return cmd_lindist(path, opt, os);
    } catch (const Error& e) {
        os << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
        return exit_class(e.code());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branch-flow power tools: validation, power flow, conic OPF, linear model"};
    app.require_subcommand(1);

    std::vector<std::string> cases;
    RunOptions opt;
    int jobs = 1;
    double tol_flag = 0.0;

    auto add_common = [&](CLI::App* sub, bool with_tol) {
        sub->add_option("cases", cases, "case file(s)")->required()->expected(-1);
        sub->add_option("--jobs", jobs, "worker threads across cases")
            ->check(CLI::PositiveNumber);
        if (with_tol)
            sub->add_option("--tol", tol_flag, "residual tolerance override")
                ->check(CLI::PositiveNumber);
    };

    CLI::App* validate = app.add_subcommand("validate", "structural and model-scope checks");
    add_common(validate, false);

    CLI::App* pf = app.add_subcommand("pf", "Newton power flow at the case injections");
    add_common(pf, true);
    pf->add_option("--model", opt.model, "bim | bfm-check (adds the branch-flow pipeline)")
        ->check(CLI::IsMember({"bim", "bfm-check"}));
    pf->add_option("--out", opt.out, "write the solution as JSON");
    pf->add_option("--csv", opt.csv, "write <prefix>_bus.csv and <prefix>_end.csv");

    CLI::App* opf = app.add_subcommand("opf", "second-order cone relaxation of OPF");
    add_common(opf, true);
    opf->add_option("--cost", opt.cost, "loss | gen | cost JSON file");
    opf->add_flag("--certify", opt.certify, "check tightness and recover phasors");
    opf->add_flag("--single-cone", opt.single_cone, "one cone per line instead of per end");
    opf->add_option("--out", opt.out, "write the solution as JSON");
    opf->add_option("--csv", opt.csv, "write <prefix>_bus.csv and <prefix>_end.csv");
    opf->add_option("--export", opt.export_path, "dump the conic program in text form");

    CLI::App* lindist = app.add_subcommand("lindist", "linearised radial model");
    add_common(lindist, true);
    lindist->add_flag("--compare", opt.compare, "also run exact power flow and report errors");
    lindist->add_option("--csv", opt.csv, "write <prefix>_approx.csv (needs --compare)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_option_no_throw("--tol") && sub->count("--tol") > 0) {
        opt.tol = tol_flag;
    } else if (const char* env = std::getenv("SHUNTFLOW_TOL")) {
        char* end = nullptr;
        double v = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(v > 0.0) || !std::isfinite(v)) {
            std::cerr << "SHUNTFLOW_TOL must be a positive number, got \"" << env << "\"\n";
            return 1;
        }
        opt.tol = v;
    }

    if (cases.size() > 1 && !(opt.out.empty() && opt.csv.empty() && opt.export_path.empty())) {
        std::cerr << "--out/--csv/--export work on a single case only\n";
        return 1;
    }
    if (sub->get_name() == "lindist" && !opt.csv.empty() && !opt.compare) {
        std::cerr << "lindist --csv needs --compare\n";
        return 1;
    }

    const int n = static_cast<int>(cases.size());
    std::vector<std::string> blocks(n);
    std::vector<int> codes(n, 0);
    const std::string cmd = sub->get_name();

    int workers = std::min(jobs, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) {
            std::ostringstream ss;
            codes[i] = run_one(cmd, cases[i], opt, ss);
            blocks[i] = ss.str();
        }
    } else {
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                std::ostringstream ss;
                codes[i] = run_one(cmd, cases[i], opt, ss);
                blocks[i] = ss.str();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    int worst = 0;
    for (int i = 0; i < n; ++i) {
        if (i) std::cout << "\n";
        std::cout << blocks[i];
        worst = std::max(worst, codes[i]);
    }
    std::cout.flush();
    return worst;
}
