// End-to-end acceptance checks. Each criterion prints exactly one verdict
// line: PASS/FAIL, a name, and the measured figures. The process exits
// nonzero if any criterion fails. All sweeps are seeded; the output is
// byte-stable from run to run.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace shuntflow;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    if (!ok) ++failures;
}

template <typename Body>
void criterion(const char* name, Body body) {
    try {
        std::pair<bool, std::string> r = body();
        report(name, r.first, r.second);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string slurp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Model round trips: phasor -> branch flow -> phasor on radial and meshed
// networks; residuals of every equation family and the recovery discrepancy
// stay at solver precision.
std::pair<bool, std::string> roundtrip_sweep() {
    sftest::Rng rng(0xACCE0001);
    double max_resid = 0.0, max_disc = 0.0;
    int cases = 0;
    auto visit = [&](const sftest::RandomCase& rc) {
        PhasorSolution sol = solve_pf_newton(rc.net, rc.injections);
        BranchFlowPoint x = phi1(rc.net, sol);
        max_resid = std::max(max_resid, bfm_residual(rc.net, x).max_abs());
        max_disc = std::max(max_disc, roundtrip_phasor(rc.net, sol).discrepancy);
        ++cases;
    };
    for (int rep = 0; rep < 50; ++rep) visit(sftest::random_radial(rng, 3, 30));
    for (int rep = 0; rep < 20; ++rep) visit(sftest::random_meshed(rng, 3, 15));
    bool ok = cases == 70 && max_resid <= 1e-8 && max_disc <= 1e-8;
    return {ok, std::to_string(cases) + " cases, max residual " + num(max_resid) +
                    ", max roundtrip " + num(max_disc)};
}

// Gap conservation: on points satisfying both voltage-drop equations and the
// link equation, the two cone gaps of a line agree.
std::pair<bool, std::string> gap_conservation() {
    sftest::Rng rng(0xACCE0002);
    double worst = 0.0;
    int done = 0, attempts = 0;
    while (done < 1000 && attempts < 20000) {
        ++attempts;
        Complex z(rng.uniform(0.01, 0.08), rng.uniform(0.02, 0.12));
        std::vector<Bus> buses(2);
        buses[0].id = 1;
        buses[1].id = 2;
        LineParams ln;
        ln.from = 1;
        ln.to = 2;
        ln.y_series = 1.0 / z;
        ln.y_shunt_from = Complex(0.0, rng.uniform(0.0, 0.35));
        ln.y_shunt_to = Complex(0.0, rng.uniform(0.0, 0.35));
        Network net(buses, {ln}, 1);

        double vj = rng.uniform(0.7, 1.3);
        Complex Sf = rng.complex_in_box(0.6);
        double lf = std::norm(Sf) / vj * rng.uniform(0.2, 1.8);  // gap of either sign
        Complex af = net.end_alpha(0), ar = net.end_alpha(1);
        double vk = std::norm(af) * vj - 2.0 * (af * std::conj(z) * Sf).real() + std::norm(z) * lf;
        if (vk <= 1e-3) continue;
        Complex df = std::conj(af) * vj - std::conj(z) * Sf;
        Complex Sr = (std::conj(ar) * vk - std::conj(df)) / std::conj(z);
        double lr =
            (vj + 2.0 * (ar * std::conj(z) * Sr).real() - std::norm(ar) * vk) / std::norm(z);

        BranchFlowPoint x = BranchFlowPoint::zeros(2, 1);
        x.v = {vj, vk};
        x.ell = {lf, lr};
        x.P = {Sf.real(), Sr.real()};
        x.Q = {Sf.imag(), Sr.imag()};
        Lemma1Gap g = lemma1_gap(net, x, 0);
        worst = std::max(worst, std::abs(g.difference));
        ++done;
    }
    bool ok = done == 1000 && worst <= 1e-8;
    return {ok, std::to_string(done) + " points, worst gap difference " + num(worst)};
}

// Relaxation exactness: with open injection floors, positive shunt-adjusted
// taps, and a strictly increasing loss cost, every solved radial instance is
// tight and lifts back to phasors that satisfy the injection equations.
std::pair<bool, std::string> exactness_sweep() {
    sftest::Rng rng(0xACCE0003);
    int exact_count = 0;
    double worst_rel_gap = 0.0, worst_lift = 0.0;
    const int n_cases = 50;
    for (int rep = 0; rep < n_cases; ++rep) {
        sftest::RandomCase rc = sftest::random_radial(rng, 3, 12);
        SocpProgram prog = build_socp(rc.net, CostSpec::loss(rc.net));
        SocpSolution sol = solve_socp(rc.net, prog);
        ExactnessReport cert = certify_exactness(rc.net, sol);
        worst_rel_gap =
            std::max(worst_rel_gap, cert.max_gap / std::max(1.0, std::abs(sol.objective)));
        if (cert.exact && cert.recovered) {
            worst_lift = std::max(worst_lift, cert.recovered_residual);
            ++exact_count;
        }
    }
    bool ok = exact_count == n_cases && worst_rel_gap <= 1e-6 && worst_lift <= 1e-7;
    return {ok, std::to_string(exact_count) + "/" + std::to_string(n_cases) +
                    " exact, worst relative gap " + num(worst_rel_gap) + ", worst lift residual " +
                    num(worst_lift)};
}

// Tightening: from a point with slack cones, the closed-form step keeps every
// linear equation, strictly lowers the cost, and lands on a binding boundary.
std::pair<bool, std::string> tightening_sweep() {
    sftest::Rng rng(0xACCE0004);
    double worst_eq = 0.0, min_decrease = kInf, worst_binding = 0.0;
    int done = 0;
    for (int rep = 0; rep < 20; ++rep) {
        sftest::RandomCase rc = sftest::random_radial(rng, 3, 10);
        BranchFlowPoint x0 = phi1(rc.net, solve_pf_newton(rc.net, rc.injections));
        int line = rng.uniform_int(0, rc.net.num_lines() - 1);
        BranchFlowPoint xh = sftest::slacken(rc.net, x0, line, rng.uniform(0.01, 0.05));

        CostSpec cost = CostSpec::loss(rc.net);
        double before = cost.value(xh);
        double eps = tighten_epsilon(rc.net, xh, line);
        if (!(eps > 0.0)) return {false, "nonpositive step at rep " + std::to_string(rep)};
        BranchFlowPoint xt = tighten_step(rc.net, xh, line, eps);
        min_decrease = std::min(min_decrease, before - cost.value(xt));

        BfmResiduals res = bfm_residual(rc.net, xt);
        double eq = std::abs(res.slack_voltage);
        for (Complex c : res.balance) eq = std::max(eq, std::abs(c));
        for (double d : res.drop_fwd) eq = std::max(eq, std::abs(d));
        for (double d : res.drop_rev) eq = std::max(eq, std::abs(d));
        for (Complex c : res.link) eq = std::max(eq, std::abs(c));
        worst_eq = std::max(worst_eq, eq);

        double binding = kInf;
        for (int e : {rc.net.end_of(line, true), rc.net.end_of(line, false)}) {
            double gap = xt.v[rc.net.end_tail(e)] * xt.ell[e] - std::norm(xt.S(e));
            binding = std::min({binding, xt.ell[e], gap});
        }
        worst_binding = std::max(worst_binding, binding);
        if (binding < -1e-9) return {false, "stepped past the boundary at rep " + std::to_string(rep)};
        ++done;
    }
    bool ok = done == 20 && worst_eq <= 1e-10 && min_decrease > 1e-8 && worst_binding <= 1e-8;
    return {ok, std::to_string(done) + " steps, max equation drift " + num(worst_eq) +
                    ", min cost decrease " + num(min_decrease) + ", max binding slack " +
                    num(worst_binding)};
}

// Without shunts every tap is exactly one and the general equations reduce to
// the classical radial recursion.
std::pair<bool, std::string> zero_shunt_reduction() {
    sftest::Rng rng(0xACCE0005);
    sftest::RandomCaseOptions opt;
    opt.shunt_ratio_max = 0.0;
    double worst_alpha = 0.0, worst_family = 0.0;
    int agreed = 0;
    for (int rep = 0; rep < 20; ++rep) {
        sftest::RandomCase rc = sftest::random_radial(rng, 3, 20, opt);
        BranchFlowPoint x = phi1(rc.net, solve_pf_newton(rc.net, rc.injections));
        ZeroShuntReport zr = reduce_zero_shunt_check(rc.net, x);
        worst_alpha = std::max(worst_alpha, zr.max_alpha_deviation);
        worst_family = std::max(worst_family, zr.max_family_difference);
        if (zr.agree) ++agreed;
    }
    bool ok = agreed == 20 && worst_alpha == 0.0 && worst_family <= 1e-12;
    return {ok, std::to_string(agreed) + "/20 agree, tap deviation " + num(worst_alpha) +
                    ", family difference " + num(worst_family)};
}

// Soundness: the relaxed optimum never exceeds the cost of the solved
// operating point at the same injections.
std::pair<bool, std::string> relaxation_soundness() {
    sftest::Rng rng(0xACCE0006);
    double worst_excess = -kInf;
    int done = 0;
    for (int rep = 0; rep < 20; ++rep) {
        sftest::RandomCase rc = sftest::random_radial(rng, 3, 12);
        CostSpec cost = CostSpec::loss(rc.net);
        BranchFlowPoint x = phi1(rc.net, solve_pf_newton(rc.net, rc.injections));
        SocpSolution sol = solve_socp(rc.net, build_socp(rc.net, cost));
        worst_excess = std::max(worst_excess, sol.objective - cost.value(x));
        ++done;
    }
    bool ok = done == 20 && worst_excess <= 1e-7;
    return {ok, std::to_string(done) + " cases, max objective excess " + num(worst_excess)};
}

// Approximation band: with tiny shunts and light load, the linearised
// voltage error is controlled by the loss fraction.
std::pair<bool, std::string> approximation_band() {
    sftest::Rng rng(0xACCE0007);
    sftest::RandomCaseOptions opt;
    opt.shunt_ratio_max = 1e-4;
    opt.load_scale = 0.25;
    double worst_ratio = 0.0, worst_err = 0.0;
    int done = 0;
    for (int rep = 0; rep < 20; ++rep) {
        sftest::RandomCase rc = sftest::random_radial(rng, 3, 16, opt);
        BranchFlowPoint x = phi1(rc.net, solve_pf_newton(rc.net, rc.injections));
        LinDistResult lin = solve_lindistflow(rc.net, rc.injections);
        ApproximationReport rep_out = approximation_report(rc.net, x, lin);
        worst_err = std::max(worst_err, rep_out.max_rel_error);
        if (rep_out.loss_fraction > 0.0)
            worst_ratio = std::max(worst_ratio, rep_out.max_rel_error / rep_out.loss_fraction);
        if (rep_out.max_rel_error > 5.0 * rep_out.loss_fraction + 1e-12)
            return {false, "band exceeded at rep " + std::to_string(rep)};
        ++done;
    }
    bool ok = done == 20;
    return {ok, std::to_string(done) + " cases, max rel error " + num(worst_err) +
                    ", worst error/loss ratio " + num(worst_ratio)};
}

// Determinism and optimality certificates: repeated solves produce
// byte-identical serialized solutions, and the reported KKT residuals are at
// tolerance on every case.
std::pair<bool, std::string> determinism_and_kkt() {
    std::vector<std::pair<std::string, sftest::RandomCase>> suite;
    suite.push_back({"two-bus", {sftest::two_bus_network(), sftest::two_bus_load()}});
    suite.push_back({"path3", {sftest::path3_network(), sftest::path3_load()}});
    sftest::Rng rng(0xACCE0008);
    for (int rep = 0; rep < 8; ++rep)
        suite.push_back({"random" + std::to_string(rep), sftest::random_radial(rng, 3, 12)});

    namespace fs = std::filesystem;
    std::string fa = (fs::temp_directory_path() / "shuntflow_acc_a.json").string();
    std::string fb = (fs::temp_directory_path() / "shuntflow_acc_b.json").string();
    double worst_kkt = 0.0;
    for (const auto& [name, rc] : suite) {
        SocpProgram prog = build_socp(rc.net, CostSpec::loss(rc.net));
        SocpSolution s1 = solve_socp(rc.net, prog);
        SocpSolution s2 = solve_socp(rc.net, prog);
        save_solution(rc.net, s1, fa);
        save_solution(rc.net, s2, fb);
        std::string ba = slurp_file(fa), bb = slurp_file(fb);
        fs::remove(fa);
        fs::remove(fb);
        if (ba.empty() || ba != bb) return {false, "solves differ on " + name};
        worst_kkt = std::max({worst_kkt, s1.kkt.primal_residual, s1.kkt.dual_residual,
                              std::min(s1.kkt.gap, s1.kkt.relative_gap)});
    }
    bool ok = worst_kkt <= 1e-8;
    return {ok, std::to_string(suite.size()) + " cases solved twice, worst KKT residual " +
                    num(worst_kkt)};
}

}  // namespace

int main() {
    criterion("model round trips", roundtrip_sweep);
    criterion("gap conservation", gap_conservation);
    criterion("relaxation exactness", exactness_sweep);
    criterion("tightening step", tightening_sweep);
    criterion("zero-shunt reduction", zero_shunt_reduction);
    criterion("relaxation soundness", relaxation_soundness);
    criterion("approximation band", approximation_band);
    criterion("determinism and kkt", determinism_and_kkt);
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
