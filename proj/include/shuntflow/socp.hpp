#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "shuntflow/bfm.hpp"
#include "shuntflow/conic.hpp"
#include "shuntflow/detail/format.hpp"
#include "shuntflow/equivalence.hpp"
#include "shuntflow/network.hpp"

namespace shuntflow {

/// Linear objective over the branch-flow variables. Admissible costs are
/// strictly positive on every squared-current entry and nonnegative on the
/// injection entries; the objective must not depend on the flows S.
struct CostSpec {
    std::vector<double> c_ell;  // per directed end, must be > 0
    std::vector<double> c_p;    // per bus, must be >= 0
    std::vector<double> c_q;    // per bus, must be >= 0
    double constant = 0.0;

    /// Series resistive losses: weight each squared current by the line
    /// resistance. Requires r > 0 on every line to be admissible.
    static CostSpec loss(const Network& net) {
        CostSpec c;
        c.c_ell.resize(net.num_ends());
        for (int e = 0; e < net.num_ends(); ++e)
            c.c_ell[e] = net.line(net.end_line(e)).z_series().real();
        c.c_p.assign(net.num_buses(), 0.0);
        c.c_q.assign(net.num_buses(), 0.0);
        return c;
    }

    /// Total active injection plus the resistive-loss weight. The loss term
    /// keeps the cost strictly increasing in the squared currents, which the
    /// exactness argument relies on.
    static CostSpec generation(const Network& net) {
        CostSpec c = loss(net);
        c.c_p.assign(net.num_buses(), 1.0);
        return c;
    }

    double value(const BranchFlowPoint& x) const {
        double f = constant;
        for (std::size_t j = 0; j < c_p.size(); ++j) f += c_p[j] * x.p[j] + c_q[j] * x.q[j];
        for (std::size_t e = 0; e < c_ell.size(); ++e) f += c_ell[e] * x.ell[e];
        return f;
    }
};

/// Column layout of the relaxation: injections, squared voltages, then the
/// per-directed-end blocks (forward block first, reverse block second).
struct VarLayout {
    int N = 0, L = 0;
    int p(int j) const { return j; }
    int q(int j) const { return N + j; }
    int v(int j) const { return 2 * N + j; }
    int ell(int e) const { return 3 * N + e; }
    int P(int e) const { return 3 * N + 2 * L + e; }
    int Q(int e) const { return 3 * N + 4 * L + e; }
    int size() const { return 3 * N + 6 * L; }
};

struct SocpBuildOptions {
    /// Relax only the forward direction of each line with an explicit
    /// nonnegativity row on the reverse squared current. The linear coupling
    /// equations transfer the conic bound to the reverse direction, so the
    /// feasible set is unchanged; the default keeps one cone per end.
    bool single_cone = false;
};

/// The assembled relaxation, kept in mathematical form (equalities, variable
/// bounds, rotated-cone triples) so it can be exported or handed to any
/// conic back end.
struct SocpProgram {
    VarLayout layout;
    std::vector<std::string> var_names;
    conic::VectorXd c;
    double c0 = 0.0;
    conic::MatrixXd A;
    conic::VectorXd b;
    conic::VectorXd lb, ub;  // +-inf where absent
    struct ConeRef {
        int v = 0, ell = 0, P = 0, Q = 0;  // column indices: P^2 + Q^2 <= v * ell
    };
    std::vector<ConeRef> cones;
    CostSpec cost;
    bool single_cone = false;
};

/// Assemble the second-order-cone relaxation of optimal power flow on a
/// radial network: per-bus balance, both drop equations, the complex link
/// equation, the slack voltage pin, bus and current bounds, and one rotated
/// cone |S|^2 <= v * ell per directed end.
inline SocpProgram build_socp(const Network& net, const CostSpec& cost,
                              const SocpBuildOptions& opt = {}) {
    if (!net.is_radial())
        fail(Errc::not_radial, "the relaxation is built for radial networks only");
    const int N = net.num_buses(), L = net.num_lines();
    if (static_cast<int>(cost.c_ell.size()) != 2 * L ||
        static_cast<int>(cost.c_p.size()) != N || static_cast<int>(cost.c_q.size()) != N)
        fail(Errc::cost_violates_a2, "cost vectors do not match the network size");
    for (int e = 0; e < 2 * L; ++e)
        if (!(cost.c_ell[e] > 0.0))
            fail(Errc::cost_violates_a2,
                 "cost must be strictly increasing in the squared current of every end "
                 "(offending end " +
                     std::to_string(e) + ")");
    for (int j = 0; j < N; ++j)
        if (cost.c_p[j] < 0.0 || cost.c_q[j] < 0.0)
            fail(Errc::cost_violates_a2,
                 "cost must be nondecreasing in the injection at bus " +
                     std::to_string(net.id_of(j)));

    SocpProgram prog;
    prog.layout = {N, L};
    prog.cost = cost;
    prog.single_cone = opt.single_cone;
    const VarLayout& V = prog.layout;
    const int n = V.size();

    prog.var_names.resize(n);
    for (int j = 0; j < N; ++j) {
        std::string id = std::to_string(net.id_of(j));
        prog.var_names[V.p(j)] = "p_" + id;
        prog.var_names[V.q(j)] = "q_" + id;
        prog.var_names[V.v(j)] = "v_" + id;
    }
    for (int e = 0; e < 2 * L; ++e) {
        const LineParams& ln = net.line(net.end_line(e));
        std::string tag = std::to_string(net.end_is_forward(e) ? ln.from : ln.to) + "_" +
                          std::to_string(net.end_is_forward(e) ? ln.to : ln.from);
        prog.var_names[V.ell(e)] = "ell_" + tag;
        prog.var_names[V.P(e)] = "P_" + tag;
        prog.var_names[V.Q(e)] = "Q_" + tag;
    }

    prog.c = conic::VectorXd::Zero(n);
    for (int j = 0; j < N; ++j) {
        prog.c(V.p(j)) = cost.c_p[j];
        prog.c(V.q(j)) = cost.c_q[j];
    }
    for (int e = 0; e < 2 * L; ++e) prog.c(V.ell(e)) = cost.c_ell[e];
    prog.c0 = cost.constant;

    // Row order: P balance (N), Q balance (N), slack voltage, then per line
    // the forward drop, reverse drop, and the two components of the link.
    const int rows = 2 * N + 1 + 4 * L;
    prog.A = conic::MatrixXd::Zero(rows, n);
    prog.b = conic::VectorXd::Zero(rows);
    for (int j = 0; j < N; ++j) {
        prog.A(j, V.p(j)) = 1.0;
        prog.A(N + j, V.q(j)) = 1.0;
        for (int e : net.ends_at(j)) {
            prog.A(j, V.P(e)) = -1.0;
            prog.A(N + j, V.Q(e)) = -1.0;
        }
    }
    prog.A(2 * N, V.v(net.slack_index())) = 1.0;
    prog.b(2 * N) = 1.0;
    for (int l = 0; l < L; ++l) {
        const LineParams& ln = net.line(l);
        Complex z = ln.z_series();
        double r = z.real(), xx = z.imag(), zsq = std::norm(z);
        for (bool fwd : {true, false}) {
            int e = net.end_of(l, fwd);
            int row = 2 * N + 1 + 4 * l + (fwd ? 0 : 1);
            Complex a = net.end_alpha(e);
            Complex w = a * std::conj(z);
            prog.A(row, V.v(net.end_tail(e))) += std::norm(a);
            prog.A(row, V.v(net.end_head(e))) += -1.0;
            prog.A(row, V.P(e)) = -2.0 * w.real();
            prog.A(row, V.Q(e)) = 2.0 * w.imag();
            prog.A(row, V.ell(e)) = zsq;
        }
        int ef = net.end_of(l, true), er = net.end_of(l, false);
        int jf = net.end_tail(ef), jt = net.end_tail(er);
        Complex af = net.end_alpha(ef), ar = net.end_alpha(er);
        int row_re = 2 * N + 1 + 4 * l + 2, row_im = row_re + 1;
        // alpha* v - z* S matched between the ends; z* S = (rP + xQ) + i(rQ - xP).
        prog.A(row_re, V.v(jf)) += af.real();
        prog.A(row_re, V.P(ef)) = -r;
        prog.A(row_re, V.Q(ef)) = -xx;
        prog.A(row_re, V.v(jt)) += -ar.real();
        prog.A(row_re, V.P(er)) = r;
        prog.A(row_re, V.Q(er)) = xx;
        prog.A(row_im, V.v(jf)) += -af.imag();
        prog.A(row_im, V.P(ef)) = xx;
        prog.A(row_im, V.Q(ef)) = -r;
        prog.A(row_im, V.v(jt)) += -ar.imag();
        prog.A(row_im, V.P(er)) = xx;
        prog.A(row_im, V.Q(er)) = -r;
    }

    prog.lb = conic::VectorXd::Constant(n, -kInf);
    prog.ub = conic::VectorXd::Constant(n, kInf);
    for (int j = 0; j < N; ++j) {
        const Bus& bus = net.bus(j);
        prog.lb(V.p(j)) = bus.p_min;
        prog.ub(V.p(j)) = bus.p_max;
        prog.lb(V.q(j)) = bus.q_min;
        prog.ub(V.q(j)) = bus.q_max;
        prog.lb(V.v(j)) = bus.v_min;
        prog.ub(V.v(j)) = bus.v_max;
    }
    for (int e = 0; e < 2 * L; ++e) {
        double cap = net.line(net.end_line(e)).i_sq_max;
        if (std::isfinite(cap)) prog.ub(V.ell(e)) = cap;
        if (opt.single_cone && !net.end_is_forward(e)) prog.lb(V.ell(e)) = 0.0;
    }

    for (int e = 0; e < 2 * L; ++e) {
        if (opt.single_cone && !net.end_is_forward(e)) continue;
        prog.cones.push_back({V.v(net.end_tail(e)), V.ell(e), V.P(e), V.Q(e)});
    }
    return prog;
}

/// Lower the stored program to the solver's standard form. Finite bounds
/// become orthant rows; each rotated cone (v, ell, P, Q) becomes the
/// four-dimensional second-order block (v + ell, 2P, 2Q, v - ell).
inline conic::Program lower_program(const SocpProgram& prog) {
    conic::Program P;
    P.c = prog.c;
    P.A = prog.A;
    P.b = prog.b;
    const int n = static_cast<int>(prog.c.size());
    std::vector<std::pair<conic::VectorXd, double>> rows;
    for (int i = 0; i < n; ++i) {
        if (std::isfinite(prog.lb(i))) {
            conic::VectorXd g = conic::VectorXd::Zero(n);
            g(i) = -1.0;
            rows.emplace_back(g, -prog.lb(i));
        }
        if (std::isfinite(prog.ub(i))) {
            conic::VectorXd g = conic::VectorXd::Zero(n);
            g(i) = 1.0;
            rows.emplace_back(g, prog.ub(i));
        }
    }
    P.nonneg = static_cast<int>(rows.size());
    const int m = P.nonneg + 4 * static_cast<int>(prog.cones.size());
    P.G = conic::MatrixXd::Zero(m, n);
    P.h = conic::VectorXd::Zero(m);
    for (int i = 0; i < P.nonneg; ++i) {
        P.G.row(i) = rows[i].first.transpose();
        P.h(i) = rows[i].second;
    }
    int at = P.nonneg;
    for (const auto& cone : prog.cones) {
        P.G(at, cone.v) = -1.0;
        P.G(at, cone.ell) = -1.0;
        P.G(at + 1, cone.P) = -2.0;
        P.G(at + 2, cone.Q) = -2.0;
        P.G(at + 3, cone.v) = -1.0;
        P.G(at + 3, cone.ell) = 1.0;
        P.soc_dims.push_back(4);
        at += 4;
    }
    return P;
}

using ConicSolver = std::function<conic::Solution(const conic::Program&, const conic::Options&)>;

struct KktInfo {
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
};

struct SocpSolution {
    BranchFlowPoint x;
    double objective = 0.0;
    std::vector<double> cone_gap;  // per end: v_tail * ell - |S|^2
    int iterations = 0;
    KktInfo kkt;
};

/// Solve the relaxation. A different conic back end can be substituted
/// through `solver`; the default is the built-in interior-point method.
inline SocpSolution solve_socp(const Network& net, const SocpProgram& prog,
                               const conic::Options& opt = {}, const ConicSolver& solver = {}) {
    for (int i = 0; i < prog.c.size(); ++i)
        if (prog.lb(i) > prog.ub(i))
            fail(Errc::infeasible, "empty range on variable " + prog.var_names[i]);

    conic::Program P = lower_program(prog);
    conic::Solution raw = solver ? solver(P, opt) : conic::solve(P, opt);
    switch (raw.status) {
        case conic::SolveStatus::optimal:
            break;
        case conic::SolveStatus::primal_infeasible:
            fail(Errc::infeasible, "the relaxation is infeasible (certificate found)");
        case conic::SolveStatus::dual_infeasible:
            fail(Errc::numerical_failure, "the relaxation is unbounded below (certificate found)");
        case conic::SolveStatus::iteration_limit:
            fail(Errc::iteration_limit, "interior-point method hit the iteration limit at residuals " +
                                            detail::fmt_double(std::max(raw.primal_residual,
                                                                        raw.dual_residual)));
        case conic::SolveStatus::numerical_failure:
            fail(Errc::numerical_failure, "interior-point method lost numerical headroom");
    }

    SocpSolution sol;
    const VarLayout& V = prog.layout;
    sol.x = BranchFlowPoint::zeros(V.N, 2 * V.L);
    for (int j = 0; j < V.N; ++j) {
        sol.x.p[j] = raw.x(V.p(j));
        sol.x.q[j] = raw.x(V.q(j));
        sol.x.v[j] = raw.x(V.v(j));
    }
    for (int e = 0; e < 2 * V.L; ++e) {
        sol.x.ell[e] = raw.x(V.ell(e));
        sol.x.P[e] = raw.x(V.P(e));
        sol.x.Q[e] = raw.x(V.Q(e));
    }
    sol.objective = raw.primal_objective + prog.c0;
    sol.cone_gap.resize(2 * V.L);
    for (int e = 0; e < 2 * V.L; ++e)
        sol.cone_gap[e] =
            sol.x.v[net.end_tail(e)] * sol.x.ell[e] - std::norm(sol.x.S(e));
    sol.iterations = raw.iterations;
    sol.kkt = {raw.primal_residual, raw.dual_residual, raw.gap, raw.relative_gap};
    return sol;
}

struct C1Report {
    bool holds = true;
    int offending_bus = -1;  // external id of the first bus with a finite floor
};

/// The no-injection-floor condition: every bus allows arbitrarily negative
/// active and reactive injection.
inline C1Report check_c1(const Network& net) {
    for (const Bus& b : net.buses())
        if (b.p_min != -kInf || b.q_min != -kInf) return {false, b.id};
    return {};
}

struct ExactnessReport {
    double max_gap = 0.0;          // max |v*ell - |S|^2| over ends
    std::vector<double> gaps;      // per end, v*ell - |S|^2
    double lemma_gap_spread = 0.0; // max over lines of |forward gap - reverse gap|
    bool c1_holds = false;
    bool c2_holds = false;
    bool exact = false;
    std::optional<PhasorSolution> recovered;
    double recovered_residual = 0.0;  // max injection residual of the lift
};

/// Decide whether a solver point is exact (every cone tight relative to the
/// objective scale) and, when it is, lift it back to phasors. The lift runs
/// with a tolerance proportional to the measured gap.
inline ExactnessReport certify_exactness(const Network& net, const SocpSolution& sol,
                                         double tol = 1e-6) {
    ExactnessReport rep;
    rep.gaps = sol.cone_gap;
    for (double g : rep.gaps) rep.max_gap = std::max(rep.max_gap, std::abs(g));
    for (int l = 0; l < net.num_lines(); ++l)
        rep.lemma_gap_spread =
            std::max(rep.lemma_gap_spread,
                     std::abs(rep.gaps[net.end_of(l, true)] - rep.gaps[net.end_of(l, false)]));
    rep.c1_holds = check_c1(net).holds;
    rep.c2_holds = check_c2(net).all_ok;
    rep.exact = rep.max_gap <= tol * std::max(1.0, std::abs(sol.objective));
    if (rep.exact) {
        double lift_tol = std::max(1e-7, 50.0 * rep.max_gap);
        PhasorSolution ph = phi2(net, sol.x, lift_tol);
        for (Complex r : bim_residual(net, ph.V, ph.s))
            rep.recovered_residual = std::max(rep.recovered_residual, std::abs(r));
        rep.recovered = std::move(ph);
    }
    return rep;
}

/// One strict-improvement move on a line whose cones are slack: shrink the
/// squared currents by Re(alpha) * eps, shift both sending powers and both
/// endpoint injections by z * eps / 2. Every linear equation of the
/// relaxation is preserved exactly; each cone slack shrinks by
/// eps * (Re(alpha v - S z*) + |z|^2 eps / 4) at its own end.
inline BranchFlowPoint tighten_step(const Network& net, const BranchFlowPoint& x_hat, int line,
                                    double eps) {
    if (line < 0 || line >= net.num_lines())
        fail(Errc::precondition_violated, "line index out of range");
    if (!(eps >= 0.0)) fail(Errc::precondition_violated, "eps must be nonnegative");
    const LineParams& ln = net.line(line);
    Complex z = ln.z_series();
    if (z.real() < 0.0 || z.imag() < 0.0)
        fail(Errc::negative_impedance,
             "line " + std::to_string(line) + ": the update direction needs r >= 0 and x >= 0");
    int ef = net.end_of(line, true), er = net.end_of(line, false);
    for (int e : {ef, er}) {
        if (!(net.end_alpha(e).real() > 0.0))
            fail(Errc::c2_violated_on_line,
                 "line " + std::to_string(line) + ": Re(alpha) <= 0 at one end");
        if (!(x_hat.ell[e] > 0.0))
            fail(Errc::zero_current, "line " + std::to_string(line) +
                                         ": squared current must be strictly positive");
        double gap = x_hat.v[net.end_tail(e)] * x_hat.ell[e] - std::norm(x_hat.S(e));
        if (!(gap > 0.0))
            fail(Errc::gap_not_positive,
                 "line " + std::to_string(line) + ": cone already tight (gap " +
                     detail::fmt_double(gap) + ")");
    }

    BranchFlowPoint x = x_hat;
    int j = net.end_tail(ef), k = net.end_tail(er);
    x.ell[ef] -= net.end_alpha(ef).real() * eps;
    x.ell[er] -= net.end_alpha(er).real() * eps;
    x.P[ef] -= z.real() * eps / 2.0;
    x.Q[ef] -= z.imag() * eps / 2.0;
    x.P[er] -= z.real() * eps / 2.0;
    x.Q[er] -= z.imag() * eps / 2.0;
    x.p[j] -= z.real() * eps / 2.0;
    x.q[j] -= z.imag() * eps / 2.0;
    x.p[k] -= z.real() * eps / 2.0;
    x.q[k] -= z.imag() * eps / 2.0;
    return x;
}

/// Largest eps for which tighten_step keeps the point inside the relaxation
/// (cones, current signs, and any finite injection floors at the two
/// endpoint buses), found by bisection. The linear equations need no
/// checking; the update preserves them identically.
inline double tighten_epsilon(const Network& net, const BranchFlowPoint& x_hat, int line) {
    (void)tighten_step(net, x_hat, line, 0.0);  // validate preconditions
    int ef = net.end_of(line, true), er = net.end_of(line, false);
    double cap = std::min(x_hat.ell[ef] / net.end_alpha(ef).real(),
                          x_hat.ell[er] / net.end_alpha(er).real());
    auto feasible = [&](double eps) {
        BranchFlowPoint x = tighten_step(net, x_hat, line, eps);
        for (int e : {ef, er}) {
            if (x.ell[e] < 0.0) return false;
            if (x.v[net.end_tail(e)] * x.ell[e] - std::norm(x.S(e)) < 0.0) return false;
            const Bus& bus = net.bus(net.end_tail(e));
            if (x.p[net.end_tail(e)] < bus.p_min || x.q[net.end_tail(e)] < bus.q_min)
                return false;
        }
        return true;
    };
    if (feasible(cap)) return cap;
    double lo = 0.0, hi = cap;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// Text form of the assembled program: variables, objective, equality
/// triplets, finite bounds, and the cone index quadruples. Stable ordering
/// and round-trip float formatting; suitable for feeding an external solver.
inline void export_program(const SocpProgram& prog, std::ostream& os) {
    using detail::fmt_double;
    const int n = static_cast<int>(prog.c.size());
    os << "socp 1\n";
    os << "vars " << n << "\n";
    for (int i = 0; i < n; ++i) os << "var " << i << " " << prog.var_names[i] << "\n";
    os << "minimize\n";
    for (int i = 0; i < n; ++i)
        if (prog.c(i) != 0.0) os << "obj " << i << " " << fmt_double(prog.c(i)) << "\n";
    if (prog.c0 != 0.0) os << "obj_constant " << fmt_double(prog.c0) << "\n";
    os << "equalities " << prog.A.rows() << "\n";
    for (int r = 0; r < prog.A.rows(); ++r)
        for (int i = 0; i < n; ++i)
            if (prog.A(r, i) != 0.0)
                os << "A " << r << " " << i << " " << fmt_double(prog.A(r, i)) << "\n";
    for (int r = 0; r < prog.b.size(); ++r)
        if (prog.b(r) != 0.0) os << "b " << r << " " << fmt_double(prog.b(r)) << "\n";
    os << "bounds\n";
    for (int i = 0; i < n; ++i) {
        if (std::isfinite(prog.lb(i))) os << "lb " << i << " " << fmt_double(prog.lb(i)) << "\n";
        if (std::isfinite(prog.ub(i))) os << "ub " << i << " " << fmt_double(prog.ub(i)) << "\n";
    }
    os << "cones " << prog.cones.size() << "\n";
    for (const auto& cone : prog.cones)
        os << "cone " << cone.v << " " << cone.ell << " " << cone.P << " " << cone.Q << "\n";
}

}  // namespace shuntflow
