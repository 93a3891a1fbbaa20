#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "shuntflow/bfm.hpp"
#include "shuntflow/bim.hpp"
#include "shuntflow/network.hpp"

namespace shuntflow {

struct MembershipReport {
    bool in_set = false;
    double max_residual = 0.0;
};

/// Membership in the injection-equation solution set: V reproduces s at
/// every bus and the slack voltage is 1 + 0j.
inline MembershipReport in_v_set(const Network& net, const std::vector<Complex>& V,
                                 const std::vector<Complex>& s, double tol = 1e-8) {
    MembershipReport rep;
    for (Complex r : bim_residual(net, V, s))
        rep.max_residual = std::max(rep.max_residual, std::abs(r));
    rep.max_residual =
        std::max(rep.max_residual, std::abs(V[net.slack_index()] - Complex(1.0, 0.0)));
    rep.in_set = rep.max_residual <= tol;
    return rep;
}

/// Membership in the complex branch-flow set: per-bus balance over sending
/// ends, S = V I*, Ohm's law with the tail shunt, slack voltage pinned.
inline MembershipReport in_xtilde(const Network& net, const PhasorSolution& sol,
                                  double tol = 1e-8) {
    MembershipReport rep;
    for (int j = 0; j < net.num_buses(); ++j) {
        Complex acc = sol.s[j];
        for (int e : net.ends_at(j)) acc -= sol.S[e];
        rep.max_residual = std::max(rep.max_residual, std::abs(acc));
    }
    for (int e = 0; e < net.num_ends(); ++e) {
        int j = net.end_tail(e), k = net.end_head(e);
        Complex ohm = net.line(net.end_line(e)).y_series * (sol.V[j] - sol.V[k]) +
                      net.end_shunt(e) * sol.V[j];
        rep.max_residual = std::max(rep.max_residual, std::abs(sol.I[e] - ohm));
        rep.max_residual =
            std::max(rep.max_residual, std::abs(sol.S[e] - sol.V[j] * std::conj(sol.I[e])));
    }
    rep.max_residual =
        std::max(rep.max_residual, std::abs(sol.V[net.slack_index()] - Complex(1.0, 0.0)));
    rep.in_set = rep.max_residual <= tol;
    return rep;
}

/// Membership in the shunt-aware branch-flow set (balance, soc, drop, link,
/// slack voltage). Valid on any topology; on meshed networks this set is
/// strictly larger than the image of the phasor sets.
inline MembershipReport in_xtree(const Network& net, const BranchFlowPoint& x, double tol = 1e-8) {
    MembershipReport rep;
    rep.max_residual = bfm_residual(net, x).max_abs();
    rep.in_set = rep.max_residual <= tol;
    return rep;
}

/// Membership in the angle-consistent branch-flow set: balance, soc and drop
/// residuals within tol and the recovered angle vector is a potential
/// difference (antisymmetric per line, zero sum around every cycle).
inline MembershipReport in_xmesh(const Network& net, const BranchFlowPoint& x, double tol = 1e-8) {
    MembershipReport rep;
    BfmResiduals r = bfm_residual(net, x);
    rep.max_residual = std::abs(r.slack_voltage);
    for (Complex c : r.balance) rep.max_residual = std::max(rep.max_residual, std::abs(c));
    for (double d : r.soc) rep.max_residual = std::max(rep.max_residual, std::abs(d));
    for (double d : r.drop_fwd) rep.max_residual = std::max(rep.max_residual, std::abs(d));
    for (double d : r.drop_rev) rep.max_residual = std::max(rep.max_residual, std::abs(d));
    if (rep.max_residual > tol) return rep;
    try {
        CycleCheck cc = cycle_condition(net, beta(net, x), tol);
        rep.in_set = cc.ok;
        if (!cc.ok) rep.max_residual = std::max(rep.max_residual, std::abs(cc.mismatch));
    } catch (const Error&) {
        rep.in_set = false;  // degenerate angle or broken antisymmetry
    }
    return rep;
}

/// Phasor -> branch-flow projection: v = |V|^2, ell = |I|^2, injections and
/// flows carried over. Throws InputNotInXtilde when the phasor point does
/// not satisfy its own defining equations within tol.
inline BranchFlowPoint phi1(const Network& net, const PhasorSolution& sol, double tol = 1e-8) {
    MembershipReport rep = in_xtilde(net, sol, tol);
    if (!rep.in_set)
        fail(Errc::input_not_in_xtilde,
             "phasor point violates its defining equations (max residual " +
                 std::to_string(rep.max_residual) + ")");
    BranchFlowPoint x = BranchFlowPoint::zeros(net.num_buses(), net.num_ends());
    for (int j = 0; j < net.num_buses(); ++j) {
        x.p[j] = sol.s[j].real();
        x.q[j] = sol.s[j].imag();
        x.v[j] = std::norm(sol.V[j]);
    }
    for (int e = 0; e < net.num_ends(); ++e) {
        x.ell[e] = std::norm(sol.I[e]);
        x.P[e] = sol.S[e].real();
        x.Q[e] = sol.S[e].imag();
    }
    return x;
}

/// Branch-flow -> phasor lift. Angles come from propagating the per-end
/// angle vector over the spanning tree (slack angle zero); chords must close
/// (CycleMismatch otherwise). The magnitudes must be consistent:
/// |alpha* v_j - z* S_jk|^2 = v_j v_k within tol, and the currents rebuilt
/// from the recovered voltages must reproduce x's flows within tol
/// (MagnitudeMismatch otherwise). Injections and flows are carried from x.
inline PhasorSolution phi2(const Network& net, const BranchFlowPoint& x, double tol = 1e-8) {
    BetaVector b = beta(net, x);  // throws DegenerateAngle
    CycleCheck cc = cycle_condition(net, b, tol);
    if (!cc.ok)
        fail(Errc::cycle_mismatch,
             "angles do not close around the cycle through line " +
                 std::to_string(cc.failed_chord) + " (mismatch " + std::to_string(cc.mismatch) +
                 " rad)");

    for (int e = 0; e < net.num_ends(); ++e) {
        double vj = x.v[net.end_tail(e)], vk = x.v[net.end_head(e)];
        if (!(vj > 0.0))
            fail(Errc::magnitude_mismatch, "nonpositive squared voltage at bus " +
                                               std::to_string(net.id_of(net.end_tail(e))));
        double lhs = std::norm(end_drop_phasor(net, x, e));
        if (std::abs(lhs - vj * vk) > tol * std::max(1.0, vj * vk))
            fail(Errc::magnitude_mismatch,
                 "line " + std::to_string(net.end_line(e)) +
                     ": |alpha* v - z* S|^2 deviates from v_j v_k by " +
                     std::to_string(lhs - vj * vk));
    }

    PhasorSolution sol;
    const int n = net.num_buses();
    sol.V.resize(n);
    for (int j = 0; j < n; ++j) sol.V[j] = std::polar(std::sqrt(x.v[j]), cc.theta[j]);
    sol.s.resize(n);
    for (int j = 0; j < n; ++j) sol.s[j] = x.s(j);
    sol.I.resize(net.num_ends());
    sol.S.resize(net.num_ends());
    for (int e = 0; e < net.num_ends(); ++e) {
        int j = net.end_tail(e), k = net.end_head(e);
        sol.I[e] = net.line(net.end_line(e)).y_series * (sol.V[j] - sol.V[k]) +
                   net.end_shunt(e) * sol.V[j];
        Complex S_check = sol.V[j] * std::conj(sol.I[e]);
        if (std::abs(S_check - x.S(e)) > tol * std::max(1.0, std::abs(x.S(e))))
            fail(Errc::magnitude_mismatch,
                 "line " + std::to_string(net.end_line(e)) +
                     ": rebuilt flow deviates from the input by " +
                     std::to_string(std::abs(S_check - x.S(e))));
        sol.S[e] = x.S(e);
    }
    return sol;
}

struct RoundtripReport {
    double discrepancy = 0.0;  // infinity norm over all components
    bool pass = false;
};

/// phi2(phi1(sol)) against sol, component-wise. The input must carry a zero
/// slack angle (every member of the phasor sets does).
inline RoundtripReport roundtrip_phasor(const Network& net, const PhasorSolution& sol,
                                        double tol = 1e-8) {
    BranchFlowPoint x = phi1(net, sol, tol);
    PhasorSolution back = phi2(net, x, tol);
    RoundtripReport rep;
    for (int j = 0; j < net.num_buses(); ++j) {
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.V[j] - sol.V[j]));
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.s[j] - sol.s[j]));
    }
    for (int e = 0; e < net.num_ends(); ++e) {
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.I[e] - sol.I[e]));
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.S[e] - sol.S[e]));
    }
    rep.pass = rep.discrepancy <= tol;
    return rep;
}

/// phi1(phi2(x)) against x, component-wise.
inline RoundtripReport roundtrip_point(const Network& net, const BranchFlowPoint& x,
                                       double tol = 1e-8) {
    PhasorSolution sol = phi2(net, x, tol);
    BranchFlowPoint back = phi1(net, sol, tol);
    RoundtripReport rep;
    for (int j = 0; j < net.num_buses(); ++j) {
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.p[j] - x.p[j]));
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.q[j] - x.q[j]));
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.v[j] - x.v[j]));
    }
    for (int e = 0; e < net.num_ends(); ++e) {
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.ell[e] - x.ell[e]));
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.P[e] - x.P[e]));
        rep.discrepancy = std::max(rep.discrepancy, std::abs(back.Q[e] - x.Q[e]));
    }
    rep.pass = rep.discrepancy <= tol;
    return rep;
}

}  // namespace shuntflow
