#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "shuntflow/network.hpp"

namespace shuntflow {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

/// A point of the branch-flow variable space: real injections and squared
/// voltage per bus, squared current and sending-end power per directed end.
/// Dimension 3(N + 2L) over the reals.
struct BranchFlowPoint {
    std::vector<double> p, q;  // per bus
    std::vector<double> v;     // per bus, squared voltage magnitude
    std::vector<double> ell;   // per directed end, squared current magnitude
    std::vector<double> P, Q;  // per directed end, sending-end power

    Complex s(int bus) const { return {p[bus], q[bus]}; }
    Complex S(int e) const { return {P[e], Q[e]}; }

    static BranchFlowPoint zeros(int n_buses, int n_ends) {
        BranchFlowPoint x;
        x.p.assign(n_buses, 0.0);
        x.q.assign(n_buses, 0.0);
        x.v.assign(n_buses, 0.0);
        x.ell.assign(n_ends, 0.0);
        x.P.assign(n_ends, 0.0);
        x.Q.assign(n_ends, 0.0);
        return x;
    }
};

// ---------------------------------------------------------------------------
// Residuals of the shunt-aware branch-flow equations
//
//   balance    s_j = sum of S over ends with tail j
//   soc        v_j * ell_jk = |S_jk|^2               (both directions)
//   drop       |alpha_jk|^2 v_j - v_k = 2 Re(alpha_jk z* S_jk) - |z|^2 ell_jk
//   link       alpha_jk* v_j - z* S_jk = (alpha_kj* v_k - z* S_kj)*
//
// drop_fwd/drop_rev are per line; soc is per directed end.
// ---------------------------------------------------------------------------

struct BfmResiduals {
    std::vector<Complex> balance;  // per bus
    std::vector<double> soc;       // per end: v_tail * ell - |S|^2
    std::vector<double> drop_fwd;  // per line
    std::vector<double> drop_rev;  // per line
    std::vector<Complex> link;     // per line
    double slack_voltage = 0.0;    // v_slack - 1

    double max_abs() const {
        double m = std::abs(slack_voltage);
        for (Complex c : balance) m = std::max(m, std::abs(c));
        for (double d : soc) m = std::max(m, std::abs(d));
        for (double d : drop_fwd) m = std::max(m, std::abs(d));
        for (double d : drop_rev) m = std::max(m, std::abs(d));
        for (Complex c : link) m = std::max(m, std::abs(c));
        return m;
    }
};

/// alpha* v_tail - z* S at a directed end: the complex quantity whose
/// modulus squared equals v_tail * v_head and whose angle is the angle drop.
inline Complex end_drop_phasor(const Network& net, const BranchFlowPoint& x, int e) {
    Complex z = net.line(net.end_line(e)).z_series();
    return std::conj(net.end_alpha(e)) * x.v[net.end_tail(e)] - std::conj(z) * x.S(e);
}

inline BfmResiduals bfm_residual(const Network& net, const BranchFlowPoint& x) {
    BfmResiduals r;
    const int n = net.num_buses(), L = net.num_lines();
    r.balance.resize(n);
    for (int j = 0; j < n; ++j) {
        Complex acc = x.s(j);
        for (int e : net.ends_at(j)) acc -= x.S(e);
        r.balance[j] = acc;
    }
    r.soc.resize(net.num_ends());
    for (int e = 0; e < net.num_ends(); ++e)
        r.soc[e] = x.v[net.end_tail(e)] * x.ell[e] - std::norm(x.S(e));
    r.drop_fwd.resize(L);
    r.drop_rev.resize(L);
    r.link.resize(L);
    for (int l = 0; l < L; ++l) {
        Complex z = net.line(l).z_series();
        double zsq = std::norm(z);
        for (bool fwd : {true, false}) {
            int e = net.end_of(l, fwd);
            Complex a = net.end_alpha(e);
            double vj = x.v[net.end_tail(e)], vk = x.v[net.end_head(e)];
            double res = std::norm(a) * vj - vk - 2.0 * (a * std::conj(z) * x.S(e)).real() +
                         zsq * x.ell[e];
            (fwd ? r.drop_fwd[l] : r.drop_rev[l]) = res;
        }
        r.link[l] = end_drop_phasor(net, x, net.end_of(l, true)) -
                    std::conj(end_drop_phasor(net, x, net.end_of(l, false)));
    }
    r.slack_voltage = x.v[net.slack_index()] - 1.0;
    return r;
}

/// Algebraic expansion check: |alpha* v - z* S|^2 against
/// |alpha|^2 v^2 + |z|^2 |S|^2 - 2 Re(alpha z* S) v. Holds identically; the
/// returned residual is rounding noise and is asserted in tests.
inline double magnitude_identity_residual(Complex alpha, Complex z, double v, Complex S) {
    double lhs = std::norm(std::conj(alpha) * v - std::conj(z) * S);
    double rhs = std::norm(alpha) * v * v + std::norm(z) * std::norm(S) -
                 2.0 * (alpha * std::conj(z) * S).real() * v;
    return lhs - rhs;
}

// ---------------------------------------------------------------------------
// Angle recovery
// ---------------------------------------------------------------------------

/// Angles of alpha* v_tail - z* S per directed end (forward block, then
/// reverse block). Throws DegenerateAngle when the phasor is too small to
/// carry an angle.
struct BetaVector {
    std::vector<double> value;  // 2L entries
};

inline BetaVector beta(const Network& net, const BranchFlowPoint& x, double min_modulus = 1e-12) {
    BetaVector b;
    b.value.resize(net.num_ends());
    for (int e = 0; e < net.num_ends(); ++e) {
        Complex d = end_drop_phasor(net, x, e);
        if (std::abs(d) < min_modulus)
            fail(Errc::degenerate_angle, "angle undefined on line " +
                                             std::to_string(net.end_line(e)) +
                                             ": |alpha* v - z* S| is numerically zero");
        b.value[e] = std::arg(d);
    }
    return b;
}

/// Result of testing whether a beta vector is a potential difference: angles
/// theta with beta_jk = theta_j - theta_k on every line, theta(slack) = 0.
struct CycleCheck {
    bool ok = false;
    std::vector<double> theta;           // per bus, slack pinned to zero
    int failed_chord = -1;               // line index of the first failing chord
    double mismatch = 0.0;               // cycle sum of that chord (wrapped)
    std::vector<int> cycle_lines;        // lines of the failing fundamental cycle
};

/// Check the two structural conditions on beta: antisymmetry between the two
/// directions of each line (throws AntisymmetryViolation when broken) and a
/// zero wrapped sum around every fundamental cycle. Angles are propagated
/// over the BFS spanning tree; on a radial network the cycle part is vacuous.
inline CycleCheck cycle_condition(const Network& net, const BetaVector& b, double tol = 1e-8) {
    const int L = net.num_lines();
    for (int l = 0; l < L; ++l) {
        double sum = wrap_angle(b.value[l] + b.value[L + l]);
        if (std::abs(sum) > tol)
            fail(Errc::antisymmetry_violation,
                 "beta is not antisymmetric on line " + std::to_string(l) + ": forward " +
                     std::to_string(b.value[l]) + ", reverse " + std::to_string(b.value[L + l]));
    }

    CycleCheck out;
    out.theta.assign(net.num_buses(), 0.0);
    for (int j : net.bfs_order()) {
        int l = net.parent_line(j);
        if (l < 0) continue;
        int p = net.parent_bus(j);
        // beta on the parent->child direction equals theta_parent - theta_child.
        double bpc = net.index_of(net.line(l).from) == p ? b.value[l] : b.value[L + l];
        out.theta[j] = wrap_angle(out.theta[p] - bpc);
    }
    for (int chord : net.chords()) {
        int f = net.index_of(net.line(chord).from);
        int t = net.index_of(net.line(chord).to);
        double mism = wrap_angle(b.value[chord] - (out.theta[f] - out.theta[t]));
        if (std::abs(mism) > tol) {
            out.ok = false;
            out.failed_chord = chord;
            out.mismatch = mism;
            for (auto [l, o] : net.fundamental_cycle(chord)) {
                (void)o;
                out.cycle_lines.push_back(l);
            }
            return out;
        }
    }
    out.ok = true;
    return out;
}

// ---------------------------------------------------------------------------
// Conservation of the relaxation gap across a line
// ---------------------------------------------------------------------------

struct Lemma1Gap {
    double gap_fwd = 0.0;  // |S_jk|^2 - v_j ell_jk
    double gap_rev = 0.0;  // |S_kj|^2 - v_k ell_kj
    double difference = 0.0;
};

/// Evaluate the quadratic gap |S|^2 - v*ell at both ends of a line. Requires
/// the drop and link equations to hold on that line within `pre_tol` (the
/// gaps are only comparable on such points); the two gaps then agree up to
/// rounding regardless of whether the soc equations hold.
inline Lemma1Gap lemma1_gap(const Network& net, const BranchFlowPoint& x, int line,
                            double pre_tol = 1e-8) {
    BfmResiduals r = bfm_residual(net, x);
    double pre = std::max({std::abs(r.drop_fwd[line]), std::abs(r.drop_rev[line]),
                           std::abs(r.link[line])});
    if (pre > pre_tol)
        fail(Errc::precondition_violated,
             "line " + std::to_string(line) +
                 ": drop/link equations violated (residual " + std::to_string(pre) + ")");
    Lemma1Gap g;
    int ef = net.end_of(line, true), er = net.end_of(line, false);
    g.gap_fwd = std::norm(x.S(ef)) - x.v[net.end_tail(ef)] * x.ell[ef];
    g.gap_rev = std::norm(x.S(er)) - x.v[net.end_tail(er)] * x.ell[er];
    g.difference = g.gap_fwd - g.gap_rev;
    return g;
}

// ---------------------------------------------------------------------------
// Zero-shunt specialisation
// ---------------------------------------------------------------------------

struct ZeroShuntReport {
    double max_alpha_deviation = 0.0;   // max |alpha - 1| over ends
    double max_family_difference = 0.0; // shunt-aware vs classical residuals
    bool agree = false;                 // difference <= tol
};

/// With all shunts absent the drop equation must collapse to the classical
/// radial form v_j - v_k = 2 Re(z* S_jk) - |z|^2 ell_jk and the link
/// equation to v_j - z* S_jk = conj(v_k - z* S_kj). Evaluates both familes
/// on `x` and reports the largest disagreement. Throws NotZeroShunt when a
/// shunt is present and NotRadial on meshed networks (the classical form
/// being compared against is the radial one).
inline ZeroShuntReport reduce_zero_shunt_check(const Network& net, const BranchFlowPoint& x,
                                               double tol = 1e-12) {
    if (!net.is_radial()) fail(Errc::not_radial, "zero-shunt comparison expects a radial network");
    for (int e = 0; e < net.num_ends(); ++e)
        if (net.end_shunt(e) != Complex(0.0, 0.0))
            fail(Errc::not_zero_shunt,
                 "line " + std::to_string(net.end_line(e)) + " carries a shunt");

    ZeroShuntReport rep;
    BfmResiduals shunt_aware = bfm_residual(net, x);
    for (int l = 0; l < net.num_lines(); ++l) {
        Complex z = net.line(l).z_series();
        double zsq = std::norm(z);
        for (bool fwd : {true, false}) {
            int e = net.end_of(l, fwd);
            rep.max_alpha_deviation =
                std::max(rep.max_alpha_deviation, std::abs(net.end_alpha(e) - 1.0));
            double vj = x.v[net.end_tail(e)], vk = x.v[net.end_head(e)];
            double classical =
                vj - vk - 2.0 * (std::conj(z) * x.S(e)).real() + zsq * x.ell[e];
            double aware = fwd ? shunt_aware.drop_fwd[l] : shunt_aware.drop_rev[l];
            rep.max_family_difference =
                std::max(rep.max_family_difference, std::abs(aware - classical));
        }
        Complex classical_link =
            (x.v[net.end_tail(net.end_of(l, true))] - std::conj(z) * x.S(net.end_of(l, true))) -
            std::conj(x.v[net.end_tail(net.end_of(l, false))] -
                      std::conj(z) * x.S(net.end_of(l, false)));
        rep.max_family_difference =
            std::max(rep.max_family_difference, std::abs(shunt_aware.link[l] - classical_link));
    }
    rep.agree = rep.max_family_difference <= tol;
    return rep;
}

}  // namespace shuntflow
