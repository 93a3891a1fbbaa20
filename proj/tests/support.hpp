#pragma once

// Shared helpers for the test suite: deterministic random generation,
// canonical small cases with reference values cross-checked by two
// independent solvers at high precision, and an injection-iteration power
// flow used as an oracle against the Newton solver.

#include <cstdint>
#include <random>
#include <vector>

#include "shuntflow/shuntflow.hpp"

namespace sftest {

using shuntflow::BranchFlowPoint;
using shuntflow::Bus;
using shuntflow::Complex;
using shuntflow::kInf;
using shuntflow::LineParams;
using shuntflow::Network;

/// Deterministic uniform doubles: raw mt19937_64 draws mapped through a
/// fixed 53-bit ladder, identical on every platform. The standard
/// distributions are implementation-defined, so they stay out of the tests.
struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) {
        double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
    int uniform_int(int lo, int hi) {  // inclusive; slight modulo bias is fine here
        return lo + static_cast<int>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    Complex complex_in_box(double scale) { return {uniform(-scale, scale), uniform(-scale, scale)}; }
};

// ---------------------------------------------------------------------------
// Canonical two-bus case: z = 0.05 + 0.10j, b = 0.02 at both ends, load
// 0.2 + 0.1j at bus 2. Reference values computed with two independent
// methods (polar Newton and an impedance-matrix fixed point) refined to 40
// significant digits; they agree to every printed digit.
// ---------------------------------------------------------------------------

namespace golden2 {
inline constexpr double V2_re = 0.98132283692116085;
inline constexpr double V2_im = -0.015963249335592346;
inline constexpr double v2 = 0.96324933559234554;
inline constexpr double I12_re = 0.20241464700009537;
inline constexpr double I12_im = -0.065564307288343824;
inline constexpr double I21_re = -0.20209538201338352;
inline constexpr double I21_im = 0.10519076402676704;
inline constexpr double S12_re = 0.20241464700009537;  // also the slack injection
inline constexpr double S12_im = 0.065564307288343824;
inline constexpr double ell12 = 0.045270367710373591;
inline constexpr double ell21 = 0.051907640267670406;
inline constexpr double alpha_re = 0.998;  // exact: 1 + (0.05 + 0.10j)(0.02j)
inline constexpr double alpha_im = 0.001;
inline constexpr double beta12 = 0.016265637470295299;  // angle drop 1 -> 2
}  // namespace golden2

inline Network two_bus_network(double load_p = 0.2, double load_q = 0.1) {
    std::vector<Bus> buses(2);
    buses[0].id = 1;
    buses[1].id = 2;
    for (Bus& b : buses) {
        b.v_min = 0.64;
        b.v_max = 1.44;
        b.p_max = kInf;
        b.q_max = kInf;
    }
    buses[1].p_max = -load_p;
    buses[1].q_max = -load_q;
    LineParams ln;
    ln.from = 1;
    ln.to = 2;
    ln.y_series = 1.0 / Complex(0.05, 0.10);
    ln.y_shunt_from = Complex(0.0, 0.02);
    ln.y_shunt_to = Complex(0.0, 0.02);
    return Network(buses, {ln}, 1);
}

inline std::vector<Complex> two_bus_load(double load_p = 0.2, double load_q = 0.1) {
    return {Complex(0.0, 0.0), Complex(-load_p, -load_q)};
}

// ---------------------------------------------------------------------------
// Canonical meshed triangle (slack 1): asymmetric shunts on two lines, a
// one-sided shunt on the third. Same dual-method reference pedigree.
// ---------------------------------------------------------------------------

namespace golden3 {
inline constexpr double V2_re = 0.99243786051016591;
inline constexpr double V2_im = -0.010316425326122475;
inline constexpr double V3_re = 0.99223100951279908;
inline constexpr double V3_im = -0.009508546476895122;
inline constexpr double v2 = 0.98503933560550505;
inline constexpr double v3 = 0.98461278869489155;
inline constexpr double theta2 = -0.010394659629879139;
inline constexpr double theta3 = -0.0095827033554092365;
inline constexpr double s1_re = 0.25127833524133703;
inline constexpr double s1_im = 0.034594231058939329;
}  // namespace golden3

inline Network triangle_network() {
    std::vector<Bus> buses(3);
    for (int j = 0; j < 3; ++j) {
        buses[j].id = j + 1;
        buses[j].v_min = 0.64;
        buses[j].v_max = 1.44;
    }
    auto mk = [](int f, int t, double r, double x, double bf, double bt) {
        LineParams ln;
        ln.from = f;
        ln.to = t;
        ln.y_series = 1.0 / Complex(r, x);
        ln.y_shunt_from = Complex(0.0, bf);
        ln.y_shunt_to = Complex(0.0, bt);
        return ln;
    };
    std::vector<LineParams> lines = {
        mk(1, 2, 0.03, 0.08, 0.010, 0.015),
        mk(2, 3, 0.04, 0.09, 0.012, 0.012),
        mk(1, 3, 0.05, 0.10, 0.020, 0.000),
    };
    return Network(buses, lines, 1);
}

inline std::vector<Complex> triangle_load() {
    return {Complex(0.0, 0.0), Complex(-0.15, -0.06), Complex(-0.10, -0.04)};
}

/// Three-bus path 1-2-3 with z = 0.01 + 0.02j per line and a single load at
/// bus 3; the linearised voltages are 0.996 and 0.992 exactly by hand.
inline Network path3_network(double b_shunt = 0.0) {
    std::vector<Bus> buses(3);
    for (int j = 0; j < 3; ++j) {
        buses[j].id = j + 1;
        buses[j].v_min = 0.64;
        buses[j].v_max = 1.44;
    }
    auto mk = [&](int f, int t) {
        LineParams ln;
        ln.from = f;
        ln.to = t;
        ln.y_series = 1.0 / Complex(0.01, 0.02);
        ln.y_shunt_from = Complex(0.0, b_shunt);
        ln.y_shunt_to = Complex(0.0, b_shunt);
        return ln;
    };
    return Network(buses, {mk(1, 2), mk(2, 3)}, 1);
}

inline std::vector<Complex> path3_load() {
    return {Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(-0.1, -0.05)};
}

// ---------------------------------------------------------------------------
// Random cases
// ---------------------------------------------------------------------------

struct RandomCase {
    Network net;
    std::vector<Complex> injections;  // slack entry zero, loads elsewhere
};

struct RandomCaseOptions {
    double shunt_ratio_max = 1e-2;  // |y_shunt| / |y_series| per end
    double load_scale = 1.0;
    bool c1_bounds = true;  // no injection floors; loads pinned by the cap
};

inline RandomCase random_radial(Rng& rng, int min_n, int max_n,
                                const RandomCaseOptions& opt = {}) {
    const int n = rng.uniform_int(min_n, max_n);
    std::vector<Complex> s(n, Complex(0.0, 0.0));
    std::vector<Bus> buses(n);
    std::vector<LineParams> lines;
    for (int j = 0; j < n; ++j) {
        buses[j].id = j + 1;
        buses[j].v_min = 0.64;
        buses[j].v_max = 1.44;
        buses[j].p_min = opt.c1_bounds ? -kInf : -10.0;
        buses[j].q_min = opt.c1_bounds ? -kInf : -10.0;
    }
    for (int j = 1; j < n; ++j) {
        LineParams ln;
        ln.from = rng.uniform_int(1, j);  // parent among earlier buses
        ln.to = j + 1;
        double r = rng.uniform(0.01, 0.05), x = rng.uniform(0.02, 0.08);
        ln.y_series = 1.0 / Complex(r, x);
        double ymag = std::abs(ln.y_series);
        ln.y_shunt_from = Complex(0.0, rng.uniform(0.0, opt.shunt_ratio_max) * ymag);
        ln.y_shunt_to = Complex(0.0, rng.uniform(0.0, opt.shunt_ratio_max) * ymag);
        lines.push_back(ln);
        double p = -rng.uniform(0.3, 1.0) * opt.load_scale * (1.2 / n);
        double q = p * rng.uniform(0.2, 0.5);
        s[j] = Complex(p, q);
        buses[j].p_max = p;  // the load binds from above
        buses[j].q_max = q;
    }
    return {Network(buses, lines, 1), s};
}

inline RandomCase random_meshed(Rng& rng, int min_n, int max_n, int max_chords = 3,
                                const RandomCaseOptions& opt = {}) {
    RandomCase rc = random_radial(rng, min_n, max_n, opt);
    const int n = rc.net.num_buses();
    std::vector<Bus> buses = rc.net.buses();
    std::vector<LineParams> lines = rc.net.lines();
    auto connected = [&](int a, int b) {
        for (const LineParams& l : lines)
            if ((l.from == a && l.to == b) || (l.from == b && l.to == a)) return true;
        return false;
    };
    int chords = rng.uniform_int(1, max_chords);
    for (int c = 0; c < chords; ++c) {
        int a = rng.uniform_int(1, n), b = rng.uniform_int(1, n);
        if (a == b || connected(a, b)) continue;
        LineParams ln;
        ln.from = a;
        ln.to = b;
        double r = rng.uniform(0.01, 0.05), x = rng.uniform(0.02, 0.08);
        ln.y_series = 1.0 / Complex(r, x);
        double ymag = std::abs(ln.y_series);
        ln.y_shunt_from = Complex(0.0, rng.uniform(0.0, opt.shunt_ratio_max) * ymag);
        ln.y_shunt_to = Complex(0.0, rng.uniform(0.0, opt.shunt_ratio_max) * ymag);
        lines.push_back(ln);
    }
    return {Network(buses, lines, 1), rc.injections};
}

// ---------------------------------------------------------------------------
// Independent power-flow oracle: fixed-point iteration on the admittance
// partition, V_L <- Y_LL^{-1} (conj(s_L ./ V_L) - Y_LS). Shares no code path
// with the Newton solver beyond the admittance matrix itself.
// ---------------------------------------------------------------------------

inline std::vector<Complex> zbus_pf(const Network& net, const std::vector<Complex>& s,
                                    int max_iter = 2000, double tol = 1e-14) {
    const int n = net.num_buses();
    const int slack = net.slack_index();
    Eigen::MatrixXcd Y = shuntflow::bus_admittance(net);
    std::vector<int> freeb;
    for (int j = 0; j < n; ++j)
        if (j != slack) freeb.push_back(j);
    const int nf = static_cast<int>(freeb.size());
    Eigen::MatrixXcd YLL(nf, nf);
    Eigen::VectorXcd YLS(nf);
    for (int a = 0; a < nf; ++a) {
        YLS(a) = Y(freeb[a], slack);
        for (int b = 0; b < nf; ++b) YLL(a, b) = Y(freeb[a], freeb[b]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(YLL);
    Eigen::VectorXcd VL = Eigen::VectorXcd::Ones(nf);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXcd rhs(nf);
        for (int a = 0; a < nf; ++a) rhs(a) = std::conj(s[freeb[a]] / VL(a)) - YLS(a);
        Eigen::VectorXcd next = lu.solve(rhs);
        double delta = (next - VL).cwiseAbs().maxCoeff();
        VL = next;
        if (delta <= tol) break;
    }
    std::vector<Complex> V(n, Complex(1.0, 0.0));
    for (int a = 0; a < nf; ++a) V[freeb[a]] = VL(a);
    return V;
}

/// Inverse of the tightening move: grow both squared currents by
/// Re(alpha) * eps and shift flows and endpoint injections by z * eps / 2,
/// leaving every linear equation intact while opening the two cone gaps.
inline BranchFlowPoint slacken(const Network& net, const BranchFlowPoint& x0, int line,
                               double eps) {
    BranchFlowPoint x = x0;
    Complex z = net.line(line).z_series();
    int ef = net.end_of(line, true), er = net.end_of(line, false);
    x.ell[ef] += net.end_alpha(ef).real() * eps;
    x.ell[er] += net.end_alpha(er).real() * eps;
    for (int e : {ef, er}) {
        x.P[e] += z.real() * eps / 2.0;
        x.Q[e] += z.imag() * eps / 2.0;
        int tail = net.end_tail(e);
        x.p[tail] += z.real() * eps / 2.0;
        x.q[tail] += z.imag() * eps / 2.0;
    }
    return x;
}

}  // namespace sftest
