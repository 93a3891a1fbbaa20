#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "shuntflow/network.hpp"

namespace shuntflow {

/// A solved operating point in phasor form: bus voltages and net injections,
/// plus sending-end current and power per directed end.
struct PhasorSolution {
    std::vector<Complex> V;  // bus voltage phasors
    std::vector<Complex> s;  // net injections recomputed from V
    std::vector<Complex> I;  // sending-end currents, directed-end order
    std::vector<Complex> S;  // sending-end powers, directed-end order
    int iterations = 0;
    double max_mismatch = 0.0;  // worst injection mismatch vs the request
};

/// Bus admittance matrix. Diagonal collects series plus local shunt terms,
/// off-diagonal is minus the series admittance (summed over parallel lines).
inline Eigen::MatrixXcd bus_admittance(const Network& net) {
    const int n = net.num_buses();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (int e = 0; e < net.num_ends(); ++e) {
        int j = net.end_tail(e);
        int k = net.end_head(e);
        Complex ys = net.line(net.end_line(e)).y_series;
        Y(j, j) += ys + net.end_shunt(e);
        Y(j, k) -= ys;
    }
    return Y;
}

/// Injection residual s_j - [diag(V) (Y V)*]_j for every bus, given candidate
/// voltages and the injections they are supposed to produce.
inline std::vector<Complex> bim_residual(const Network& net, const std::vector<Complex>& V,
                                         const std::vector<Complex>& s) {
    const int n = net.num_buses();
    Eigen::MatrixXcd Y = bus_admittance(net);
    Eigen::VectorXcd Vv(n);
    for (int j = 0; j < n; ++j) Vv(j) = V[j];
    Eigen::VectorXcd YV = Y * Vv;
    std::vector<Complex> r(n);
    for (int j = 0; j < n; ++j) r[j] = s[j] - Vv(j) * std::conj(YV(j));
    return r;
}

/// Sending-end current and power per directed end, plus the residual of the
/// identity V_j V_k* = alpha* v_j - z* S_jk that couples the two ends.
struct BranchQuantities {
    std::vector<Complex> I;
    std::vector<Complex> S;
    std::vector<Complex> voltage_product_residual;
};

inline BranchQuantities branch_quantities(const Network& net, const std::vector<Complex>& V) {
    BranchQuantities out;
    const int m = net.num_ends();
    out.I.resize(m);
    out.S.resize(m);
    out.voltage_product_residual.resize(m);
    for (int e = 0; e < m; ++e) {
        int j = net.end_tail(e);
        int k = net.end_head(e);
        const LineParams& ln = net.line(net.end_line(e));
        out.I[e] = ln.y_series * (V[j] - V[k]) + net.end_shunt(e) * V[j];
        out.S[e] = V[j] * std::conj(out.I[e]);
        double vj = std::norm(V[j]);
        out.voltage_product_residual[e] =
            V[j] * std::conj(V[k]) -
            (std::conj(net.end_alpha(e)) * vj - std::conj(ln.z_series()) * out.S[e]);
    }
    return out;
}

struct NewtonOptions {
    double tol = 1e-10;  // max abs per-unit injection mismatch
    int max_iter = 50;
};

/// Newton-Raphson power flow in polar coordinates, warm-started by a short
/// admittance fixed-point sweep. The slack bus holds V = 1 + 0j; every other
/// bus tracks its requested complex injection. On success the returned
/// injections are recomputed from the voltages, so the solution satisfies
/// the injection equations to rounding rather than merely to `tol`.
inline PhasorSolution solve_pf_newton(const Network& net, const std::vector<Complex>& s_request,
                                      const NewtonOptions& opt = {}) {
    const int n = net.num_buses();
    if (static_cast<int>(s_request.size()) != n)
        fail(Errc::precondition_violated, "injection vector has wrong length");
    const int slack = net.slack_index();
    Eigen::MatrixXcd Y = bus_admittance(net);
    Eigen::MatrixXd G = Y.real(), B = Y.imag();

    // Unknown ordering: angles of non-slack buses, then magnitudes.
    std::vector<int> free_bus;
    for (int j = 0; j < n; ++j)
        if (j != slack) free_bus.push_back(j);
    const int nf = static_cast<int>(free_bus.size());

    Eigen::VectorXd th = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);

    // Admittance fixed-point warm start: sweeps of
    //   V_L <- Y_LL^{-1} (conj(s_L ./ V_L) - Y_LS V_S)
    // pull the iterate toward the high-voltage solution, which strong line
    // charging can place far from a flat start. Any sign of divergence
    // falls back to the flat start untouched.
    if (nf > 0) {
        Eigen::MatrixXcd YLL(nf, nf);
        Eigen::VectorXcd YLS(nf);
        for (int a = 0; a < nf; ++a) {
            YLS(a) = Y(free_bus[a], slack);
            for (int b = 0; b < nf; ++b) YLL(a, b) = Y(free_bus[a], free_bus[b]);
        }
        Eigen::PartialPivLU<Eigen::MatrixXcd> ylu(YLL);
        Eigen::VectorXcd VL = Eigen::VectorXcd::Ones(nf);
        bool usable = true;
        for (int sweep = 0; sweep < 20 && usable; ++sweep) {
            Eigen::VectorXcd rhs(nf);
            for (int a = 0; a < nf; ++a)
                rhs(a) = std::conj(s_request[free_bus[a]] / VL(a)) - YLS(a);
            Eigen::VectorXcd next = ylu.solve(rhs);
            usable = next.allFinite();
            if (!usable) break;
            double delta = (next - VL).cwiseAbs().maxCoeff();
            VL = next;
            if (delta < 1e-2) break;
        }
        for (int a = 0; a < nf && usable; ++a)
            usable = std::abs(VL(a)) > 0.05 && std::abs(VL(a)) < 20.0;
        if (usable)
            for (int a = 0; a < nf; ++a) {
                th(free_bus[a]) = std::arg(VL(a));
                vm(free_bus[a]) = std::abs(VL(a));
            }
    }

    auto injections = [&](Eigen::VectorXd& P, Eigen::VectorXd& Q) {
        P.setZero(n);
        Q.setZero(n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                if (G(j, k) == 0.0 && B(j, k) == 0.0) continue;
                double c = std::cos(th(j) - th(k)), sn = std::sin(th(j) - th(k));
                P(j) += vm(j) * vm(k) * (G(j, k) * c + B(j, k) * sn);
                Q(j) += vm(j) * vm(k) * (G(j, k) * sn - B(j, k) * c);
            }
    };

    PhasorSolution sol;
    Eigen::VectorXd P(n), Q(n);
    for (int it = 0; it <= opt.max_iter; ++it) {
        injections(P, Q);
        Eigen::VectorXd f(2 * nf);
        for (int a = 0; a < nf; ++a) {
            int j = free_bus[a];
            f(a) = P(j) - s_request[j].real();
            f(nf + a) = Q(j) - s_request[j].imag();
        }
        double mism = nf == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
        sol.iterations = it;
        sol.max_mismatch = mism;
        if (mism <= opt.tol) break;
        if (it == opt.max_iter)
            fail(Errc::non_convergence, "power flow did not converge in " +
                                            std::to_string(opt.max_iter) +
                                            " iterations (mismatch " + std::to_string(mism) + ")");

        Eigen::MatrixXd J(2 * nf, 2 * nf);
        for (int a = 0; a < nf; ++a) {
            int j = free_bus[a];
            for (int b = 0; b < nf; ++b) {
                int k = free_bus[b];
                double c = std::cos(th(j) - th(k)), sn = std::sin(th(j) - th(k));
                if (j == k) {
                    J(a, b) = -Q(j) - B(j, j) * vm(j) * vm(j);
                    J(a, nf + b) = P(j) / vm(j) + G(j, j) * vm(j);
                    J(nf + a, b) = P(j) - G(j, j) * vm(j) * vm(j);
                    J(nf + a, nf + b) = Q(j) / vm(j) - B(j, j) * vm(j);
                } else {
                    double gc = G(j, k) * c + B(j, k) * sn;
                    double gs = G(j, k) * sn - B(j, k) * c;
                    J(a, b) = vm(j) * vm(k) * gs;
                    J(a, nf + b) = vm(j) * gc;
                    J(nf + a, b) = -vm(j) * vm(k) * gc;
                    J(nf + a, nf + b) = vm(j) * gs;
                }
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible())
            fail(Errc::singular_jacobian,
                 "power-flow Jacobian is singular at iteration " + std::to_string(it));
        Eigen::VectorXd dx = lu.solve(-f);
        // Damped update: halve the step while it would push a magnitude out
        // of the positive domain or fail to shrink the residual. The Newton
        // direction is a descent direction for the 2-norm of the mismatch,
        // so acceptance tests that norm rather than the max entry.
        const double f2 = f.norm();
        Eigen::VectorXd th0 = th, vm0 = vm;
        for (double step = 1.0;; step *= 0.5) {
            bool in_domain = true;
            for (int a = 0; a < nf; ++a) {
                th(free_bus[a]) = th0(free_bus[a]) + step * dx(a);
                vm(free_bus[a]) = vm0(free_bus[a]) + step * dx(nf + a);
                in_domain = in_domain && vm(free_bus[a]) > 0.0;
            }
            if (in_domain) {
                injections(P, Q);
                double trial2 = 0.0;
                for (int a = 0; a < nf; ++a) {
                    int j = free_bus[a];
                    double dp = P(j) - s_request[j].real();
                    double dq = Q(j) - s_request[j].imag();
                    trial2 += dp * dp + dq * dq;
                }
                if (std::sqrt(trial2) < f2 || step <= 1.0 / 1024.0) break;
            } else if (step <= 1.0 / 1024.0) {
                fail(Errc::non_convergence,
                     "voltage magnitude left the positive domain at iteration " +
                         std::to_string(it));
            }
        }
    }

    sol.V.resize(n);
    for (int j = 0; j < n; ++j) sol.V[j] = std::polar(vm(j), th(j));
    // Recompute injections from the final voltages (slack included).
    Eigen::VectorXcd Vv(n);
    for (int j = 0; j < n; ++j) Vv(j) = sol.V[j];
    Eigen::VectorXcd YV = Eigen::MatrixXcd(bus_admittance(net)) * Vv;
    sol.s.resize(n);
    for (int j = 0; j < n; ++j) sol.s[j] = sol.V[j] * std::conj(Complex(YV(j)));
    BranchQuantities bq = branch_quantities(net, sol.V);
    sol.I = std::move(bq.I);
    sol.S = std::move(bq.S);
    return sol;
}

}  // namespace shuntflow
