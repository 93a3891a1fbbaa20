#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "shuntflow/errors.hpp"

namespace shuntflow::conic {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cone linear program in standard form:
///
///   minimize    c' x
///   subject to  A x = b
///               G x + s = h,  s in K
///
/// where K is a product of a nonnegative orthant (first `nonneg` rows of s)
/// followed by second-order cones of the listed dimensions. A block
/// (u0, u1) of dimension d lies in the second-order cone iff u0 >= |u1|.
struct Program {
    VectorXd c;
    MatrixXd A;
    VectorXd b;
    MatrixXd G;
    VectorXd h;
    int nonneg = 0;
    std::vector<int> soc_dims;

    int cone_rows() const {
        int m = nonneg;
        for (int d : soc_dims) m += d;
        return m;
    }
};

enum class SolveStatus {
    optimal,
    primal_infeasible,
    dual_infeasible,
    iteration_limit,
    numerical_failure,
};

struct Options {
    double feastol = 1e-8;
    double abstol = 1e-8;
    double reltol = 1e-8;
    int max_iter = 100;
    std::ostream* trace = nullptr;  // per-iteration diagnostics, off by default
};

struct Solution {
    SolveStatus status = SolveStatus::numerical_failure;
    VectorXd x, s, y, z;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
};

namespace detail {

/// Offsets of the cone blocks inside a stacked slack/dual vector, plus the
/// Jordan-algebra operations the Nesterov-Todd machinery needs.
struct ConeOps {
    int nonneg = 0;
    std::vector<int> off;  // start of each soc block
    std::vector<int> dim;
    int m = 0;

    explicit ConeOps(const Program& P) : nonneg(P.nonneg), dim(P.soc_dims) {
        int at = nonneg;
        for (int d : dim) {
            off.push_back(at);
            at += d;
        }
        m = at;
    }

    int degree() const { return nonneg + static_cast<int>(dim.size()); }

    VectorXd identity() const {
        VectorXd e = VectorXd::Zero(m);
        e.head(nonneg).setOnes();
        for (std::size_t i = 0; i < dim.size(); ++i) e(off[i]) = 1.0;
        return e;
    }

    /// Smallest spectral value: the entry itself on the orthant,
    /// u0 - |u1| on a second-order cone. Positive iff strictly interior.
    double min_eig(const VectorXd& u) const {
        double me = std::numeric_limits<double>::infinity();
        for (int i = 0; i < nonneg; ++i) me = std::min(me, u(i));
        for (std::size_t i = 0; i < dim.size(); ++i) {
            double u0 = u(off[i]);
            double n1 = u.segment(off[i] + 1, dim[i] - 1).norm();
            me = std::min(me, u0 - n1);
        }
        return me;
    }

    /// sup { t >= 0 : u + tau*du in K for all tau in [0, t] }, u interior.
    double max_step(const VectorXd& u, const VectorXd& du) const {
        double t = std::numeric_limits<double>::infinity();
        for (int i = 0; i < nonneg; ++i)
            if (du(i) < 0.0) t = std::min(t, -u(i) / du(i));
        for (std::size_t i = 0; i < dim.size(); ++i) {
            double u0 = u(off[i]), d0 = du(off[i]);
            auto u1 = u.segment(off[i] + 1, dim[i] - 1);
            auto d1 = du.segment(off[i] + 1, dim[i] - 1);
            // Boundary crossing solves a*t^2 + b*t + c = 0 with c >= 0.
            double a = d0 * d0 - d1.squaredNorm();
            double b = 2.0 * (u0 * d0 - u1.dot(d1));
            double c = std::max(0.0, u0 * u0 - u1.squaredNorm());
            double tb;
            if (a >= 0.0 && b >= 0.0) {
                tb = std::numeric_limits<double>::infinity();
            } else if (a == 0.0) {
                tb = -c / b;  // b < 0 here
            } else {
                double D = b * b - 4.0 * a * c;
                if (D < 0.0) {
                    tb = std::numeric_limits<double>::infinity();  // a > 0, no crossing
                } else {
                    double sq = std::sqrt(D);
                    double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
                    double r1 = (qq == 0.0) ? 0.0 : c / qq;
                    double r2 = (a == 0.0) ? r1 : qq / a;
                    if (r1 > r2) std::swap(r1, r2);
                    if (r1 > 0.0)
                        tb = r1;
                    else if (r2 > 0.0)
                        tb = r2;
                    else
                        tb = a > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
                }
            }
            t = std::min(t, tb);
        }
        return t;
    }

    /// Jordan product u o v.
    VectorXd jprod(const VectorXd& u, const VectorXd& v) const {
        VectorXd w(m);
        w.head(nonneg) = u.head(nonneg).cwiseProduct(v.head(nonneg));
        for (std::size_t i = 0; i < dim.size(); ++i) {
            int o = off[i], d = dim[i];
            w(o) = u.segment(o, d).dot(v.segment(o, d));
            w.segment(o + 1, d - 1) =
                u(o) * v.segment(o + 1, d - 1) + v(o) * u.segment(o + 1, d - 1);
        }
        return w;
    }

    /// Solve u o w = v for w (u interior).
    VectorXd jdiv(const VectorXd& u, const VectorXd& v) const {
        VectorXd w(m);
        w.head(nonneg) = v.head(nonneg).cwiseQuotient(u.head(nonneg));
        for (std::size_t i = 0; i < dim.size(); ++i) {
            int o = off[i], d = dim[i];
            double u0 = u(o);
            auto u1 = u.segment(o + 1, d - 1);
            double det = u0 * u0 - u1.squaredNorm();
            double w0 = (u0 * v(o) - u1.dot(v.segment(o + 1, d - 1))) / det;
            w(o) = w0;
            w.segment(o + 1, d - 1) = (v.segment(o + 1, d - 1) - w0 * u1) / u0;
        }
        return w;
    }
};

/// Nesterov-Todd scaling W with W z = W^{-1} s = lambda for the current
/// interior pair. On the orthant W is diagonal; on a second-order cone
/// W = eta * (2 wbar wbar' - J) with J = diag(1, -I) and wbar'J wbar = 1.
struct Scaling {
    const ConeOps& K;
    VectorXd d_nn;                 // orthant: sqrt(s_i / z_i)
    std::vector<double> eta;       // soc: sqrt(sres / zres)
    std::vector<VectorXd> wbar;

    Scaling(const ConeOps& cones, const VectorXd& s, const VectorXd& z) : K(cones) {
        d_nn = (s.head(K.nonneg).cwiseQuotient(z.head(K.nonneg))).cwiseSqrt();
        for (std::size_t i = 0; i < K.dim.size(); ++i) {
            int o = K.off[i], d = K.dim[i];
            auto sb = s.segment(o, d);
            auto zb = z.segment(o, d);
            double sres = std::sqrt(sb(0) * sb(0) - sb.tail(d - 1).squaredNorm());
            double zres = std::sqrt(zb(0) * zb(0) - zb.tail(d - 1).squaredNorm());
            VectorXd sbar = sb / sres, zbar = zb / zres;
            double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
            VectorXd w(d);
            w(0) = sbar(0) + zbar(0);
            w.tail(d - 1) = sbar.tail(d - 1) - zbar.tail(d - 1);
            w /= 2.0 * gamma;
            // Scaling vector is the Jordan square root of w: (2 v v' - J)^2
            // equals the quadratic representation of w, so W z = W^{-1} s.
            w(0) += 1.0;
            w /= std::sqrt(2.0 * w(0));
            eta.push_back(std::sqrt(sres / zres));
            wbar.push_back(w);
        }
    }

    /// W u (inv = false) or W^{-1} u (inv = true).
    VectorXd apply(const VectorXd& u, bool inv) const {
        VectorXd r(K.m);
        if (inv)
            r.head(K.nonneg) = u.head(K.nonneg).cwiseQuotient(d_nn);
        else
            r.head(K.nonneg) = u.head(K.nonneg).cwiseProduct(d_nn);
        for (std::size_t i = 0; i < K.dim.size(); ++i) {
            int o = K.off[i], d = K.dim[i];
            VectorXd w = wbar[i];
            double sc = eta[i];
            if (inv) {
                w.tail(d - 1) = -w.tail(d - 1);  // H(Jw) = H(w)^{-1}
                sc = 1.0 / sc;
            }
            auto ub = u.segment(o, d);
            double wu = w.dot(ub);
            VectorXd Ju(d);
            Ju(0) = ub(0);
            Ju.tail(d - 1) = -ub.tail(d - 1);
            r.segment(o, d) = sc * (2.0 * wu * w - Ju);
        }
        return r;
    }

    /// Dense W'W = W^2 for the KKT system.
    MatrixXd dense_square() const {
        MatrixXd M = MatrixXd::Zero(K.m, K.m);
        M.topLeftCorner(K.nonneg, K.nonneg).diagonal() = d_nn.cwiseAbs2();
        for (std::size_t i = 0; i < K.dim.size(); ++i) {
            int o = K.off[i], d = K.dim[i];
            MatrixXd J = -MatrixXd::Identity(d, d);
            J(0, 0) = 1.0;
            MatrixXd H = 2.0 * wbar[i] * wbar[i].transpose() - J;
            M.block(o, o, d, d) = (eta[i] * eta[i]) * (H * H);
        }
        return M;
    }
};

}  // namespace detail

/// Primal-dual predictor-corrector interior-point method with Nesterov-Todd
/// scaling. Dense linear algebra throughout; intended for the problem sizes
/// this library produces (a few hundred variables). Deterministic: identical
/// inputs take identical iterates.
inline Solution solve(const Program& P, const Options& opt = {}) {
    const int n = static_cast<int>(P.c.size());
    const int p = static_cast<int>(P.b.size());
    const int m = static_cast<int>(P.h.size());
    detail::ConeOps K(P);
    if (K.m != m) fail(Errc::precondition_violated, "cone sizes do not match G");

    Solution sol;
    sol.x = VectorXd::Zero(n);
    sol.y = VectorXd::Zero(p);

    const VectorXd e = K.identity();
    const int dim = n + p + m;
    MatrixXd M = MatrixXd::Zero(dim, dim);
    if (p > 0) {
        M.block(n, 0, p, n) = P.A;
        M.block(0, n, n, p) = P.A.transpose();
    }
    M.block(n + p, 0, m, n) = P.G;
    M.block(0, n + p, n, m) = P.G.transpose();

    Eigen::PartialPivLU<MatrixXd> lu;
    // The factorization is taken of a statically regularized copy (+delta on
    // the primal block, -delta on the dual blocks) so pivots stay bounded away
    // from zero however extreme the scaling gets; refinement below targets the
    // true matrix, which removes the regularization error again.
    const double reg = 1e-8;
    auto factor = [&](const MatrixXd& W2) {
        M.block(n + p, n + p, m, m) = -W2;
        MatrixXd Mreg = M;
        Mreg.diagonal().head(n).array() += reg;
        Mreg.diagonal().tail(p + m).array() -= reg;
        lu.compute(Mreg);
    };
    // Iterative refinement keeps the directions accurate enough for 1e-8
    // tolerances even when the scaled KKT matrix is nearly singular.
    auto kkt_solve = [&](const VectorXd& r1, const VectorXd& r2, const VectorXd& r3) {
        VectorXd rhs(dim);
        rhs << r1, r2, r3;
        VectorXd u = lu.solve(rhs);
        for (int pass = 0; pass < 4; ++pass) {
            VectorXd corr = rhs - M * u;
            if (corr.lpNorm<Eigen::Infinity>() <=
                1e-14 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
                break;
            u += lu.solve(corr);
        }
        return u;
    };

    // Initial point: two solves with W = I, shifted into the cone interior.
    factor(MatrixXd::Identity(m, m));
    VectorXd u0 = kkt_solve(VectorXd::Zero(n), P.b, P.h);
    sol.x = u0.head(n);
    VectorXd shat = -(u0.tail(m));
    double ap = -K.min_eig(shat);
    sol.s = ap < 0.0 ? shat : (shat + (1.0 + ap) * e).eval();
    VectorXd u1 = kkt_solve(-P.c, VectorXd::Zero(p), VectorXd::Zero(m));
    sol.y = u1.segment(n, p);
    VectorXd zhat = u1.tail(m);
    double ad = -K.min_eig(zhat);
    sol.z = ad < 0.0 ? zhat : (zhat + (1.0 + ad) * e).eval();

    const double nrm_b = std::max(1.0, P.b.norm());
    const double nrm_h = std::max(1.0, P.h.norm());
    const double nrm_c = std::max(1.0, P.c.norm());

    for (int it = 0; it <= opt.max_iter; ++it) {
        VectorXd rx = P.c + P.G.transpose() * sol.z;
        if (p > 0) rx += P.A.transpose() * sol.y;
        VectorXd ry = p > 0 ? (P.A * sol.x - P.b).eval() : VectorXd::Zero(0);
        VectorXd rz = P.G * sol.x + sol.s - P.h;

        double gap = sol.s.dot(sol.z);
        sol.primal_objective = P.c.dot(sol.x);
        sol.dual_objective = -P.h.dot(sol.z) - (p > 0 ? P.b.dot(sol.y) : 0.0);
        sol.gap = gap;
        sol.relative_gap = gap / std::max(1.0, std::abs(sol.primal_objective));
        sol.primal_residual = std::max(ry.norm() / nrm_b, rz.norm() / nrm_h);
        sol.dual_residual = rx.norm() / nrm_c;
        sol.iterations = it;
        if (opt.trace)
            *opt.trace << "it " << it << " pres " << sol.primal_residual << " dres "
                       << sol.dual_residual << " gap " << gap << " mins " << K.min_eig(sol.s)
                       << " minz " << K.min_eig(sol.z) << "\n";

        if (!std::isfinite(gap) || !std::isfinite(sol.primal_residual) ||
            !std::isfinite(sol.dual_residual)) {
            sol.status = SolveStatus::numerical_failure;
            return sol;
        }
        if (sol.primal_residual <= opt.feastol && sol.dual_residual <= opt.feastol &&
            (gap <= opt.abstol || sol.relative_gap <= opt.reltol)) {
            sol.status = SolveStatus::optimal;
            return sol;
        }
        // Certificates of infeasibility, scaled by the blowing-up multiplier.
        double kappa = -(P.h.dot(sol.z) + (p > 0 ? P.b.dot(sol.y) : 0.0));
        if (kappa > 0.0) {
            VectorXd cert = P.G.transpose() * sol.z;
            if (p > 0) cert += P.A.transpose() * sol.y;
            if (cert.lpNorm<Eigen::Infinity>() / kappa <= opt.feastol) {
                sol.status = SolveStatus::primal_infeasible;
                return sol;
            }
        }
        double tau = -P.c.dot(sol.x);
        if (tau > 0.0) {
            double cert = (P.G * sol.x + sol.s).lpNorm<Eigen::Infinity>();
            if (p > 0) cert = std::max(cert, (P.A * sol.x).lpNorm<Eigen::Infinity>());
            if (cert / tau <= opt.feastol) {
                sol.status = SolveStatus::dual_infeasible;
                return sol;
            }
        }
        if (it == opt.max_iter) {
            sol.status = SolveStatus::iteration_limit;
            return sol;
        }

        if (K.min_eig(sol.s) <= 0.0 || K.min_eig(sol.z) <= 0.0) {
            sol.status = SolveStatus::numerical_failure;
            return sol;
        }
        detail::Scaling W(K, sol.s, sol.z);
        VectorXd lambda = W.apply(sol.z, false);
        factor(W.dense_square());

        // Predictor (affine scaling) direction.
        VectorXd ua = kkt_solve(-rx, -ry, -rz + sol.s);
        if (!ua.allFinite()) {
            sol.status = SolveStatus::numerical_failure;
            return sol;
        }
        VectorXd dza = ua.tail(m);
        VectorXd dzta = W.apply(dza, false);
        VectorXd dsta = -lambda - dzta;  // scaled direction; ds = W dsta
        VectorXd dsa = W.apply(dsta, false);

        double step_a = std::min({1.0, K.max_step(sol.s, dsa), K.max_step(sol.z, dza)});
        double gap_a = (sol.s + step_a * dsa).dot(sol.z + step_a * dza);
        double sigma = std::pow(std::clamp(gap_a / gap, 0.0, 1.0), 3);
        double mu = gap / K.degree();

        // Corrector with Mehrotra second-order term. If the combined step is
        // blocked at the cone boundary, retry once as a pure centering step.
        VectorXd dx, dy, dz, ds;
        double alpha = 0.0;
        for (int attempt = 0; attempt < 2; ++attempt) {
            VectorXd d_s = -K.jprod(lambda, lambda) + sigma * mu * e;
            if (attempt == 0) d_s -= K.jprod(dsta, dzta);
            VectorXd rhs3 = -rz - W.apply(K.jdiv(lambda, d_s), false);
            VectorXd uc = kkt_solve(-rx, -ry, rhs3);
            dx = uc.head(n);
            dy = uc.segment(n, p);
            dz = uc.tail(m);
            ds = W.apply(K.jdiv(lambda, d_s) - W.apply(dz, false), false);
            double tmax = std::min(K.max_step(sol.s, ds), K.max_step(sol.z, dz));
            alpha = std::min(1.0, 0.99 * tmax);
            if (alpha > 1e-10) break;
            sigma = 1.0;  // fall back to recentring before giving up
        }
        if (!(alpha > 1e-13)) {
            sol.status = SolveStatus::numerical_failure;
            return sol;
        }
        sol.x += alpha * dx;
        sol.y += alpha * dy;
        sol.z += alpha * dz;
        sol.s += alpha * ds;
    }
    sol.status = SolveStatus::iteration_limit;
    return sol;
}

}  // namespace shuntflow::conic
