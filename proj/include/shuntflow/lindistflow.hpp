#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "shuntflow/bfm.hpp"
#include "shuntflow/network.hpp"

namespace shuntflow {

/// Linearised distribution flow on a radial network: losses and shunts
/// dropped, flows antisymmetric, squared voltages obtained by accumulating
/// 2 Re(z* S) drops down the tree from the slack.
struct LinDistResult {
    std::vector<double> v;   // per bus, squared magnitude
    std::vector<Complex> S;  // per directed end; S[reverse] = -S[forward]
};

/// `s` holds net injections per bus index; the slack entry is ignored (the
/// slack picks up the balance). Throws NotRadial on meshed networks.
inline LinDistResult solve_lindistflow(const Network& net, const std::vector<Complex>& s) {
    if (!net.is_radial()) fail(Errc::not_radial, "the linearised model is defined on trees");
    const int n = net.num_buses();
    if (static_cast<int>(s.size()) != n)
        fail(Errc::precondition_violated, "injection vector has wrong length");

    // Net injection of each subtree, accumulated leaves-first.
    std::vector<Complex> subtree(n);
    for (int j = 0; j < n; ++j) subtree[j] = s[j];
    const std::vector<int>& order = net.bfs_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int j = *it;
        if (net.parent_bus(j) >= 0) subtree[net.parent_bus(j)] += subtree[j];
    }

    LinDistResult out;
    out.S.assign(net.num_ends(), Complex(0.0, 0.0));
    out.v.assign(n, 1.0);
    for (int c : order) {
        int l = net.parent_line(c);
        if (l < 0) continue;
        int p = net.parent_bus(c);
        // Flow sent from parent to child carries everything the subtree consumes.
        bool parent_is_from = net.index_of(net.line(l).from) == p;
        int e_pc = net.end_of(l, parent_is_from);
        out.S[e_pc] = -subtree[c];
        out.S[net.reverse_end(e_pc)] = subtree[c];
        Complex z = net.line(l).z_series();
        out.v[c] = out.v[p] - 2.0 * (std::conj(z) * out.S[e_pc]).real();
    }
    return out;
}

/// Side-by-side diagnostics of a linearised solution against an exact
/// branch-flow point for the same injections.
struct ApproximationReport {
    std::vector<double> v_exact, v_lin;
    std::vector<double> v_rel_err;    // |v_lin - v| / v per bus
    double max_rel_error = 0.0;
    double total_loss = 0.0;          // sum of net active injections
    double total_load = 0.0;          // active power consumed
    double loss_fraction = 0.0;
    bool v_lin_dominates = false;     // v_lin >= v everywhere (up to 1e-12)

    // Per-bus power bookkeeping on the exact point: flow received from the
    // parent plus the bus injection must feed the child flows and the
    // parent-line losses. Zero up to the accuracy of the input point.
    std::vector<Complex> bookkeeping_residual;
    double max_bookkeeping_residual = 0.0;

    struct LineDiag {
        double ratio_from = 0.0;      // |shunt / series| admittance ratio
        double ratio_to = 0.0;
        double ratio_threshold = 0.0; // 1e-4 * length_ratio^2
        bool ratio_within = false;
        double rel_voltage_drop = 0.0;  // |V_j - V_k| / |V_j| on the exact point
        double drop_threshold = 0.0;    // 1e-2 * length_ratio
        bool drop_within = false;
    };
    std::vector<LineDiag> lines;
};

/// `length_ratio` rescales the typical-magnitude bands: shunt-to-series
/// ratios grow with the square of the line length while relative voltage
/// drops grow linearly, so a network described at `length_ratio` times the
/// reference length is compared against accordingly wider bands.
inline ApproximationReport approximation_report(const Network& net, const BranchFlowPoint& x,
                                                const LinDistResult& lin,
                                                double length_ratio = 1.0) {
    if (!net.is_radial()) fail(Errc::not_radial, "the linearised model is defined on trees");
    ApproximationReport rep;
    const int n = net.num_buses();
    rep.v_exact = x.v;
    rep.v_lin = lin.v;
    rep.v_rel_err.resize(n);
    rep.v_lin_dominates = true;
    for (int j = 0; j < n; ++j) {
        rep.v_rel_err[j] = std::abs(lin.v[j] - x.v[j]) / x.v[j];
        rep.max_rel_error = std::max(rep.max_rel_error, rep.v_rel_err[j]);
        if (lin.v[j] < x.v[j] - 1e-12) rep.v_lin_dominates = false;
    }
    for (int j = 0; j < n; ++j) {
        rep.total_loss += x.p[j];
        if (x.p[j] < 0.0) rep.total_load -= x.p[j];
    }
    rep.loss_fraction = rep.total_loss / std::max(rep.total_load, 1e-300);

    rep.bookkeeping_residual.assign(n, Complex(0.0, 0.0));
    for (int k = 0; k < n; ++k) {
        int l = net.parent_line(k);
        if (l < 0) continue;
        int p = net.parent_bus(k);
        const LineParams& ln = net.line(l);
        bool parent_is_from = net.index_of(ln.from) == p;
        int e_pc = net.end_of(l, parent_is_from);
        // |V_p - V_k|^2 off the drop phasor: v_p + v_k - 2 Re(alpha* v_p - z* S).
        double dv_sq = x.v[p] + x.v[k] - 2.0 * end_drop_phasor(net, x, e_pc).real();
        Complex line_loss = dv_sq * std::conj(ln.y_series) +
                            x.v[p] * std::conj(net.end_shunt(e_pc)) +
                            x.v[k] * std::conj(net.end_shunt(net.reverse_end(e_pc)));
        Complex children(0.0, 0.0);
        for (int e : net.ends_at(k))
            if (e != net.reverse_end(e_pc)) children += x.S(e);
        rep.bookkeeping_residual[k] = children + line_loss - x.S(e_pc) - x.s(k);
        rep.max_bookkeeping_residual =
            std::max(rep.max_bookkeeping_residual, std::abs(rep.bookkeeping_residual[k]));
    }

    rep.lines.resize(net.num_lines());
    for (int l = 0; l < net.num_lines(); ++l) {
        auto& d = rep.lines[l];
        int ef = net.end_of(l, true);
        d.ratio_from = shunt_ratio(net, ef);
        d.ratio_to = shunt_ratio(net, net.reverse_end(ef));
        d.ratio_threshold = 1e-4 * length_ratio * length_ratio;
        d.ratio_within = d.ratio_from <= d.ratio_threshold && d.ratio_to <= d.ratio_threshold;
        int j = net.end_tail(ef), k = net.end_head(ef);
        double dv_sq = x.v[j] + x.v[k] - 2.0 * end_drop_phasor(net, x, ef).real();
        d.rel_voltage_drop = std::sqrt(std::max(0.0, dv_sq) / x.v[j]);
        d.drop_threshold = 1e-2 * length_ratio;
        d.drop_within = d.rel_voltage_drop <= d.drop_threshold;
    }
    return rep;
}

}  // namespace shuntflow
