#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shuntflow/errors.hpp"

namespace shuntflow {

using Complex = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A bus with operating bounds. Injections are net values in per-unit:
/// positive = generation, negative = consumption. Voltage bounds are on the
/// squared magnitude.
struct Bus {
    int id = 0;            // external identifier, unique, any positive integer
    double p_min = -kInf;  // active injection bounds
    double p_max = kInf;
    double q_min = -kInf;  // reactive injection bounds
    double q_max = kInf;
    double v_min = 0.81;   // squared-magnitude bounds
    double v_max = 1.21;
};

/// One line as a Pi circuit: a series admittance plus one shunt admittance
/// hanging at each end. The two shunts may differ.
struct LineParams {
    int from = 0;
    int to = 0;
    Complex y_series;            // series admittance, must be nonzero
    Complex y_shunt_from;        // shunt at the `from` end
    Complex y_shunt_to;          // shunt at the `to` end
    double i_sq_max = kInf;      // squared-current limit per directed end

    Complex z_series() const { return 1.0 / y_series; }
    /// alpha at the `from` end: 1 + z * y_shunt_from. Equal to 1 iff the
    /// shunt at this end vanishes.
    Complex alpha_from() const { return 1.0 + z_series() * y_shunt_from; }
    Complex alpha_to() const { return 1.0 + z_series() * y_shunt_to; }
};

// ---------------------------------------------------------------------------
// Directed ends
//
// Every line l contributes two directed ends: end l is the forward direction
// (tail = from, head = to) and end L + l is the reverse direction. All
// per-direction quantities (sending-end power S, squared current ell, the
// angle vector beta) are indexed this way: forward block first, then the
// reverse block in the same line order.
// ---------------------------------------------------------------------------

class Network {
public:
    Network(std::vector<Bus> buses, std::vector<LineParams> lines, int slack_id);

    int num_buses() const { return static_cast<int>(buses_.size()); }
    int num_lines() const { return static_cast<int>(lines_.size()); }
    int num_ends() const { return 2 * num_lines(); }

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<LineParams>& lines() const { return lines_; }
    const Bus& bus(int index) const { return buses_[index]; }
    const LineParams& line(int index) const { return lines_[index]; }

    int slack_id() const { return slack_id_; }
    int slack_index() const { return slack_index_; }

    /// Internal index of an external bus id. Throws on unknown ids.
    int index_of(int bus_id) const;
    int id_of(int index) const { return buses_[index].id; }

    // --- directed-end helpers -------------------------------------------

    int end_line(int e) const { return e < num_lines() ? e : e - num_lines(); }
    bool end_is_forward(int e) const { return e < num_lines(); }
    int end_of(int line, bool forward) const { return forward ? line : num_lines() + line; }
    int reverse_end(int e) const {
        return end_is_forward(e) ? e + num_lines() : e - num_lines();
    }
    /// Tail = sending bus index of the directed end.
    int end_tail(int e) const {
        const LineParams& l = lines_[end_line(e)];
        return index_of(end_is_forward(e) ? l.from : l.to);
    }
    int end_head(int e) const {
        const LineParams& l = lines_[end_line(e)];
        return index_of(end_is_forward(e) ? l.to : l.from);
    }
    /// Shunt admittance hanging at the tail of the directed end.
    Complex end_shunt(int e) const {
        const LineParams& l = lines_[end_line(e)];
        return end_is_forward(e) ? l.y_shunt_from : l.y_shunt_to;
    }
    /// alpha seen from the tail of the directed end.
    Complex end_alpha(int e) const {
        const LineParams& l = lines_[end_line(e)];
        return end_is_forward(e) ? l.alpha_from() : l.alpha_to();
    }

    /// Directed ends whose tail is the given bus index, in line order.
    const std::vector<int>& ends_at(int bus_index) const { return ends_at_[bus_index]; }

    // --- topology ---------------------------------------------------------

    bool is_radial() const { return num_lines() == num_buses() - 1; }

    /// Bus-by-line incidence: C(j,l) = +1 if bus j is the `from` end of line
    /// l, -1 if the `to` end, 0 otherwise.
    std::vector<std::vector<double>> incidence_matrix() const;

    /// BFS spanning tree rooted at the slack. parent_line(slack) == -1.
    int parent_line(int bus_index) const { return parent_line_[bus_index]; }
    int parent_bus(int bus_index) const { return parent_bus_[bus_index]; }
    /// Bus indices in BFS order from the slack; the slack comes first.
    const std::vector<int>& bfs_order() const { return bfs_order_; }
    /// Line indices not in the spanning tree, ascending.
    const std::vector<int>& chords() const { return chords_; }
    bool line_in_tree(int line) const { return in_tree_[line]; }

    /// Fundamental cycle closed by a chord: the chord plus the tree path
    /// between its endpoints. Each entry is (line index, orientation) where
    /// +1 means the line is traversed from -> to.
    std::vector<std::pair<int, int>> fundamental_cycle(int chord) const;

private:
    std::vector<Bus> buses_;
    std::vector<LineParams> lines_;
    int slack_id_ = 0;
    int slack_index_ = 0;
    std::vector<int> id_to_index_keys_;    // sorted ids for index_of
    std::vector<int> id_to_index_vals_;
    std::vector<std::vector<int>> ends_at_;
    std::vector<int> parent_line_;
    std::vector<int> parent_bus_;
    std::vector<int> bfs_order_;
    std::vector<int> chords_;
    std::vector<char> in_tree_;
};

inline int Network::index_of(int bus_id) const {
    auto it = std::lower_bound(id_to_index_keys_.begin(), id_to_index_keys_.end(), bus_id);
    if (it == id_to_index_keys_.end() || *it != bus_id)
        fail(Errc::dangling_endpoint, "unknown bus id " + std::to_string(bus_id));
    return id_to_index_vals_[it - id_to_index_keys_.begin()];
}

inline Network::Network(std::vector<Bus> buses, std::vector<LineParams> lines, int slack_id)
    : buses_(std::move(buses)), lines_(std::move(lines)), slack_id_(slack_id) {
    const int n = num_buses();
    if (n == 0) fail(Errc::invalid_bus, "network has no buses");

    // id -> index map; duplicate ids are a hard error.
    std::vector<std::pair<int, int>> pairs(n);
    for (int j = 0; j < n; ++j) pairs[j] = {buses_[j].id, j};
    std::sort(pairs.begin(), pairs.end());
    for (int j = 0; j + 1 < n; ++j)
        if (pairs[j].first == pairs[j + 1].first)
            fail(Errc::duplicate_bus_id, "duplicate bus id " + std::to_string(pairs[j].first));
    id_to_index_keys_.resize(n);
    id_to_index_vals_.resize(n);
    for (int j = 0; j < n; ++j) {
        id_to_index_keys_[j] = pairs[j].first;
        id_to_index_vals_[j] = pairs[j].second;
    }

    slack_index_ = index_of(slack_id_);

    for (const Bus& b : buses_) {
        if (!(b.v_min <= b.v_max) || b.v_min < 0.0)
            fail(Errc::invalid_bus,
                 "bus " + std::to_string(b.id) + ": voltage bounds must satisfy 0 <= v_min <= v_max");
        if (b.p_min > b.p_max || b.q_min > b.q_max)
            fail(Errc::invalid_bus, "bus " + std::to_string(b.id) + ": empty injection interval");
    }

    const int L = num_lines();
    for (int l = 0; l < L; ++l) {
        const LineParams& ln = lines_[l];
        if (ln.y_series == Complex(0.0, 0.0))
            fail(Errc::zero_series_admittance,
                 "line " + std::to_string(l) + " (" + std::to_string(ln.from) + "-" +
                     std::to_string(ln.to) + "): series admittance is zero");
        // Endpoint ids must resolve; index_of throws DanglingEndpoint.
        int f = index_of(ln.from);
        int t = index_of(ln.to);
        if (f == t)
            fail(Errc::dangling_endpoint,
                 "line " + std::to_string(l) + ": both endpoints are bus " + std::to_string(ln.from));
    }

    ends_at_.assign(n, {});
    for (int l = 0; l < L; ++l) {
        ends_at_[index_of(lines_[l].from)].push_back(end_of(l, true));
        ends_at_[index_of(lines_[l].to)].push_back(end_of(l, false));
    }

    // BFS from the slack: spanning tree, visit order, connectivity.
    parent_line_.assign(n, -1);
    parent_bus_.assign(n, -1);
    in_tree_.assign(L, 0);
    std::vector<char> seen(n, 0);
    bfs_order_.clear();
    bfs_order_.push_back(slack_index_);
    seen[slack_index_] = 1;
    for (std::size_t qi = 0; qi < bfs_order_.size(); ++qi) {
        int j = bfs_order_[qi];
        for (int e : ends_at_[j]) {
            int k = end_head(e);
            if (seen[k]) continue;
            seen[k] = 1;
            parent_line_[k] = end_line(e);
            parent_bus_[k] = j;
            in_tree_[end_line(e)] = 1;
            bfs_order_.push_back(k);
        }
    }
    if (static_cast<int>(bfs_order_.size()) != n) {
        int missing = 0;
        for (int j = 0; j < n; ++j)
            if (!seen[j]) { missing = buses_[j].id; break; }
        fail(Errc::disconnected_graph,
             "bus " + std::to_string(missing) + " is not connected to the slack");
    }
    for (int l = 0; l < L; ++l)
        if (!in_tree_[l]) chords_.push_back(l);
}

inline std::vector<std::vector<double>> Network::incidence_matrix() const {
    std::vector<std::vector<double>> C(num_buses(), std::vector<double>(num_lines(), 0.0));
    for (int l = 0; l < num_lines(); ++l) {
        C[index_of(lines_[l].from)][l] = 1.0;
        C[index_of(lines_[l].to)][l] = -1.0;
    }
    return C;
}

inline std::vector<std::pair<int, int>> Network::fundamental_cycle(int chord) const {
    // Walk both chord endpoints up to their lowest common ancestor.
    int f = index_of(lines_[chord].from);
    int t = index_of(lines_[chord].to);
    std::vector<int> depth(num_buses(), 0);
    for (int j : bfs_order_)
        if (parent_bus_[j] >= 0) depth[j] = depth[parent_bus_[j]] + 1;

    std::vector<std::pair<int, int>> up_from, up_to;
    int a = f, b = t;
    while (depth[a] > depth[b]) {
        int l = parent_line_[a];
        // Traversing child -> parent: orientation +1 if the line points from the child.
        up_from.emplace_back(l, index_of(lines_[l].from) == a ? 1 : -1);
        a = parent_bus_[a];
    }
    while (depth[b] > depth[a]) {
        int l = parent_line_[b];
        up_to.emplace_back(l, index_of(lines_[l].from) == b ? 1 : -1);
        b = parent_bus_[b];
    }
    while (a != b) {
        int la = parent_line_[a];
        up_from.emplace_back(la, index_of(lines_[la].from) == a ? 1 : -1);
        a = parent_bus_[a];
        int lb = parent_line_[b];
        up_to.emplace_back(lb, index_of(lines_[lb].from) == b ? 1 : -1);
        b = parent_bus_[b];
    }

    // Cycle = chord (forward) + path head -> LCA -> tail of the chord.
    std::vector<std::pair<int, int>> cycle;
    cycle.emplace_back(chord, 1);
    for (auto [l, o] : up_to) cycle.emplace_back(l, o);
    for (auto it = up_from.rbegin(); it != up_from.rend(); ++it)
        cycle.emplace_back(it->first, -it->second);
    return cycle;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Per-line result of the angle condition Re(alpha) > 0 at both ends.
struct C2Report {
    struct LineCheck {
        int line = 0;
        double re_alpha_from = 0.0;
        double re_alpha_to = 0.0;
        bool ok = false;
    };
    std::vector<LineCheck> lines;
    bool all_ok = true;
};

inline C2Report check_c2(const Network& net) {
    C2Report rep;
    rep.lines.reserve(net.num_lines());
    for (int l = 0; l < net.num_lines(); ++l) {
        C2Report::LineCheck c;
        c.line = l;
        c.re_alpha_from = net.line(l).alpha_from().real();
        c.re_alpha_to = net.line(l).alpha_to().real();
        c.ok = c.re_alpha_from > 0.0 && c.re_alpha_to > 0.0;
        rep.lines.push_back(c);
        rep.all_ok = rep.all_ok && c.ok;
    }
    return rep;
}

/// Shunt-to-series admittance ratio of a directed end.
inline double shunt_ratio(const Network& net, int e) {
    return std::abs(net.end_shunt(e)) / std::abs(net.line(net.end_line(e)).y_series);
}

/// Lines whose shunt-to-series ratio exceeds `threshold` at either end.
/// Purely advisory: large ratios are unusual for distribution-scale lines.
inline std::vector<int> atypical_shunt_lines(const Network& net, double threshold = 1e-2) {
    std::vector<int> out;
    for (int l = 0; l < net.num_lines(); ++l) {
        double rf = shunt_ratio(net, net.end_of(l, true));
        double rt = shunt_ratio(net, net.end_of(l, false));
        if (rf > threshold || rt > threshold) out.push_back(l);
    }
    return out;
}

/// True when every line has r >= 0 and x >= 0 (series impedance in the
/// closed right half quadrant). Required by the tightening argument.
inline bool nonnegative_impedance(const Network& net) {
    for (const LineParams& l : net.lines()) {
        Complex z = l.z_series();
        if (z.real() < 0.0 || z.imag() < 0.0) return false;
    }
    return true;
}

}  // namespace shuntflow
