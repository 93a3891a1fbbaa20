#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace shuntflow;
using Catch::Approx;
namespace g2 = sftest::golden2;
namespace g3 = sftest::golden3;

TEST_CASE("bus admittance entries") {
    Network net = sftest::two_bus_network();
    Eigen::MatrixXcd Y = bus_admittance(net);
    Complex ys = 1.0 / Complex(0.05, 0.10);
    REQUIRE(std::abs(Y(0, 0) - (ys + Complex(0.0, 0.02))) < 1e-14);
    REQUIRE(std::abs(Y(1, 1) - (ys + Complex(0.0, 0.02))) < 1e-14);
    REQUIRE(std::abs(Y(0, 1) + ys) < 1e-14);
    REQUIRE(std::abs(Y(1, 0) + ys) < 1e-14);
}

TEST_CASE("two-bus power flow against reference values") {
    Network net = sftest::two_bus_network();
    PhasorSolution sol = solve_pf_newton(net, sftest::two_bus_load());
    int b2 = net.index_of(2);

    REQUIRE(sol.V[b2].real() == Approx(g2::V2_re).margin(1e-12));
    REQUIRE(sol.V[b2].imag() == Approx(g2::V2_im).margin(1e-12));
    REQUIRE(std::norm(sol.V[b2]) == Approx(g2::v2).margin(1e-12));
    REQUIRE(sol.V[net.slack_index()] == Complex(1.0, 0.0));

    REQUIRE(sol.I[0].real() == Approx(g2::I12_re).margin(1e-12));
    REQUIRE(sol.I[0].imag() == Approx(g2::I12_im).margin(1e-12));
    REQUIRE(sol.I[1].real() == Approx(g2::I21_re).margin(1e-12));
    REQUIRE(sol.I[1].imag() == Approx(g2::I21_im).margin(1e-12));

    // Sending power at the slack end and the slack injection coincide on a
    // two-bus network; receiving end sits exactly on the load.
    REQUIRE(sol.S[0].real() == Approx(g2::S12_re).margin(1e-12));
    REQUIRE(sol.S[0].imag() == Approx(g2::S12_im).margin(1e-12));
    REQUIRE(sol.s[net.slack_index()].real() == Approx(g2::S12_re).margin(1e-12));
    REQUIRE(sol.S[1].real() == Approx(-0.2).margin(1e-11));
    REQUIRE(sol.S[1].imag() == Approx(-0.1).margin(1e-11));

    REQUIRE(std::norm(sol.I[0]) == Approx(g2::ell12).margin(1e-12));
    REQUIRE(std::norm(sol.I[1]) == Approx(g2::ell21).margin(1e-12));

    REQUIRE(sol.iterations <= 6);
    REQUIRE(sol.max_mismatch <= 1e-10);

    SECTION("returned injections satisfy the equations to rounding") {
        auto r = bim_residual(net, sol.V, sol.s);
        for (Complex c : r) REQUIRE(std::abs(c) < 1e-14);
    }

    SECTION("requested injections are met within the solver tolerance") {
        auto r = bim_residual(net, sol.V, sftest::two_bus_load());
        REQUIRE(std::abs(r[b2]) < 1e-10);
    }

    SECTION("voltage product identity holds on the solution") {
        BranchQuantities bq = branch_quantities(net, sol.V);
        for (Complex c : bq.voltage_product_residual) REQUIRE(std::abs(c) < 1e-14);
    }
}

TEST_CASE("meshed triangle power flow against reference values") {
    Network net = sftest::triangle_network();
    PhasorSolution sol = solve_pf_newton(net, sftest::triangle_load());
    int b2 = net.index_of(2), b3 = net.index_of(3);
    REQUIRE(sol.V[b2].real() == Approx(g3::V2_re).margin(1e-12));
    REQUIRE(sol.V[b2].imag() == Approx(g3::V2_im).margin(1e-12));
    REQUIRE(sol.V[b3].real() == Approx(g3::V3_re).margin(1e-12));
    REQUIRE(sol.V[b3].imag() == Approx(g3::V3_im).margin(1e-12));
    REQUIRE(sol.s[net.slack_index()].real() == Approx(g3::s1_re).margin(1e-12));
    REQUIRE(sol.s[net.slack_index()].imag() == Approx(g3::s1_im).margin(1e-12));
}

TEST_CASE("Newton agrees with the injection-iteration oracle") {
    sftest::Rng rng(0x5eed0001);
    for (int rep = 0; rep < 8; ++rep) {
        sftest::RandomCase rc = rep % 2 == 0 ? sftest::random_radial(rng, 3, 20)
                                             : sftest::random_meshed(rng, 3, 12);
        PhasorSolution sol = solve_pf_newton(rc.net, rc.injections);
        std::vector<Complex> V_oracle = sftest::zbus_pf(rc.net, rc.injections);
        for (int j = 0; j < rc.net.num_buses(); ++j)
            REQUIRE(std::abs(sol.V[j] - V_oracle[j]) < 1e-10);
    }
}

TEST_CASE("injections balance against line losses") {
    sftest::Rng rng(0x5eed0002);
    for (int rep = 0; rep < 6; ++rep) {
        sftest::RandomCase rc = sftest::random_meshed(rng, 3, 15);
        const Network& net = rc.net;
        PhasorSolution sol = solve_pf_newton(net, rc.injections);
        Complex total(0.0, 0.0);
        for (Complex inj : sol.s) total += inj;
        Complex loss(0.0, 0.0);
        for (int l = 0; l < net.num_lines(); ++l) {
            int ef = net.end_of(l, true);
            int j = net.end_tail(ef), k = net.end_head(ef);
            Complex dv = sol.V[j] - sol.V[k];
            loss += std::norm(dv) * std::conj(net.line(l).y_series);
            loss += std::norm(sol.V[j]) * std::conj(net.end_shunt(ef));
            loss += std::norm(sol.V[k]) * std::conj(net.end_shunt(net.reverse_end(ef)));
        }
        REQUIRE(std::abs(total - loss) < 1e-9);
    }
}

TEST_CASE("power flow failure modes") {
    SECTION("unservable load") {
        Network net = sftest::two_bus_network(100.0, 100.0);
        try {
            solve_pf_newton(net, sftest::two_bus_load(100.0, 100.0));
            FAIL("expected NonConvergence");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::non_convergence);
        }
    }

    SECTION("iteration cap honored") {
        Network net = sftest::two_bus_network();
        NewtonOptions opt;
        opt.max_iter = 1;
        try {
            solve_pf_newton(net, sftest::two_bus_load(), opt);
            FAIL("expected NonConvergence");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::non_convergence);
        }
    }

    SECTION("warm start escapes a degenerate flat start") {
        // Pure reactance x = 0.1 and a bus-2 shunt of exactly half the
        // series susceptance zero out the determinant of the 2x2 polar
        // Jacobian at V = 1, theta = 0. The fixed-point warm start moves
        // off that point and reaches the high-voltage solution near 2 p.u.
        std::vector<Bus> buses(2);
        buses[0].id = 1;
        buses[1].id = 2;
        LineParams ln;
        ln.from = 1;
        ln.to = 2;
        ln.y_series = 1.0 / Complex(0.0, 0.1);
        ln.y_shunt_to = Complex(0.0, 5.0);
        Network net(buses, {ln}, 1);
        PhasorSolution sol = solve_pf_newton(net, {Complex(0.0, 0.0), Complex(-0.1, 0.0)});
        REQUIRE(sol.V[1].real() == Approx(1.9999499987499375).margin(1e-9));
        REQUIRE(sol.V[1].imag() == Approx(-0.01).margin(1e-9));
    }

    SECTION("singular Jacobian") {
        // Star feeder. The bus-2 shunt cancels its series susceptance, so the
        // load partition of the admittance matrix is singular and the warm
        // start falls back to the flat start; there the bus-3 shunt (half the
        // series susceptance) zeroes that bus's reactive Jacobian row.
        std::vector<Bus> buses(3);
        for (int j = 0; j < 3; ++j) buses[j].id = j + 1;
        auto mk = [](int to, double b_shunt) {
            LineParams ln;
            ln.from = 1;
            ln.to = to;
            ln.y_series = 1.0 / Complex(0.0, 0.1);
            ln.y_shunt_to = Complex(0.0, b_shunt);
            return ln;
        };
        Network net(buses, {mk(2, 10.0), mk(3, 5.0)}, 1);
        try {
            solve_pf_newton(net, {Complex(0.0, 0.0), Complex(-0.1, 0.0), Complex(-0.1, 0.0)});
            FAIL("expected SingularJacobian");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::singular_jacobian);
        }
    }

    SECTION("wrong injection vector length") {
        Network net = sftest::two_bus_network();
        REQUIRE_THROWS_AS(solve_pf_newton(net, {Complex(0.0, 0.0)}), Error);
    }
}
