#include <doctest.h>

#include <numbers>

#include "powerdiv/case_io.hpp"
#include "powerdiv/power_flow.hpp"
#include "support.hpp"

using namespace powerdiv;

namespace {

// S_i = V_i sum_k conj(Y_ik V_k), one scalar at a time.
Eigen::VectorXcd scalar_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd s(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        Complex acc = 0.0;
        for (Eigen::Index k = 0; k < v.size(); ++k) acc += std::conj(y(i, k) * v(k));
        s(i) = v(i) * acc;
    }
    return s;
}

}  // namespace

TEST_CASE("Example 1 operating point") {
    const NetworkCase net = load_case(testing::fixture("example1.json"), CaseFormat::Native);
    SolverStats stats;
    const OperatingPoint op = solve_power_flow(net, {}, &stats);
    CHECK(stats.iterations > 0);
    CHECK(stats.max_mismatch <= 1e-8);
    CHECK(op.v_mag(0) == doctest::Approx(1.04).epsilon(1e-12));
    CHECK(op.v_mag(1) == doctest::Approx(1.025).epsilon(1e-12));
    CHECK(op.theta(0) == 0.0);
    CHECK(op.p(0) == doctest::Approx(1.59725).epsilon(1e-5));
    CHECK(op.p(1) == doctest::Approx(0.791).epsilon(1e-9));
    CHECK(op.p(2) == doctest::Approx(-2.35).epsilon(1e-9));
    CHECK(op.q(2) == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(op.p.sum() == doctest::Approx(0.03825).epsilon(1e-3));
}

TEST_CASE("solved states meet their schedules") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        auto [net, op] = testing::random_solved_case(rng, 10, {.bus_shunts = true, .taps = true});
        const Eigen::VectorXcd s = bus_injections(build_admittance(net), op);
        for (const Bus& b : net.buses()) {
            const Eigen::Index i = index_of(b.id);
            if (b.kind != BusKind::Slack) CHECK(std::abs(s(i).real() - b.p_sched) < 1e-8);
            if (b.kind == BusKind::PQ) CHECK(std::abs(s(i).imag() - b.q_sched) < 1e-8);
            if (b.kind != BusKind::PQ) CHECK(op.v_mag(i) == doctest::Approx(*b.v_setpoint).epsilon(1e-14));
            CHECK(std::abs(s(i).real() - op.p(i)) < 1e-12);
            CHECK(std::abs(s(i).imag() - op.q(i)) < 1e-12);
        }
        CHECK(op.theta(index_of(net.slack())) == 0.0);
    }
}

TEST_CASE("bus injections agree with a scalar loop") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const NetworkCase net = testing::random_case(rng, 10, {.bus_shunts = true, .taps = true});
        const AdmittanceMatrix y = build_admittance(net);
        const Eigen::VectorXcd v = testing::random_voltage(rng, y.size());
        const OperatingPoint op = operating_point_from_voltage(y, v);
        CHECK((op.voltage() - v).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((bus_injections(y, op) - scalar_injections(testing::stamp_admittance(net), v)).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("line current agrees with the branch matrix in both directions") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const NetworkCase net = testing::random_case(rng, 10, {.taps = true, .conductive_shunts = true});
        const AdmittanceMatrix y = build_admittance(net);
        const Eigen::VectorXcd v = testing::random_voltage(rng, y.size());
        const OperatingPoint op = operating_point_from_voltage(y, v);
        for (const LineKey key : net.line_keys()) {
            for (const LineKey k : {key, key.reversed()}) {
                const Complex i = testing::branch_current(net, v, k);
                CHECK(std::abs(line_current(net, op, k) - i) < 1e-12);
                const LineFlowRecord rec = line_complex_flow(net, op, k);
                CHECK(rec.line == k);
                CHECK(std::abs(rec.complex_flow - v(k.from - 1) * std::conj(i)) < 1e-12);
            }
        }
    }
}

TEST_CASE("current balance at every bus") {
    std::mt19937_64 rng(24);
    const NetworkCase net = testing::random_case(rng, 10, {.bus_shunts = true, .taps = true});
    const AdmittanceMatrix y = build_admittance(net);
    const Eigen::VectorXcd v = testing::random_voltage(rng, y.size());
    const OperatingPoint op = operating_point_from_voltage(y, v);
    const Eigen::VectorXcd injected = y.y * v;
    for (const Bus& b : net.buses()) {
        Complex out = b.shunt * v(b.id - 1);
        for (const LineKey key : net.line_keys()) {
            if (key.from == b.id) out += line_current(net, op, key);
            if (key.to == b.id) out += line_current(net, op, key.reversed());
        }
        CHECK(std::abs(out - injected(b.id - 1)) < 1e-12);
    }
}

TEST_CASE("no-load case stays at the flat start") {
    const NetworkCase net = load_case(testing::fixture("no_load.json"), CaseFormat::Native);
    SolverStats stats;
    const OperatingPoint op = solve_power_flow(net, {}, &stats);
    CHECK(stats.iterations == 0);
    CHECK(op.v_mag.isOnes());
    CHECK(op.theta.isZero());
    for (const LineKey key : net.line_keys()) CHECK(std::abs(line_complex_flow(net, op, key).complex_flow) == 0.0);
}

TEST_CASE("overloaded case does not converge") {
    Bus slack;
    slack.id = 1;
    slack.kind = BusKind::Slack;
    slack.v_setpoint = 1.0;
    Bus load;
    load.id = 2;
    load.p_sched = -30.0;
    LinePi l;
    l.from = 1;
    l.to = 2;
    l.series = 1.0 / Complex(0.05, 0.2);
    const NetworkCase net(100.0, {slack, load}, {l});
    try {
        solve_power_flow(net);
        FAIL("expected a convergence error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Convergence);
    }
}

TEST_CASE("iteration limit is honoured") {
    const NetworkCase net = load_case(testing::fixture("case14.json"), CaseFormat::Native);
    CHECK_THROWS_AS(solve_power_flow(net, {1e-8, 1}), Error);
    SolverStats stats;
    solve_power_flow(net, {}, &stats);
    CHECK(stats.iterations <= 10);
}

TEST_CASE("rotating every angle leaves flows unchanged") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 10; ++trial) {
        auto [net, op] = testing::random_solved_case(rng, 8, {.taps = true});
        const AdmittanceMatrix y = build_admittance(net);
        const OperatingPoint rotated = operating_point_from_voltage(y, op.voltage() * std::polar(1.0, 0.3));
        CHECK((rotated.p - op.p).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((rotated.q - op.q).cwiseAbs().maxCoeff() < 1e-12);
        for (const LineKey key : net.line_keys()) {
            CHECK(std::abs(line_complex_flow(net, rotated, key).complex_flow -
                           line_complex_flow(net, op, key).complex_flow) < 1e-12);
        }
    }
}

TEST_CASE("solver is deterministic") {
    const NetworkCase net = load_case(testing::fixture("case14.json"), CaseFormat::Native);
    const OperatingPoint a = solve_power_flow(net);
    const OperatingPoint b = solve_power_flow(net);
    CHECK(a.v_mag == b.v_mag);
    CHECK(a.theta == b.theta);
}
