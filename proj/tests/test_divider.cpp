#include <doctest.h>

#include "powerdiv/case_io.hpp"
#include "powerdiv/divider.hpp"
#include "powerdiv/report.hpp"
#include "support.hpp"

using namespace powerdiv;

namespace {

constexpr Tier kTiers[] = {Tier::Exact, Tier::Lossless, Tier::SmallAngle, Tier::UnityMag, Tier::Decoupled};

// Reduced DC power flow with B built from an explicit loop over lines.
Eigen::VectorXd dc_oracle(const NetworkCase& net, const Eigen::VectorXd& p) {
    const auto n = static_cast<Eigen::Index>(net.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const LinePi& l : net.lines()) {
        const double bmn = l.series_admittance().imag();
        const Eigen::Index f = l.from - 1;
        const Eigen::Index t = l.to - 1;
        b(f, f) += bmn;
        b(t, t) += bmn;
        b(f, t) -= bmn;
        b(t, f) -= bmn;
    }
    const Eigen::Index s = net.slack() - 1;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != s) keep.push_back(i);
    }
    const auto r = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd br(r, r);
    Eigen::VectorXd pr(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        pr(i) = p(keep[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < r; ++j) br(i, j) = b(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
    }
    const Eigen::VectorXd th = -br.colPivHouseholderQr().solve(pr);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < r; ++i) theta(keep[static_cast<std::size_t>(i)]) = th(i);
    return theta;
}

}  // namespace

TEST_CASE("exact divider equals the direct flow on random cases") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        auto [net, op] = testing::random_solved_case(rng, 10, {.bus_shunts = trial % 2 == 0, .taps = trial % 3 == 0});
        const AdmittanceMatrix y = build_admittance(net);
        for (const LineKey key : net.line_keys()) {
            for (const LineKey k : {key, key.reversed()}) {
                const DividerCoefficients c = divider_coefficients(op, line_sensitivity(net, y, k), Tier::Exact);
                const LineFlow f = line_flow_divider(op, c);
                const Complex s = line_complex_flow(net, op, k).complex_flow;
                CHECK(std::abs(f.p - s.real()) < 1e-9);
                CHECK(std::abs(f.q - s.imag()) < 1e-9);
            }
        }
    }
}

TEST_CASE("exact divider also holds off the solved state") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const NetworkCase net = testing::random_case(rng, 8, {.taps = true});
        const AdmittanceMatrix y = build_admittance(net);
        const OperatingPoint op = operating_point_from_voltage(y, testing::random_voltage(rng, y.size()));
        for (const LineKey key : net.line_keys()) {
            const LineFlow f = line_flow_divider(op, divider_coefficients(op, line_sensitivity(net, y, key), Tier::Exact));
            const Complex s = line_complex_flow(net, op, key).complex_flow;
            CHECK(std::abs(Complex(f.p, f.q) - s) < 1e-9);
        }
    }
}

TEST_CASE("angle reference") {
    OperatingPoint op;
    op.v_mag = Eigen::Vector3d(1.0, 1.0, 1.0);
    op.theta = Eigen::Vector3d(0.0, -0.1, -0.25);
    const AngleReference r = angle_reference(op, 2);
    CHECK(r.m == 2);
    CHECK(r.theta_m_vec(0) == doctest::Approx(-0.1));
    CHECK(r.theta_m_vec(1) == 0.0);
    CHECK(r.theta_m_vec(2) == doctest::Approx(0.15));
}

TEST_CASE("tier coefficient formulas") {
    std::mt19937_64 rng(43);
    auto [net, op] = testing::random_solved_case(rng, 8);
    const AdmittanceMatrix y = build_admittance(net);
    const LineKey key = net.line_keys().front();
    const LineSensitivity s = line_sensitivity(net, y, key);
    const Eigen::VectorXd tm = op.theta(key.from - 1) - op.theta.array();
    const Eigen::ArrayXd inv_v = op.v_mag.array().inverse();

    const auto exact = divider_coefficients(op, s, Tier::Exact);
    CHECK(exact.u.isApprox((tm.array().cos() * inv_v * s.alpha.array() + tm.array().sin() * inv_v * s.beta.array()).matrix(), 1e-14));
    CHECK(exact.v.isApprox((tm.array().sin() * inv_v * s.alpha.array() - tm.array().cos() * inv_v * s.beta.array()).matrix(), 1e-14));

    const auto ll = divider_coefficients(op, s, Tier::Lossless);
    CHECK(ll.u.isApprox((tm.array().cos() * inv_v * s.alpha.array()).matrix(), 1e-14));
    CHECK(ll.v.isApprox((tm.array().sin() * inv_v * s.alpha.array()).matrix(), 1e-14));

    const auto sa = divider_coefficients(op, s, Tier::SmallAngle);
    CHECK(sa.u.isApprox((inv_v * s.alpha.array()).matrix(), 1e-14));
    CHECK((sa.v - (tm.array() * inv_v * s.alpha.array()).matrix()).norm() < 1e-14);

    const auto un = divider_coefficients(op, s, Tier::UnityMag);
    CHECK(un.u == s.alpha);
    CHECK((un.v - (tm.array() * s.alpha.array()).matrix()).norm() < 1e-14);

    const auto dc = divider_coefficients(op, s, Tier::Decoupled);
    CHECK(dc.u == s.alpha);
    CHECK(dc.v.isZero());

    CHECK(flow_prefactor(op, exact) == op.v_mag(key.from - 1));
    CHECK(flow_prefactor(op, sa) == op.v_mag(key.from - 1));
    CHECK(flow_prefactor(op, un) == 1.0);
    CHECK(flow_prefactor(op, dc) == 1.0);
}

TEST_CASE("flat profile collapses the approximate tiers") {
    const NetworkCase net = load_case(testing::fixture("example1.json"), CaseFormat::Native);
    const AdmittanceMatrix y = build_admittance(net);
    OperatingPoint op = operating_point_from_voltage(y, Eigen::VectorXcd::Ones(3));
    op.p = Eigen::Vector3d(1.0, 0.5, -1.5);
    op.q = Eigen::Vector3d(0.2, 0.1, -0.3);
    for (const LineKey key : net.line_keys()) {
        const LineSensitivity s = line_sensitivity(net, y, key);
        const LineFlow ref = line_flow_divider(op, divider_coefficients(op, s, Tier::Decoupled));
        for (Tier t : {Tier::Lossless, Tier::SmallAngle, Tier::UnityMag}) {
            const LineFlow f = line_flow_divider(op, divider_coefficients(op, s, t));
            CHECK(std::abs(f.p - ref.p) < 1e-14);
            CHECK(std::abs(f.q - ref.q) < 1e-14);
        }
    }
}

TEST_CASE("Example 1 flow ladder") {
    const NetworkCase net = load_case(testing::fixture("example1.json"), CaseFormat::Native);
    const OperatingPoint op = solve_power_flow(net);
    const AdmittanceMatrix y = build_admittance(net);
    struct Row {
        LineKey key;
        double p[4];
        double q[4];
        double dc;
    };
    const Row rows[] = {
        {{1, 2}, {0.05325, 0.05152, 0.04613, 0.07527}, {0.08213, 0.0894, 0.088, 0.09648}, 0.0300},
        {{2, 3}, {0.84394, 0.8425, 0.84309, 0.84665}, {-0.01225, -0.0061, -0.00594, -0.0051}, 0.8004},
        {{1, 3}, {1.5440, 1.54573, 1.55112, 1.52198}, {0.36991, 0.36263, 0.36403, 0.35556}, 1.4335},
    };
    for (const Row& r : rows) {
        const LineSensitivity s = line_sensitivity(net, y, r.key);
        for (int t = 0; t < 4; ++t) {
            const LineFlow f = line_flow_divider(op, divider_coefficients(op, s, kTiers[t]));
            CHECK(std::abs(f.p - r.p[t]) < 1e-4);
            CHECK(std::abs(f.q - r.q[t]) < 1e-4);
        }
        CHECK(std::abs(dc_flow_at_angles(net, op, r.key) - r.dc) < 1e-4);
    }
}

TEST_CASE("DC power flow against an explicit reduced solve") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 30; ++trial) {
        const NetworkCase net = testing::random_case(rng, 10, {.bus_shunts = true, .taps = true});
        Eigen::VectorXd p = Eigen::VectorXd::Random(static_cast<Eigen::Index>(net.size()));
        const DcSolution dc = dc_power_flow(net, p);
        const Eigen::VectorXd theta = dc_oracle(net, p);
        CHECK((dc.theta - theta).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(dc.theta(net.slack() - 1) == 0.0);
        CHECK(dc.theta_reduced.size() == static_cast<Eigen::Index>(net.size()) - 1);
        CHECK(dc.slack == net.slack());
        REQUIRE(dc.lines == net.line_keys());

        Eigen::VectorXd balance = Eigen::VectorXd::Zero(p.size());
        for (std::size_t i = 0; i < dc.lines.size(); ++i) {
            const LineKey k = dc.lines[i];
            const double bmn = net.lossless_shunt_free().line(k).series.imag();
            const double f = dc.flows(static_cast<Eigen::Index>(i));
            CHECK(std::abs(f + bmn * (theta(k.from - 1) - theta(k.to - 1))) < 1e-9);
            balance(k.from - 1) += f;
            balance(k.to - 1) -= f;
        }
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            if (i != net.slack() - 1) CHECK(std::abs(balance(i) - p(i)) < 1e-9);
        }

        // alpha-chain route
        for (std::size_t i = 0; i < dc.lines.size(); ++i) {
            CHECK(std::abs(dc_flow_from_sensitivity(net, p, dc.lines[i]) - dc.flows(static_cast<Eigen::Index>(i))) <
                  1e-9);
        }

        // slack entry is ignored
        Eigen::VectorXd p2 = p;
        p2(net.slack() - 1) += 3.0;
        CHECK((dc_power_flow(net, p2).flows - dc.flows).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("DC reference flows for Example 1") {
    const NetworkCase net = load_case(testing::fixture("example1.json"), CaseFormat::Native);
    const OperatingPoint op = solve_power_flow(net);
    const DcSolution dc = dc_power_flow(net, op.p);
    CHECK(dc.flows(0) == doctest::Approx(0.04612).epsilon(1e-3));
    CHECK(dc.flows(1) == doctest::Approx(0.83712).epsilon(1e-4));
    CHECK(dc.flows(2) == doctest::Approx(1.51288).epsilon(1e-4));
}

TEST_CASE("exact flow is independent of the angle reference") {
    std::mt19937_64 rng(45);
    auto [net, op] = testing::random_solved_case(rng, 9, {.taps = true});
    const AdmittanceMatrix y = build_admittance(net);
    const OperatingPoint shifted = operating_point_from_voltage(y, op.voltage() * std::polar(1.0, -0.7));
    for (const LineKey key : net.line_keys()) {
        const LineSensitivity s = line_sensitivity(net, y, key);
        for (Tier t : kTiers) {
            const LineFlow a = line_flow_divider(op, divider_coefficients(op, s, t));
            const LineFlow b = line_flow_divider(shifted, divider_coefficients(shifted, s, t));
            CHECK(std::abs(a.p - b.p) < 1e-10);
            CHECK(std::abs(a.q - b.q) < 1e-10);
        }
    }
}

TEST_CASE("approximation report") {
    const NetworkCase net = load_case(testing::fixture("example1.json"), CaseFormat::Native);
    const OperatingPoint op = solve_power_flow(net);
    const std::vector<FlowModel> models{FlowModel::Lossless, FlowModel::Dc};
    const ApproximationReport rep = approximation_report(net, op, models);
    REQUIRE(rep.rows.size() == 3);
    for (const ReportRow& row : rep.rows) {
        const Complex s = line_complex_flow(net, op, row.line).complex_flow;
        CHECK(std::abs(row.exact_p - s.real()) < 1e-9);
        CHECK(std::abs(row.exact_q - s.imag()) < 1e-9);
        REQUIRE(row.models.size() == 2);
        CHECK(row.models[0].q.has_value());
        CHECK_FALSE(row.models[1].q.has_value());
        CHECK(row.models[1].p == dc_flow_at_angles(net, op, row.line));
        CHECK(row.models[0].abs_err_p == std::abs(row.models[0].p - row.exact_p));
    }
    CHECK(injection_power_factor(op, 3) == doctest::Approx(2.35 / std::hypot(2.35, 0.5)));
    CHECK(flow_model_from("small-angle") == FlowModel::SmallAngle);
    CHECK_FALSE(flow_model_from("bogus").has_value());
}

TEST_CASE("decoupled tier on the 14-bus case where both end injections are near unity power factor") {
    const NetworkCase net = load_case(testing::fixture("case14.json"), CaseFormat::Native);
    const OperatingPoint op = solve_power_flow(net);
    const std::vector<FlowModel> models{FlowModel::Decoupled};
    const ApproximationReport rep = approximation_report(net, op, models);
    int qualifying = 0;
    for (const ReportRow& row : rep.rows) {
        if (row.pf_from > 0.95 && row.pf_to > 0.95) {
            ++qualifying;
            CHECK(row.models[0].rel_err_p < 0.10);
        }
    }
    CHECK(qualifying == 3);
}

TEST_CASE("Example 1 lossless tier beats DC on active flow") {
    const NetworkCase net = load_case(testing::fixture("example1.json"), CaseFormat::Native);
    const OperatingPoint op = solve_power_flow(net);
    const std::vector<FlowModel> models{FlowModel::Exact, FlowModel::Lossless, FlowModel::Dc};
    for (const ReportRow& row : approximation_report(net, op, models).rows) {
        CHECK(row.models[0].abs_err_p == 0.0);
        CHECK(*row.models[0].abs_err_q == 0.0);
        CHECK(row.models[1].abs_err_p <= row.models[2].abs_err_p);
    }
}

TEST_CASE("decoupled reactive flow is alpha^T Q") {
    const NetworkCase net = load_case(testing::fixture("case14.json"), CaseFormat::Native);
    const OperatingPoint op = solve_power_flow(net);
    const AdmittanceMatrix y = build_admittance(net);
    for (const LineKey key : net.line_keys()) {
        const LineSensitivity s = line_sensitivity(net, y, key);
        const LineFlow f = line_flow_divider(op, divider_coefficients(op, s, Tier::Decoupled));
        CHECK(f.q == s.alpha.dot(op.q));
        CHECK(f.p == s.alpha.dot(op.p));
    }
}
