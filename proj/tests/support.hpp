#pragma once

#include <complex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "powerdiv/error.hpp"
#include "powerdiv/network.hpp"
#include "powerdiv/power_flow.hpp"

namespace testing {

using powerdiv::Complex;

inline std::string fixture(const std::string& name) { return std::string(POWERDIV_SOURCE_DIR) + "/fixtures/" + name; }
inline std::string golden(const std::string& name) { return std::string(POWERDIV_SOURCE_DIR) + "/tests/golden/" + name; }

struct RandomCaseOptions {
    bool line_shunts = true;
    bool bus_shunts = false;
    bool taps = false;
    bool conductive_shunts = false;
};

/// Connected case with 2..max_buses buses: a random spanning tree plus a few
/// extra lines, moderate loading, one slack, some PV buses.
inline powerdiv::NetworkCase random_case(std::mt19937_64& rng, int max_buses, RandomCaseOptions opt = {}) {
    std::uniform_int_distribution<int> size_dist(2, max_buses);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int n = size_dist(rng);

    std::vector<powerdiv::Bus> buses;
    for (int i = 0; i < n; ++i) {
        powerdiv::Bus b;
        b.id = 100 + 3 * i;  // non-contiguous external numbering
        b.kind = i == 0 ? powerdiv::BusKind::Slack : (u01(rng) < 0.3 ? powerdiv::BusKind::PV : powerdiv::BusKind::PQ);
        b.p_sched = -0.6 + 1.0 * u01(rng);
        b.q_sched = -0.3 + 0.4 * u01(rng);
        if (b.kind != powerdiv::BusKind::PQ) b.v_setpoint = 0.98 + 0.07 * u01(rng);
        if (opt.bus_shunts && u01(rng) < 0.5) b.shunt = {0.0, 0.05 * u01(rng)};
        buses.push_back(b);
    }

    auto make_line = [&](int a, int c) {
        powerdiv::LinePi l;
        l.from = buses[static_cast<std::size_t>(a)].id;
        l.to = buses[static_cast<std::size_t>(c)].id;
        const double x = 0.03 + 0.15 * u01(rng);
        const double r = x * (0.05 + 0.4 * u01(rng));
        l.series = 1.0 / Complex(r, x);
        if (opt.line_shunts) l.end_shunt = {opt.conductive_shunts ? 0.01 * u01(rng) : 0.0, 0.04 * u01(rng)};
        if (opt.taps && u01(rng) < 0.3) l.tap = 0.93 + 0.12 * u01(rng);
        return l;
    };

    std::vector<powerdiv::LinePi> lines;
    std::vector<std::vector<bool>> used(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
    for (int i = 1; i < n; ++i) {
        const int j = std::uniform_int_distribution<int>(0, i - 1)(rng);
        lines.push_back(make_line(j, i));
        used[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
        used[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = true;
    }
    const int extra = std::uniform_int_distribution<int>(0, n)(rng);
    for (int k = 0; k < extra; ++k) {
        const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
        const int c = std::uniform_int_distribution<int>(0, n - 1)(rng);
        if (a == c || used[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)]) continue;
        used[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] = true;
        used[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)] = true;
        lines.push_back(make_line(a, c));
    }
    return powerdiv::NetworkCase(100.0, std::move(buses), std::move(lines));
}

/// random_case that the Newton solver can handle, with its solution.
inline std::pair<powerdiv::NetworkCase, powerdiv::OperatingPoint> random_solved_case(std::mt19937_64& rng,
                                                                                     int max_buses,
                                                                                     RandomCaseOptions opt = {}) {
    for (;;) {
        powerdiv::NetworkCase net = random_case(rng, max_buses, opt);
        try {
            powerdiv::OperatingPoint op = powerdiv::solve_power_flow(net);
            return {std::move(net), std::move(op)};
        } catch (const powerdiv::Error&) {
        }
    }
}

/// 2x2 branch admittance of an ideal transformer (ratio tap at `from`) in series
/// with a Pi line: [I_f; I_t] = [[yff, yft], [ytf, ytt]] [V_f; V_t].
struct BranchMatrix {
    Complex yff, yft, ytf, ytt;
};

inline BranchMatrix branch_matrix(const powerdiv::LinePi& l) {
    const Complex y = l.series;
    const Complex ysh = l.end_shunt;
    return {(y + ysh) / (l.tap * l.tap), -y / l.tap, -y / l.tap, y + ysh};
}

/// Y built entry by entry from the branch matrices.
inline Eigen::MatrixXcd stamp_admittance(const powerdiv::NetworkCase& net) {
    const auto n = static_cast<Eigen::Index>(net.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const powerdiv::Bus& b : net.buses()) y(b.id - 1, b.id - 1) += b.shunt;
    for (const powerdiv::LinePi& l : net.lines()) {
        const BranchMatrix m = branch_matrix(l);
        const Eigen::Index f = l.from - 1;
        const Eigen::Index t = l.to - 1;
        y(f, f) += m.yff;
        y(f, t) += m.yft;
        y(t, f) += m.ytf;
        y(t, t) += m.ytt;
    }
    return y;
}

/// Current entering the branch at key.from, computed from the branch matrix.
inline Complex branch_current(const powerdiv::NetworkCase& net, const Eigen::VectorXcd& v, powerdiv::LineKey key) {
    const powerdiv::LinePi& l = net.line(key);
    const BranchMatrix m = branch_matrix(l);
    const Complex vf = v(l.from - 1);
    const Complex vt = v(l.to - 1);
    return key.from == l.from ? m.yff * vf + m.yft * vt : m.ytf * vf + m.ytt * vt;
}

inline Eigen::VectorXcd random_voltage(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> mag(0.9, 1.1);
    std::uniform_real_distribution<double> ang(-0.5, 0.5);
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(mag(rng), ang(rng));
    return v;
}

/// min ||A P - b|| s.t. 1^T P = total by eliminating the constraint:
/// P = (total/N) 1 + Z w with Z an orthonormal basis of the complement of 1.
inline Eigen::VectorXd elimination_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double total) {
    const Eigen::Index n = a.cols();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd z = q.rightCols(n - 1);
    const Eigen::VectorXd p0 = ones * (total / static_cast<double>(n));
    const Eigen::VectorXd w = (a * z).completeOrthogonalDecomposition().solve(b - a * p0);
    return p0 + z * w;
}

}  // namespace testing
