#include "powerdiv/divider.hpp"

#include <cmath>

#include "powerdiv/error.hpp"

namespace powerdiv {

std::string_view to_string(Tier tier) {
    switch (tier) {
        case Tier::Exact: return "exact";
        case Tier::Lossless: return "lossless";
        case Tier::SmallAngle: return "small-angle";
        case Tier::UnityMag: return "unity";
        case Tier::Decoupled: return "decoupled";
    }
    return "exact";
}

AngleReference angle_reference(const OperatingPoint& op, BusId m) {
    if (m < 1 || m > op.size()) {
        throw Error(ErrorKind::Usage, "angle reference bus out of range");
    }
    AngleReference ref;
    ref.m = m;
    ref.theta_m_vec = Eigen::VectorXd::Constant(op.size(), op.theta(index_of(m))) - op.theta;
    ref.theta_m_vec(index_of(m)) = 0.0;
    return ref;
}

DividerCoefficients divider_coefficients(const OperatingPoint& op, const LineSensitivity& sens, Tier tier) {
    if (sens.alpha.size() != op.size()) {
        throw Error(ErrorKind::Usage, "sensitivity and operating point sizes differ");
    }
    const Eigen::ArrayXd theta_m = angle_reference(op, sens.line.from).theta_m_vec.array();
    const Eigen::ArrayXd inv_mag = op.v_mag.array().inverse();
    const Eigen::ArrayXd alpha = sens.alpha.array();
    const Eigen::ArrayXd beta = sens.beta.array();

    DividerCoefficients c;
    c.line = sens.line;
    c.tier = tier;
    switch (tier) {
        case Tier::Exact: {
            const Eigen::ArrayXd xi = theta_m.cos() * inv_mag;
            const Eigen::ArrayXd psi = theta_m.sin() * inv_mag;
            c.u = (xi * alpha + psi * beta).matrix();
            c.v = (psi * alpha - xi * beta).matrix();
            break;
        }
        case Tier::Lossless:
            c.u = (theta_m.cos() * inv_mag * alpha).matrix();
            c.v = (theta_m.sin() * inv_mag * alpha).matrix();
            break;
        case Tier::SmallAngle:
            c.u = (inv_mag * alpha).matrix();
            c.v = (theta_m * inv_mag * alpha).matrix();
            break;
        case Tier::UnityMag:
            c.u = sens.alpha;
            c.v = (theta_m * alpha).matrix();
            break;
        case Tier::Decoupled:
            c.u = sens.alpha;
            c.v = Eigen::VectorXd::Zero(op.size());
            break;
    }
    return c;
}

double flow_prefactor(const OperatingPoint& op, const DividerCoefficients& coeffs) {
    switch (coeffs.tier) {
        case Tier::Exact:
        case Tier::Lossless:
        case Tier::SmallAngle:
            return op.v_mag(index_of(coeffs.line.from));
        case Tier::UnityMag:
        case Tier::Decoupled:
            return 1.0;
    }
    return 1.0;
}

LineFlow line_flow_divider(const OperatingPoint& op, const DividerCoefficients& coeffs) {
    if (coeffs.u.size() != op.size() || coeffs.v.size() != op.size()) {
        throw Error(ErrorKind::Usage, "divider coefficients and operating point sizes differ");
    }
    const double k = flow_prefactor(op, coeffs);
    return {k * (coeffs.u.dot(op.p) - coeffs.v.dot(op.q)), k * (coeffs.u.dot(op.q) + coeffs.v.dot(op.p))};
}

DcSolution dc_power_flow(const NetworkCase& net, const Eigen::VectorXd& p) {
    const auto n = static_cast<Eigen::Index>(net.size());
    if (p.size() != n) {
        throw Error(ErrorKind::Usage, "injection vector has wrong length");
    }
    const NetworkCase dc = net.lossless_shunt_free();
    const Eigen::MatrixXd b = build_admittance(dc).b;
    const Eigen::Index s = index_of(net.slack());

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != s) keep.push_back(i);
    }
    const auto r = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd b_reduced(r, r);
    Eigen::VectorXd p_reduced(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        p_reduced(i) = p(keep[i]);
        for (Eigen::Index j = 0; j < r; ++j) b_reduced(i, j) = b(keep[i], keep[j]);
    }

    DcSolution sol;
    sol.slack = net.slack();
    if (r > 0) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(b_reduced);
        if (!lu.isInvertible()) {
            throw Error(ErrorKind::Singular, "reduced susceptance matrix is singular");
        }
        sol.theta_reduced = -lu.solve(p_reduced);
    } else {
        sol.theta_reduced = Eigen::VectorXd(0);
    }
    sol.theta = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < r; ++i) sol.theta(keep[i]) = sol.theta_reduced(i);

    sol.lines = dc.line_keys();
    sol.flows.resize(static_cast<Eigen::Index>(sol.lines.size()));
    for (std::size_t k = 0; k < sol.lines.size(); ++k) {
        const LineKey key = sol.lines[k];
        const double b_mn = dc.line(key).series.imag();
        sol.flows(static_cast<Eigen::Index>(k)) = -b_mn * (sol.theta(index_of(key.from)) - sol.theta(index_of(key.to)));
    }
    return sol;
}

double dc_flow_at_angles(const NetworkCase& net, const OperatingPoint& op, LineKey line) {
    const double b_mn = net.line(line).series_admittance().imag();
    return -b_mn * (op.theta(index_of(line.from)) - op.theta(index_of(line.to)));
}

double dc_flow_from_sensitivity(const NetworkCase& net, const Eigen::VectorXd& p, LineKey line) {
    if (p.size() != static_cast<Eigen::Index>(net.size())) {
        throw Error(ErrorKind::Usage, "injection vector has wrong length");
    }
    const NetworkCase dc = net.lossless_shunt_free();
    const Eigen::VectorXd alpha = lossless_sensitivity(dc, line).alpha;
    const Eigen::Index s = index_of(net.slack());
    double flow = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (i != s) flow += (alpha(i) - alpha(s)) * p(i);
    }
    return flow;
}

}  // namespace powerdiv
