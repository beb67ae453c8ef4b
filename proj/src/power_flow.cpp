#include "powerdiv/power_flow.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "powerdiv/error.hpp"

namespace powerdiv {

Eigen::VectorXcd OperatingPoint::voltage() const {
    Eigen::VectorXcd v(size());
    for (Eigen::Index i = 0; i < size(); ++i) {
        v(i) = std::polar(v_mag(i), theta(i));
    }
    return v;
}

OperatingPoint operating_point_from_voltage(const AdmittanceMatrix& y, const Eigen::VectorXcd& v) {
    const Eigen::VectorXcd s = v.cwiseProduct((y.y * v).conjugate());
    OperatingPoint op;
    op.v_mag = v.cwiseAbs();
    op.theta = v.unaryExpr([](const Complex& z) { return std::arg(z); }).real();
    op.p = s.real();
    op.q = s.imag();
    return op;
}

OperatingPoint solve_power_flow(const NetworkCase& net, const SolverOptions& options, SolverStats* stats) {
    const AdmittanceMatrix adm = build_admittance(net);
    const Eigen::MatrixXcd& y = adm.y;
    const auto n = static_cast<Eigen::Index>(net.size());

    // Unknowns: angles of every non-slack bus, magnitudes of every PQ bus.
    std::vector<Eigen::Index> angle_buses;
    std::vector<Eigen::Index> mag_buses;
    Eigen::VectorXd v_mag = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXcd s_sched(n);
    for (const Bus& bus : net.buses()) {
        const Eigen::Index i = index_of(bus.id);
        s_sched(i) = {bus.p_sched, bus.q_sched};
        if (bus.v_setpoint) v_mag(i) = *bus.v_setpoint;
        if (bus.kind != BusKind::Slack) angle_buses.push_back(i);
        if (bus.kind == BusKind::PQ) mag_buses.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(angle_buses.size());
    const auto nm = static_cast<Eigen::Index>(mag_buses.size());

    auto voltage = [&] {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(v_mag(i), theta(i));
        return v;
    };

    Eigen::VectorXd mismatch(na + nm);
    auto evaluate = [&](const Eigen::VectorXcd& v) {
        const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate()) - s_sched;
        for (Eigen::Index k = 0; k < na; ++k) mismatch(k) = s(angle_buses[k]).real();
        for (Eigen::Index k = 0; k < nm; ++k) mismatch(na + k) = s(mag_buses[k]).imag();
        return mismatch.size() == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
    };

    Eigen::VectorXcd v = voltage();
    double worst = evaluate(v);
    int iteration = 0;
    while (worst > options.tolerance) {
        if (iteration >= options.max_iterations) {
            throw Error(ErrorKind::Convergence, "power flow did not converge in " +
                                                    std::to_string(options.max_iterations) +
                                                    " iterations (mismatch " + std::to_string(worst) + ")");
        }
        ++iteration;

        // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V))
        // dS/d|V|   = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        const Eigen::VectorXcd current = y * v;
        const Eigen::VectorXcd unit = v.cwiseQuotient(v.cwiseAbs().cast<Complex>());
        Eigen::MatrixXcd ds_dtheta = -(y * v.asDiagonal().toDenseMatrix());
        ds_dtheta.diagonal() += current;
        ds_dtheta = (Complex{0.0, 1.0} * v).asDiagonal() * ds_dtheta.conjugate();
        Eigen::MatrixXcd ds_dvm = v.asDiagonal() * (y * unit.asDiagonal().toDenseMatrix()).conjugate();
        ds_dvm.diagonal() += current.conjugate().cwiseProduct(unit);

        Eigen::MatrixXd jac(na + nm, na + nm);
        for (Eigen::Index r = 0; r < na; ++r) {
            for (Eigen::Index c = 0; c < na; ++c) jac(r, c) = ds_dtheta(angle_buses[r], angle_buses[c]).real();
            for (Eigen::Index c = 0; c < nm; ++c) jac(r, na + c) = ds_dvm(angle_buses[r], mag_buses[c]).real();
        }
        for (Eigen::Index r = 0; r < nm; ++r) {
            for (Eigen::Index c = 0; c < na; ++c) jac(na + r, c) = ds_dtheta(mag_buses[r], angle_buses[c]).imag();
            for (Eigen::Index c = 0; c < nm; ++c) jac(na + r, na + c) = ds_dvm(mag_buses[r], mag_buses[c]).imag();
        }

        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        if (!(lu.rcond() > 1e-14)) {
            throw Error(ErrorKind::Convergence,
                        "power flow Jacobian is singular at iteration " + std::to_string(iteration));
        }
        const Eigen::VectorXd step = lu.solve(-mismatch);
        for (Eigen::Index k = 0; k < na; ++k) theta(angle_buses[k]) += step(k);
        for (Eigen::Index k = 0; k < nm; ++k) v_mag(mag_buses[k]) += step(na + k);
        if (!step.allFinite() || (v_mag.array() <= 0.0).any()) {
            throw Error(ErrorKind::Convergence,
                        "power flow diverged at iteration " + std::to_string(iteration));
        }
        v = voltage();
        worst = evaluate(v);
    }

    if (stats) {
        stats->iterations = iteration;
        stats->max_mismatch = worst;
    }
    OperatingPoint op = operating_point_from_voltage(adm, v);
    op.v_mag = v_mag;
    op.theta = theta;
    return op;
}

Eigen::VectorXcd bus_injections(const AdmittanceMatrix& y, const OperatingPoint& op) {
    if (y.size() != op.size()) {
        throw Error(ErrorKind::Usage, "admittance matrix and operating point sizes differ");
    }
    const Eigen::VectorXcd v = op.voltage();
    return v.cwiseProduct((y.y * v).conjugate());
}

Complex line_current(const NetworkCase& net, const OperatingPoint& op, LineKey key) {
    const LinePi& line = net.line(key);
    const Complex vm = std::polar(op.v_mag(index_of(key.from)), op.theta(index_of(key.from)));
    const Complex vn = std::polar(op.v_mag(index_of(key.to)), op.theta(index_of(key.to)));
    return line.series_admittance() * (vm - vn) + line.shunt_at(key.from) * vm;
}

LineFlowRecord line_complex_flow(const NetworkCase& net, const OperatingPoint& op, LineKey key) {
    const Complex current = line_current(net, op, key);
    const Complex vm = std::polar(op.v_mag(index_of(key.from)), op.theta(index_of(key.from)));
    return {key, current, vm * std::conj(current)};
}

}  // namespace powerdiv
