#pragma once

#include <Eigen/Dense>

#include "powerdiv/network.hpp"

namespace powerdiv {

/// Solved voltage profile together with the injections it implies.
struct OperatingPoint {
    Eigen::VectorXd v_mag;
    Eigen::VectorXd theta;  // radians
    Eigen::VectorXd p;
    Eigen::VectorXd q;

    Eigen::Index size() const { return v_mag.size(); }
    Eigen::VectorXcd voltage() const;
};

/// Builds an operating point from a voltage profile, with P + jQ = diag(V)(YV)*.
OperatingPoint operating_point_from_voltage(const AdmittanceMatrix& y, const Eigen::VectorXcd& v);

struct SolverOptions {
    double tolerance = 1e-8;  // max |mismatch| in per-unit
    int max_iterations = 50;
};

struct SolverStats {
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Full Newton-Raphson in polar coordinates from a flat start. Slack angle is 0,
/// PV buses hold their setpoints, generator reactive limits are not enforced.
/// Throws Error{Convergence} on divergence or a singular Jacobian.
OperatingPoint solve_power_flow(const NetworkCase& net, const SolverOptions& options = {},
                                SolverStats* stats = nullptr);

/// S = diag(V) (Y V)*.
Eigen::VectorXcd bus_injections(const AdmittanceMatrix& y, const OperatingPoint& op);

struct LineFlowRecord {
    LineKey line;
    Complex current;       // I_(m,n), leaving bus m into the line
    Complex complex_flow;  // S_(m,n) = V_m conj(I_(m,n))
};

/// Current entering line (m,n) at bus m: y_mn (V_m - V_n) + y_mn^sh V_m, with the
/// end shunt taken at the m end. Orientation matters when the line has shunts.
Complex line_current(const NetworkCase& net, const OperatingPoint& op, LineKey line);

LineFlowRecord line_complex_flow(const NetworkCase& net, const OperatingPoint& op, LineKey line);

}  // namespace powerdiv
