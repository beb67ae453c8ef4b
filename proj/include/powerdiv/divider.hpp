#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "powerdiv/network.hpp"
#include "powerdiv/power_flow.hpp"
#include "powerdiv/sensitivity.hpp"

namespace powerdiv {

/// Exact power-divider law and its approximation ladder.
///
///   Exact       u = Xi a + Psi b,        v = Psi a - Xi b
///   Lossless    u = Xi a,                v = Psi a
///   SmallAngle  u = diag(1/|V|) a,       v = diag(theta^m/|V|) a
///   UnityMag    u = a,                   v = diag(theta^m) a
///   Decoupled   u = a,                   v = 0
///
/// with Xi = diag(cos theta^m / |V|), Psi = diag(sin theta^m / |V|), a = alpha,
/// b = beta and theta^m = theta_m 1 - theta. The approximate tiers drop beta and
/// use alpha as supplied by the sensitivity record.
enum class Tier { Exact, Lossless, SmallAngle, UnityMag, Decoupled };

std::string_view to_string(Tier tier);

/// Angles re-referenced to bus m: theta^m = theta_m 1 - theta.
struct AngleReference {
    BusId m = 0;
    Eigen::VectorXd theta_m_vec;
};

AngleReference angle_reference(const OperatingPoint& op, BusId m);

struct DividerCoefficients {
    LineKey line;
    Eigen::VectorXd u;
    Eigen::VectorXd v;
    Tier tier = Tier::Exact;
};

/// Coefficients for line sens.line; the angle reference is its first endpoint.
DividerCoefficients divider_coefficients(const OperatingPoint& op, const LineSensitivity& sens, Tier tier);

/// Scalar in front of the divider sums: |V_m| for Exact, Lossless and SmallAngle;
/// 1 for UnityMag and Decoupled.
double flow_prefactor(const OperatingPoint& op, const DividerCoefficients& coeffs);

struct LineFlow {
    double p = 0.0;
    double q = 0.0;
};

/// P = k (u^T P - v^T Q), Q = k (u^T Q + v^T P) with k = flow_prefactor.
LineFlow line_flow_divider(const OperatingPoint& op, const DividerCoefficients& coeffs);

struct DcSolution {
    BusId slack = 0;
    Eigen::VectorXd theta_reduced;  // angles of the non-slack buses, slack at 0
    Eigen::VectorXd theta;          // full vector including the slack
    std::vector<LineKey> lines;     // case order, stored orientation
    Eigen::VectorXd flows;          // -b_mn (theta_m - theta_n)
};

/// Classical DC power flow on the lossless, shunt-free copy of the case:
/// theta~ = -B~^-1 P~ with the slack row and column removed. The slack entry of
/// `p` is ignored (it is implied by balance). Throws Error{Singular} if B~ is.
DcSolution dc_power_flow(const NetworkCase& net, const Eigen::VectorXd& p);

/// -b_mn (theta_m - theta_n) evaluated at the angles of `op`.
double dc_flow_at_angles(const NetworkCase& net, const OperatingPoint& op, LineKey line);

/// The same DC flow built from pseudoinverse sensitivities of the lossless,
/// shunt-free network: (alpha~^T - alpha_s 1^T) P~, s the slack bus.
double dc_flow_from_sensitivity(const NetworkCase& net, const Eigen::VectorXd& p, LineKey line);

}  // namespace powerdiv
