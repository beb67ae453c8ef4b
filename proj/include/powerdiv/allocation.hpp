#pragma once

#include <vector>

#include <Eigen/Dense>

#include "powerdiv/divider.hpp"
#include "powerdiv/network.hpp"
#include "powerdiv/power_flow.hpp"
#include "powerdiv/sensitivity.hpp"

namespace powerdiv {

enum class AllocationTarget { ActiveFlow, ReactiveFlow, Loss };

/// Shares are fractions of the target (1.0 = 100%), signed. A negative share
/// is a counter-flow contribution.
struct BusShare {
    BusId bus = 0;
    double from_p = 0.0;
    double from_q = 0.0;
};

struct FlowAllocation {
    LineKey line;
    AllocationTarget target = AllocationTarget::ActiveFlow;
    double total = 0.0;  // the allocated quantity, p.u.
    std::vector<BusShare> per_bus;
};

/// Allocations are refused below this magnitude (p.u.).
inline constexpr double kAllocationThreshold = 1e-6;

/// Splits P_(m,n) or Q_(m,n) into the 2N per-bus terms of the divider law.
/// Throws Error{Refused} when |target| < kAllocationThreshold.
FlowAllocation allocate_flow(const OperatingPoint& op, const DividerCoefficients& coeffs, AllocationTarget which);

/// Series resistive loss Re{(V_m - V_n) y_mn^* (V_m - V_n)^*}; never negative.
double line_loss(const NetworkCase& net, const OperatingPoint& op, LineKey line);

/// True when both end shunts are purely imaginary, so L = P_(m,n) + P_(n,m).
bool loss_identity_applies(const NetworkCase& net, LineKey line);

/// L_(m,n) = (|V_m| u_mn + |V_n| u_nm)^T P - (|V_m| v_mn + |V_n| v_nm)^T Q split per bus.
/// Needs Exact coefficients for both orientations. Throws Error{Refused} when
/// L < kAllocationThreshold.
FlowAllocation allocate_loss(const OperatingPoint& op, const DividerCoefficients& coeffs_mn,
                             const DividerCoefficients& coeffs_nm);

/// (alpha_mn + alpha_nm)^T P.
double decoupled_loss(const LineSensitivity& sens_mn, const LineSensitivity& sens_nm, const Eigen::VectorXd& p);

}  // namespace powerdiv
