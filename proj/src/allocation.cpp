#include "powerdiv/allocation.hpp"

#include <cmath>
#include <sstream>

#include "powerdiv/error.hpp"

namespace powerdiv {

namespace {

void refuse_if_small(double total, const char* what, LineKey line) {
    if (!(std::abs(total) >= kAllocationThreshold)) {
        std::ostringstream msg;
        msg << what << " on line (" << line.from << "," << line.to << ") is " << total
            << " p.u., below the allocation threshold " << kAllocationThreshold;
        throw Error(ErrorKind::Refused, msg.str());
    }
}

}  // namespace

FlowAllocation allocate_flow(const OperatingPoint& op, const DividerCoefficients& coeffs, AllocationTarget which) {
    if (which == AllocationTarget::Loss) {
        throw Error(ErrorKind::Usage, "use allocate_loss for loss allocation");
    }
    const LineFlow flow = line_flow_divider(op, coeffs);
    const double k = flow_prefactor(op, coeffs);
    FlowAllocation out;
    out.line = coeffs.line;
    out.target = which;
    out.total = which == AllocationTarget::ActiveFlow ? flow.p : flow.q;
    refuse_if_small(out.total, which == AllocationTarget::ActiveFlow ? "active flow" : "reactive flow", coeffs.line);

    out.per_bus.reserve(static_cast<std::size_t>(op.size()));
    for (Eigen::Index i = 0; i < op.size(); ++i) {
        BusShare share;
        share.bus = static_cast<BusId>(i + 1);
        if (which == AllocationTarget::ActiveFlow) {
            share.from_p = k * coeffs.u(i) * op.p(i) / out.total;
            share.from_q = -k * coeffs.v(i) * op.q(i) / out.total;
        } else {
            share.from_p = k * coeffs.v(i) * op.p(i) / out.total;
            share.from_q = k * coeffs.u(i) * op.q(i) / out.total;
        }
        out.per_bus.push_back(share);
    }
    return out;
}

double line_loss(const NetworkCase& net, const OperatingPoint& op, LineKey line) {
    const Complex y = net.line(line).series_admittance();
    const Complex vm = std::polar(op.v_mag(index_of(line.from)), op.theta(index_of(line.from)));
    const Complex vn = std::polar(op.v_mag(index_of(line.to)), op.theta(index_of(line.to)));
    const Complex dv = vm - vn;
    return (dv * std::conj(y) * std::conj(dv)).real();
}

bool loss_identity_applies(const NetworkCase& net, LineKey line) {
    const LinePi& pi = net.line(line);
    return pi.shunt_at(pi.from).real() == 0.0 && pi.shunt_at(pi.to).real() == 0.0;
}

FlowAllocation allocate_loss(const OperatingPoint& op, const DividerCoefficients& coeffs_mn,
                             const DividerCoefficients& coeffs_nm) {
    if (coeffs_mn.tier != Tier::Exact || coeffs_nm.tier != Tier::Exact) {
        throw Error(ErrorKind::Usage, "loss allocation needs exact divider coefficients");
    }
    if (coeffs_nm.line != coeffs_mn.line.reversed()) {
        throw Error(ErrorKind::Usage, "loss allocation needs coefficients for both orientations of one line");
    }
    const double vm = op.v_mag(index_of(coeffs_mn.line.from));
    const double vn = op.v_mag(index_of(coeffs_mn.line.to));
    const Eigen::VectorXd cu = vm * coeffs_mn.u + vn * coeffs_nm.u;
    const Eigen::VectorXd cv = vm * coeffs_mn.v + vn * coeffs_nm.v;

    FlowAllocation out;
    out.line = coeffs_mn.line;
    out.target = AllocationTarget::Loss;
    out.total = cu.dot(op.p) - cv.dot(op.q);
    refuse_if_small(out.total, "loss", coeffs_mn.line);

    out.per_bus.reserve(static_cast<std::size_t>(op.size()));
    for (Eigen::Index i = 0; i < op.size(); ++i) {
        out.per_bus.push_back({static_cast<BusId>(i + 1), cu(i) * op.p(i) / out.total, -cv(i) * op.q(i) / out.total});
    }
    return out;
}

double decoupled_loss(const LineSensitivity& sens_mn, const LineSensitivity& sens_nm, const Eigen::VectorXd& p) {
    if (sens_mn.alpha.size() != p.size() || sens_nm.alpha.size() != p.size()) {
        throw Error(ErrorKind::Usage, "sensitivity and injection sizes differ");
    }
    return (sens_mn.alpha + sens_nm.alpha).dot(p);
}

}  // namespace powerdiv
