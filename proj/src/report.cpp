#include "powerdiv/report.hpp"

#include <cmath>
#include <limits>

#include "powerdiv/sensitivity.hpp"

namespace powerdiv {

std::string_view to_string(FlowModel model) {
    switch (model) {
        case FlowModel::Exact: return "exact";
        case FlowModel::Lossless: return "lossless";
        case FlowModel::SmallAngle: return "small-angle";
        case FlowModel::UnityMag: return "unity";
        case FlowModel::Decoupled: return "decoupled";
        case FlowModel::Dc: return "dc";
    }
    return "exact";
}

std::optional<FlowModel> flow_model_from(std::string_view name) {
    for (FlowModel m : {FlowModel::Exact, FlowModel::Lossless, FlowModel::SmallAngle, FlowModel::UnityMag,
                        FlowModel::Decoupled, FlowModel::Dc}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

double injection_power_factor(const OperatingPoint& op, BusId bus) {
    const Eigen::Index i = index_of(bus);
    const double s = std::hypot(op.p(i), op.q(i));
    return s == 0.0 ? 0.0 : std::abs(op.p(i)) / s;
}

namespace {

Tier tier_of(FlowModel model) {
    switch (model) {
        case FlowModel::Lossless: return Tier::Lossless;
        case FlowModel::SmallAngle: return Tier::SmallAngle;
        case FlowModel::UnityMag: return Tier::UnityMag;
        case FlowModel::Decoupled: return Tier::Decoupled;
        default: return Tier::Exact;
    }
}

double relative(double err, double exact) {
    return exact == 0.0 ? std::numeric_limits<double>::quiet_NaN() : err / std::abs(exact);
}

}  // namespace

ApproximationReport approximation_report(const NetworkCase& net, const OperatingPoint& op,
                                         std::span<const FlowModel> models) {
    ApproximationReport report;
    report.models.assign(models.begin(), models.end());
    const SensitivityCache cache(net, build_admittance(net));
    for (const LineKey key : net.line_keys()) {
        const LineSensitivity& sens = *cache.get(key);
        const LineFlow exact = line_flow_divider(op, divider_coefficients(op, sens, Tier::Exact));
        ReportRow row;
        row.line = key;
        row.exact_p = exact.p;
        row.exact_q = exact.q;
        row.pf_from = injection_power_factor(op, key.from);
        row.pf_to = injection_power_factor(op, key.to);
        for (FlowModel model : models) {
            ModelFlow mf;
            mf.model = model;
            if (model == FlowModel::Dc) {
                mf.p = dc_flow_at_angles(net, op, key);
            } else {
                const LineFlow flow = line_flow_divider(op, divider_coefficients(op, sens, tier_of(model)));
                mf.p = flow.p;
                mf.q = flow.q;
                mf.abs_err_q = std::abs(flow.q - exact.q);
                mf.rel_err_q = relative(*mf.abs_err_q, exact.q);
            }
            mf.abs_err_p = std::abs(mf.p - exact.p);
            mf.rel_err_p = relative(mf.abs_err_p, exact.p);
            row.models.push_back(mf);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace powerdiv
