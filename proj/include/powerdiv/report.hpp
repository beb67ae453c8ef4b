#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "powerdiv/divider.hpp"
#include "powerdiv/network.hpp"
#include "powerdiv/power_flow.hpp"

namespace powerdiv {

/// Columns of the flow comparison table. Dc is -b_mn (theta_m - theta_n) at the
/// solved angles and has no reactive part.
enum class FlowModel { Exact, Lossless, SmallAngle, UnityMag, Decoupled, Dc };

std::string_view to_string(FlowModel model);
std::optional<FlowModel> flow_model_from(std::string_view name);

struct ModelFlow {
    FlowModel model = FlowModel::Exact;
    double p = 0.0;
    std::optional<double> q;
    double abs_err_p = 0.0;
    std::optional<double> abs_err_q;
    double rel_err_p = 0.0;  // NaN when the exact flow is zero
    std::optional<double> rel_err_q;
};

struct ReportRow {
    LineKey line;
    double exact_p = 0.0;
    double exact_q = 0.0;
    double pf_from = 0.0;  // injection power factor at each end bus
    double pf_to = 0.0;
    std::vector<ModelFlow> models;
};

struct ApproximationReport {
    std::vector<FlowModel> models;
    std::vector<ReportRow> rows;  // case line order, stored orientation
};

/// |P_i| / |S_i|; zero for a bus with no injection.
double injection_power_factor(const OperatingPoint& op, BusId bus);

ApproximationReport approximation_report(const NetworkCase& net, const OperatingPoint& op,
                                         std::span<const FlowModel> models);

}  // namespace powerdiv
