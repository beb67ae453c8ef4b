#include "powerdiv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "powerdiv/allocation.hpp"
#include "powerdiv/divider.hpp"
#include "powerdiv/injections.hpp"
#include "powerdiv/power_flow.hpp"
#include "powerdiv/report.hpp"
#include "powerdiv/sensitivity.hpp"

namespace powerdiv::cli {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return 2;
        case ErrorKind::Parse: return 3;
        case ErrorKind::Convergence: return 4;
        case ErrorKind::Refused: return 5;
        case ErrorKind::Singular: return 6;
        case ErrorKind::Io: return 7;
    }
    return 1;
}

namespace {

constexpr int kSchemaVersion = 1;

using Cell = std::variant<std::monostate, std::string, double, long long>;

struct Column {
    std::string name;
    bool power = false;  // scaled by --base-mva
};

struct Table {
    std::string name;
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Report {
    std::string command;
    std::vector<Table> tables;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    std::vector<std::string> warnings;
};

std::string format_number(double x, bool table_mode) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (table_mode && std::abs(x) < 1e-12) x = 0.0;
    if (x == 0.0) x = 0.0;  // drops the sign of -0
    char buf[64];
    std::snprintf(buf, sizeof buf, table_mode ? "%.6g" : "%.17g", x);
    return buf;
}

Cell scaled(const Cell& cell, const Column& column, double scale) {
    if (column.power) {
        if (const auto* d = std::get_if<double>(&cell)) return *d * scale;
    }
    return cell;
}

std::string render_cell(const Cell& cell, bool table_mode) {
    return std::visit(
        [&](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return table_mode ? "-" : "";
            } else if constexpr (std::is_same_v<T, std::string>) {
                return v;
            } else if constexpr (std::is_same_v<T, double>) {
                return format_number(v, table_mode);
            } else {
                return std::to_string(v);
            }
        },
        cell);
}

nlohmann::ordered_json json_cell(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> nlohmann::ordered_json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return nullptr;
            } else if constexpr (std::is_same_v<T, double>) {
                if (!std::isfinite(v)) return nullptr;
                return v == 0.0 ? 0.0 : v;
            } else {
                return v;
            }
        },
        cell);
}

void write_table(std::ostream& os, const Report& report, double scale) {
    bool first = true;
    for (const Table& t : report.tables) {
        if (!first) os << '\n';
        first = false;
        os << "[" << t.name << "]\n";
        std::vector<std::vector<std::string>> text;
        std::vector<std::size_t> width(t.columns.size());
        for (std::size_t c = 0; c < t.columns.size(); ++c) width[c] = t.columns[c].name.size();
        for (const auto& row : t.rows) {
            auto& line = text.emplace_back();
            for (std::size_t c = 0; c < row.size(); ++c) {
                line.push_back(render_cell(scaled(row[c], t.columns[c], scale), true));
                width[c] = std::max(width[c], line.back().size());
            }
        }
        auto emit = [&](const std::vector<std::string>& cells) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (c) os << "  ";
                os << std::string(width[c] - cells[c].size(), ' ') << cells[c];
            }
            os << '\n';
        };
        std::vector<std::string> header;
        for (const Column& col : t.columns) header.push_back(col.name);
        emit(header);
        for (const auto& line : text) emit(line);
    }
    if (!report.meta.empty()) {
        os << '\n';
        for (const auto& [key, value] : report.meta.items()) {
            os << key << ": ";
            if (value.is_number_float()) {
                os << format_number(value.get<double>(), true);
            } else if (value.is_string()) {
                os << value.get<std::string>();
            } else {
                os << value.dump();
            }
            os << '\n';
        }
    }
    for (const std::string& w : report.warnings) os << "warning: " << w << '\n';
}

void write_csv(std::ostream& os, const Report& report, double scale) {
    bool first = true;
    for (const Table& t : report.tables) {
        if (!first) os << '\n';
        first = false;
        for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c].name;
        os << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                os << (c ? "," : "") << render_cell(scaled(row[c], t.columns[c], scale), false);
            }
            os << '\n';
        }
    }
}

void write_json(std::ostream& os, const Report& report, double scale, const RunConfig& config) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = report.command;
    doc["units"] = config.base_mva ? "MW/MVAr" : "per-unit";
    doc["meta"] = report.meta;
    doc["warnings"] = report.warnings;
    nlohmann::ordered_json tables = nlohmann::ordered_json::object();
    for (const Table& t : report.tables) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& row : t.rows) {
            nlohmann::ordered_json obj = nlohmann::ordered_json::object();
            for (std::size_t c = 0; c < row.size(); ++c) {
                obj[t.columns[c].name] = json_cell(scaled(row[c], t.columns[c], scale));
            }
            rows.push_back(std::move(obj));
        }
        tables[t.name] = std::move(rows);
    }
    doc["tables"] = std::move(tables);
    os << doc.dump(2) << '\n';
}

long long ext(const NetworkCase& net, BusId id) { return net.bus(id).external_id; }

LineKey parse_line(const NetworkCase& net, const std::string& text) {
    int m = 0;
    int n = 0;
    char comma = 0;
    std::istringstream is(text);
    if (!(is >> m >> comma >> n) || comma != ',' || !(is >> std::ws).eof()) {
        throw Error(ErrorKind::Usage, "--line expects m,n (got '" + text + "')");
    }
    const LineKey key{net.from_external(m), net.from_external(n)};
    net.line(key);  // rejects pairs that are not lines
    return key;
}

std::string_view kind_name(BusKind kind) {
    switch (kind) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "pq";
}

std::string line_label(const NetworkCase& net, LineKey key) {
    return "(" + std::to_string(ext(net, key.from)) + "," + std::to_string(ext(net, key.to)) + ")";
}

Report run_solve(const NetworkCase& net) {
    SolverStats stats;
    const OperatingPoint op = solve_power_flow(net, {}, &stats);
    Report r;
    Table buses{"buses", {{"bus"}, {"kind"}, {"vm"}, {"theta_deg"}, {"p", true}, {"q", true}}, {}};
    for (const Bus& b : net.buses()) {
        const Eigen::Index i = index_of(b.id);
        buses.rows.push_back({ext(net, b.id), std::string(kind_name(b.kind)), op.v_mag(i),
                              op.theta(i) * 180.0 / std::numbers::pi, op.p(i), op.q(i)});
    }
    Table lines{"lines",
                {{"from"}, {"to"}, {"p_from", true}, {"q_from", true}, {"p_to", true}, {"q_to", true}, {"loss", true}},
                {}};
    double total_loss = 0.0;
    for (const LineKey key : net.line_keys()) {
        const Complex s_mn = line_complex_flow(net, op, key).complex_flow;
        const Complex s_nm = line_complex_flow(net, op, key.reversed()).complex_flow;
        const double loss = line_loss(net, op, key);
        total_loss += loss;
        lines.rows.push_back({ext(net, key.from), ext(net, key.to), s_mn.real(), s_mn.imag(), s_nm.real(),
                              s_nm.imag(), loss});
    }
    r.tables = {std::move(buses), std::move(lines)};
    r.meta["iterations"] = stats.iterations;
    r.meta["max_mismatch"] = stats.max_mismatch;
    r.meta["total_series_loss"] = total_loss;
    return r;
}

Report run_sensitivity(const NetworkCase& net, const RunConfig& config) {
    const SensitivityCache cache(net, build_admittance(net));
    Report r;
    if (config.all) {
        Table t{"alpha", {{"from"}, {"to"}}, {}};
        for (const Bus& b : net.buses()) t.columns.push_back({"bus_" + std::to_string(b.external_id)});
        for (const LineKey key : net.line_keys()) {
            const LineSensitivity& s = *cache.get(key);
            std::vector<Cell> row{ext(net, key.from), ext(net, key.to)};
            for (Eigen::Index i = 0; i < s.alpha.size(); ++i) row.emplace_back(s.alpha(i));
            t.rows.push_back(std::move(row));
        }
        r.tables.push_back(std::move(t));
        r.meta["basis"] = cache.admittance().has_shunts ? "inverse" : "pseudoinverse";
        return r;
    }
    const LineKey key = parse_line(net, config.line);
    const LineSensitivity& s = *cache.get(key);
    Table t{"kappa", {{"bus"}, {"alpha"}, {"beta"}}, {}};
    for (const Bus& b : net.buses()) {
        t.rows.push_back({ext(net, b.id), s.alpha(index_of(b.id)), s.beta(index_of(b.id))});
    }
    r.tables.push_back(std::move(t));
    r.meta["line"] = line_label(net, key);
    r.meta["basis"] = s.basis == SensitivityBasis::Inverse ? "inverse" : "pseudoinverse";
    return r;
}

Report run_divider_table(const NetworkCase& net, const OperatingPoint& op) {
    const std::vector<FlowModel> models{FlowModel::Lossless, FlowModel::SmallAngle, FlowModel::UnityMag,
                                        FlowModel::Decoupled, FlowModel::Dc};
    const ApproximationReport rep = approximation_report(net, op, models);
    Table flows{"flows", {{"from"}, {"to"}, {"exact_p", true}, {"exact_q", true}}, {}};
    for (FlowModel m : models) {
        const std::string name(to_string(m));
        flows.columns.push_back({name + "_p", true});
        if (m != FlowModel::Dc) flows.columns.push_back({name + "_q", true});
    }
    Table errors{"errors",
                 {{"from"}, {"to"}, {"model"}, {"abs_err_p", true}, {"rel_err_p"}, {"abs_err_q", true},
                  {"rel_err_q"}, {"pf_from"}, {"pf_to"}},
                 {}};
    auto opt = [](const std::optional<double>& x) -> Cell { return x ? Cell(*x) : Cell(); };
    for (const ReportRow& row : rep.rows) {
        std::vector<Cell> cells{ext(net, row.line.from), ext(net, row.line.to), row.exact_p, row.exact_q};
        for (const ModelFlow& mf : row.models) {
            cells.emplace_back(mf.p);
            if (mf.model != FlowModel::Dc) cells.push_back(opt(mf.q));
            errors.rows.push_back({ext(net, row.line.from), ext(net, row.line.to), std::string(to_string(mf.model)),
                                   mf.abs_err_p, mf.rel_err_p, opt(mf.abs_err_q), opt(mf.rel_err_q), row.pf_from,
                                   row.pf_to});
        }
        flows.rows.push_back(std::move(cells));
    }
    Report r;
    r.tables = {std::move(flows), std::move(errors)};
    return r;
}

Report run_divider(const NetworkCase& net, const RunConfig& config) {
    const OperatingPoint op = solve_power_flow(net);
    if (config.table) return run_divider_table(net, op);

    const LineKey key = parse_line(net, config.line);
    const auto model = flow_model_from(config.tier == "small_angle" ? "small-angle" : config.tier);
    if (!model) throw Error(ErrorKind::Usage, "unknown tier '" + config.tier + "'");
    Report r;
    r.meta["line"] = line_label(net, key);
    r.meta["tier"] = std::string(to_string(*model));
    if (*model == FlowModel::Dc) {
        r.tables.push_back(Table{"flow", {{"from"}, {"to"}, {"p", true}},
                                 {{ext(net, key.from), ext(net, key.to), dc_flow_at_angles(net, op, key)}}});
        return r;
    }
    const LineSensitivity sens = line_sensitivity(net, build_admittance(net), key);
    Tier tier = Tier::Exact;
    for (Tier t : {Tier::Exact, Tier::Lossless, Tier::SmallAngle, Tier::UnityMag, Tier::Decoupled}) {
        if (to_string(t) == to_string(*model)) tier = t;
    }
    const DividerCoefficients coeffs = divider_coefficients(op, sens, tier);
    const LineFlow flow = line_flow_divider(op, coeffs);
    r.tables.push_back(Table{"flow", {{"from"}, {"to"}, {"p", true}, {"q", true}},
                             {{ext(net, key.from), ext(net, key.to), flow.p, flow.q}}});
    Table c{"coefficients", {{"bus"}, {"u"}, {"v"}}, {}};
    for (const Bus& b : net.buses()) {
        c.rows.push_back({ext(net, b.id), coeffs.u(index_of(b.id)), coeffs.v(index_of(b.id))});
    }
    r.tables.push_back(std::move(c));
    r.meta["prefactor"] = flow_prefactor(op, coeffs);
    return r;
}

FlowAllocation allocate_one(const NetworkCase& net, const OperatingPoint& op, const SensitivityCache& cache,
                            LineKey key, const std::string& target) {
    const DividerCoefficients mn = divider_coefficients(op, *cache.get(key), Tier::Exact);
    if (target == "p") return allocate_flow(op, mn, AllocationTarget::ActiveFlow);
    if (target == "q") return allocate_flow(op, mn, AllocationTarget::ReactiveFlow);
    if (!loss_identity_applies(net, key)) {
        throw Error(ErrorKind::Refused, "line " + line_label(net, key) +
                                            " has conductive end shunts; P_mn + P_nm is not its series loss");
    }
    const DividerCoefficients nm = divider_coefficients(op, *cache.get(key.reversed()), Tier::Exact);
    return allocate_loss(op, mn, nm);
}

Report run_allocate(const NetworkCase& net, const RunConfig& config) {
    const OperatingPoint op = solve_power_flow(net);
    const SensitivityCache cache(net, build_admittance(net));
    Report r;
    r.meta["target"] = config.target;
    if (config.all) {
        Table shares{"shares", {{"from"}, {"to"}, {"total", true}, {"bus"}, {"p_share_pct"}, {"q_share_pct"}}, {}};
        Table refused{"refused", {{"from"}, {"to"}, {"reason"}}, {}};
        for (const LineKey key : net.line_keys()) {
            try {
                const FlowAllocation a = allocate_one(net, op, cache, key, config.target);
                for (const BusShare& s : a.per_bus) {
                    shares.rows.push_back({ext(net, key.from), ext(net, key.to), a.total, ext(net, s.bus),
                                           100.0 * s.from_p, 100.0 * s.from_q});
                }
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Refused) throw;
                refused.rows.push_back({ext(net, key.from), ext(net, key.to), std::string(e.what())});
            }
        }
        r.tables.push_back(std::move(shares));
        if (!refused.rows.empty()) r.tables.push_back(std::move(refused));
        return r;
    }
    const LineKey key = parse_line(net, config.line);
    const FlowAllocation a = allocate_one(net, op, cache, key, config.target);
    Table shares{"shares", {{"bus"}, {"p_share_pct"}, {"q_share_pct"}, {"total_pct"}}, {}};
    for (const BusShare& s : a.per_bus) {
        shares.rows.push_back({ext(net, s.bus), 100.0 * s.from_p, 100.0 * s.from_q, 100.0 * (s.from_p + s.from_q)});
    }
    r.tables.push_back(std::move(shares));
    r.meta["line"] = line_label(net, key);
    r.meta["total"] = a.total * config.base_mva.value_or(1.0);
    return r;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        field.erase(0, field.find_first_not_of(" \t\r"));
        field.erase(field.find_last_not_of(" \t\r") + 1);
        out.push_back(field);
    }
    return out;
}

std::pair<std::vector<LineKey>, Eigen::VectorXd> read_targets(const NetworkCase& net, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read targets file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"from", "to", "p_ref"}) {
        throw Error(ErrorKind::Parse, path + ": header must be 'from,to,p_ref'");
    }
    std::vector<LineKey> keys;
    std::vector<double> values;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv(line);
        try {
            if (f.size() != 3) throw std::invalid_argument("expected 3 fields");
            std::size_t used = 0;
            const int m = std::stoi(f[0]);
            const int n = std::stoi(f[1]);
            const double p = std::stod(f[2], &used);
            if (used != f[2].size()) throw std::invalid_argument("trailing characters");
            const LineKey key{net.from_external(m), net.from_external(n)};
            if (!net.find_line(key)) throw std::invalid_argument("no such line");
            keys.push_back(key);
            values.push_back(p);
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(row) + ": " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(row) + ": " + e.what());
        }
    }
    if (keys.empty()) throw Error(ErrorKind::Parse, path + ": no target rows");
    return {std::move(keys), Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

Report run_inject_fit(const NetworkCase& net, const RunConfig& config) {
    if (config.loss_model != "lossy" && config.loss_model != "lossless") {
        throw Error(ErrorKind::Usage, "--loss-model must be lossy or lossless");
    }
    auto [keys, p_ref] = read_targets(net, config.targets_path);
    const SensitivityCache cache(net, build_admittance(net));
    const FlowTargetSet targets = make_targets(cache, std::move(keys), std::move(p_ref));
    const double loss = config.loss_model == "lossy" ? estimate_line_losses(net, targets).sum() : 0.0;
    const InjectionSolution sol = solve_targets(targets, loss);

    Report r;
    Table inj{"injections", {{"bus"}, {"p", true}}, {}};
    for (const Bus& b : net.buses()) inj.rows.push_back({ext(net, b.id), sol.p(index_of(b.id))});
    r.tables.push_back(std::move(inj));
    r.meta["loss_model"] = config.loss_model;
    r.meta["estimated_loss"] = loss * config.base_mva.value_or(1.0);
    r.meta["lambda"] = sol.lambda;
    r.meta["residual_norm"] = sol.residual_norm;
    if (sol.fewer_targets_than_buses) {
        r.warnings.push_back("fewer target lines than buses; the fit is underdetermined in flow space");
    }
    if (config.verify) {
        const Realization real = realize_injections(net, targets, sol.p);
        Table t{"realized", {{"from"}, {"to"}, {"p_ref", true}, {"p_achieved", true}}, {}};
        for (std::size_t i = 0; i < targets.lines.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            t.rows.push_back(
                {ext(net, targets.lines[i].from), ext(net, targets.lines[i].to), targets.p_ref(k), real.achieved(k)});
        }
        r.tables.push_back(std::move(t));
        r.meta["error_norm"] = real.error_norm;
    }
    return r;
}

Report run_experiment(const NetworkCase& net, const RunConfig& config, bool per_trial) {
    ExperimentConfig ec;
    ec.trials = config.trials;
    ec.seed = config.seed;
    ec.bins = config.bins;
    ec.threads = config.threads;
    const ExperimentResult res = perturbation_experiment(net, ec);
    Report r;
    Table h{"histogram", {{"bin_lo"}, {"bin_hi"}, {"count_lossy"}, {"count_lossless"}}, {}};
    for (const HistogramBin& b : res.histogram) {
        h.rows.push_back({b.lo, b.hi, static_cast<long long>(b.count_lossy), static_cast<long long>(b.count_lossless)});
    }
    r.tables.push_back(std::move(h));
    if (per_trial) {
        Table t{"trials", {{"trial"}, {"error_lossy"}, {"error_lossless"}}, {}};
        for (std::size_t i = 0; i < res.errors_lossy.size(); ++i) {
            t.rows.push_back({static_cast<long long>(i), res.errors_lossy[i], res.errors_lossless[i]});
        }
        r.tables.push_back(std::move(t));
    }
    r.meta["trials"] = config.trials;
    r.meta["seed"] = config.seed;
    r.meta["median_lossy"] = median(res.errors_lossy);
    r.meta["median_lossless"] = median(res.errors_lossless);
    r.meta["nonconvergent_lossy"] = res.nonconvergent_lossy;
    r.meta["nonconvergent_lossless"] = res.nonconvergent_lossless;
    return r;
}

struct Extra {
    bool per_trial = false;
};

void dispatch_impl(const RunConfig& config, const Extra& extra, std::ostream& out) {
    const NetworkCase net = load_case(config.case_path, config.format);
    Report report;
    if (config.subcommand == "solve") {
        report = run_solve(net);
    } else if (config.subcommand == "sensitivity") {
        report = run_sensitivity(net, config);
    } else if (config.subcommand == "divider") {
        report = run_divider(net, config);
    } else if (config.subcommand == "allocate") {
        if (config.target != "p" && config.target != "q" && config.target != "loss") {
            throw Error(ErrorKind::Usage, "--target must be p, q or loss");
        }
        report = run_allocate(net, config);
    } else if (config.subcommand == "inject-fit") {
        report = run_inject_fit(net, config);
    } else if (config.subcommand == "experiment") {
        report = run_experiment(net, config, extra.per_trial);
    } else {
        throw Error(ErrorKind::Usage, "unknown subcommand '" + config.subcommand + "'");
    }
    report.command = config.subcommand;

    const double scale = config.base_mva.value_or(1.0);
    std::ostringstream text;
    switch (config.output) {
        case OutputFormat::Table: write_table(text, report, scale); break;
        case OutputFormat::Csv: write_csv(text, report, scale); break;
        case OutputFormat::Json: write_json(text, report, scale, config); break;
    }
    if (config.output_path.empty()) {
        out << text.str();
        return;
    }
    std::ofstream file(config.output_path, std::ios::binary);
    if (!(file << text.str()) || !file.flush()) {
        throw Error(ErrorKind::Io, "cannot write '" + config.output_path + "'");
    }
}

}  // namespace

void dispatch(const RunConfig& config, std::ostream& out) { dispatch_impl(config, {}, out); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig config;
    Extra extra;
    std::string format_name;
    std::string output_name = "table";
    std::string base_mva_text;

    CLI::App app{"Power divider analysis of AC networks", "powerdiv"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--case", config.case_path, "Case file (native JSON or MATPOWER)")->required();
    app.add_option("--format", format_name, "Case format: native or matpower (default: by extension)")
        ->check(CLI::IsMember({"native", "matpower"}));
    app.add_option("--out", output_name, "Report format: table, csv or json")
        ->check(CLI::IsMember({"table", "csv", "json"}));
    app.add_option("--output", config.output_path, "Write the report to a file instead of stdout");
    app.add_option("--seed", config.seed, "Random seed");
    auto* base_opt = app.add_option("--base-mva", base_mva_text,
                                    "Print powers in MW/MVAr; the value defaults to the case base")
                         ->expected(0, 1);

    app.add_subcommand("solve", "Newton-Raphson power flow: bus states and line flows");

    auto* sens = app.add_subcommand("sensitivity", "Current-injection sensitivity factors");
    auto* sens_line = sens->add_option("--line", config.line, "Line as m,n");
    auto* sens_all = sens->add_flag("--all", config.all, "Alpha rows of every line");
    sens_line->excludes(sens_all);

    auto* div = app.add_subcommand("divider", "Line flow from the divider law");
    auto* div_line = div->add_option("--line", config.line, "Line as m,n");
    auto* div_tier = div->add_option("--tier", config.tier, "exact, lossless, small-angle, unity, decoupled or dc")
                         ->check(CLI::IsMember({"exact", "lossless", "small-angle", "unity", "decoupled", "dc"}));
    auto* div_table = div->add_flag("--table", config.table, "All lines, all tiers, with errors");
    div_table->excludes(div_line)->excludes(div_tier);

    auto* alloc = app.add_subcommand("allocate", "Per-bus shares of a line flow or loss");
    auto* alloc_line = alloc->add_option("--line", config.line, "Line as m,n");
    alloc->add_option("--target", config.target, "p, q or loss")->check(CLI::IsMember({"p", "q", "loss"}));
    auto* alloc_all = alloc->add_flag("--all-lines", config.all, "Allocate every line");
    alloc_line->excludes(alloc_all);

    auto* fit = app.add_subcommand("inject-fit", "Injections that best reproduce target line flows");
    fit->add_option("--targets", config.targets_path, "CSV with header from,to,p_ref")->required();
    fit->add_option("--loss-model", config.loss_model, "lossy or lossless")
        ->check(CLI::IsMember({"lossy", "lossless"}));
    fit->add_flag("--verify", config.verify, "Re-solve the power flow with the fitted injections");

    auto* exp = app.add_subcommand("experiment", "Randomized flow-target fitting experiment");
    exp->add_option("--trials", config.trials, "Number of trials")->check(CLI::NonNegativeNumber);
    exp->add_option("--bins", config.bins, "Histogram bins")->check(CLI::PositiveNumber);
    exp->add_option("--threads", config.threads, "Worker threads")->check(CLI::PositiveNumber);
    exp->add_flag("--per-trial", extra.per_trial, "Also report every trial's errors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error[usage]: " << e.what() << '\n';
        return exit_code(ErrorKind::Usage);
    }

    config.subcommand = app.get_subcommands().front()->get_name();
    if (config.subcommand == "sensitivity" && config.line.empty() && !config.all) {
        err << "error[usage]: sensitivity needs --line m,n or --all\n";
        return exit_code(ErrorKind::Usage);
    }
    if (config.subcommand == "divider" && config.line.empty() && !config.table) {
        err << "error[usage]: divider needs --line m,n or --table\n";
        return exit_code(ErrorKind::Usage);
    }
    if (config.subcommand == "allocate" && config.line.empty() && !config.all) {
        err << "error[usage]: allocate needs --line m,n or --all-lines\n";
        return exit_code(ErrorKind::Usage);
    }
    config.output = output_name == "csv" ? OutputFormat::Csv
                    : output_name == "json" ? OutputFormat::Json
                                            : OutputFormat::Table;
    if (format_name.empty()) {
        const auto& p = config.case_path;
        format_name = p.size() >= 2 && p.compare(p.size() - 2, 2, ".m") == 0 ? "matpower" : "native";
    }
    config.format = format_name == "matpower" ? CaseFormat::Matpower : CaseFormat::Native;

    try {
        if (base_opt->count() > 0) {
            if (base_mva_text.empty()) {
                config.base_mva = load_case(config.case_path, config.format).base_mva();
            } else {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(base_mva_text, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != base_mva_text.size() || !(v > 0.0)) {
                    throw Error(ErrorKind::Usage, "--base-mva expects a positive number");
                }
                config.base_mva = v;
            }
        }
        dispatch_impl(config, extra, out);
    } catch (const Error& e) {
        err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    }
    return 0;
}

}  // namespace powerdiv::cli
