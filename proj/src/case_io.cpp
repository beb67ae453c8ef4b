#include "powerdiv/case_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "powerdiv/error.hpp"

namespace powerdiv {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorKind::Parse, what); }

double number_field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        malformed(where + ": missing field '" + key + "'");
    }
    if (!it->is_number()) {
        malformed(where + ": field '" + key + "' is not a number");
    }
    return it->get<double>();
}

double optional_number(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) {
        return fallback;
    }
    return number_field(obj, key, where);
}

int integer_field(const json& obj, const char* key, const std::string& where) {
    const double value = number_field(obj, key, where);
    if (value != std::floor(value)) {
        malformed(where + ": field '" + key + "' must be an integer");
    }
    return static_cast<int>(value);
}

BusKind kind_from(const std::string& text, const std::string& where) {
    if (text == "slack") return BusKind::Slack;
    if (text == "pv") return BusKind::PV;
    if (text == "pq") return BusKind::PQ;
    malformed(where + ": unknown bus kind '" + text + "'");
}

const char* kind_name(BusKind kind) {
    switch (kind) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "pq";
}

// MATPOWER table parsing.

std::string strip_comments(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    for (char c : text) {
        if (c == '%') in_comment = true;
        if (c == '\n') in_comment = false;
        if (!in_comment) out.push_back(c);
    }
    return out;
}

using Table = std::vector<std::vector<double>>;

Table read_table(const std::string& text, const std::string& name, bool required) {
    const std::regex open("mpc\\." + name + "\\s*=\\s*\\[");
    std::smatch match;
    if (!std::regex_search(text, match, open)) {
        if (required) malformed("matpower case: missing mpc." + name);
        return {};
    }
    const auto begin = static_cast<std::size_t>(match.position(0) + match.length(0));
    const auto end = text.find(']', begin);
    if (end == std::string::npos) {
        malformed("matpower case: unterminated mpc." + name);
    }
    Table rows;
    std::string body = text.substr(begin, end - begin);
    std::string row_text;
    std::vector<std::string> raw_rows;
    for (char c : body) {
        if (c == ';' || c == '\n') {
            raw_rows.push_back(row_text);
            row_text.clear();
        } else {
            row_text.push_back(c == ',' ? ' ' : c);
        }
    }
    raw_rows.push_back(row_text);
    for (const std::string& raw : raw_rows) {
        std::istringstream in(raw);
        std::vector<double> row;
        std::string token;
        while (in >> token) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(token, &used));
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                malformed("matpower case: bad number '" + token + "' in mpc." + name);
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

double read_scalar(const std::string& text, const std::string& name) {
    const std::regex pattern("mpc\\." + name + "\\s*=\\s*([-+0-9.eE]+)\\s*;");
    std::smatch match;
    if (!std::regex_search(text, match, pattern)) {
        malformed("matpower case: missing mpc." + name);
    }
    return std::stod(match[1].str());
}

void require_columns(const Table& table, std::size_t columns, const std::string& name) {
    for (const auto& row : table) {
        if (row.size() < columns) {
            malformed("matpower case: mpc." + name + " rows need at least " + std::to_string(columns) +
                      " columns");
        }
    }
}

}  // namespace

NetworkCase parse_native(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        malformed(std::string("case JSON: ") + e.what());
    }
    if (!doc.is_object()) malformed("case JSON: top level must be an object");
    const double base_mva = optional_number(doc, "base_mva", 100.0, "case");
    if (!doc.contains("buses") || !doc["buses"].is_array()) malformed("case JSON: 'buses' array required");
    if (!doc.contains("lines") || !doc["lines"].is_array()) malformed("case JSON: 'lines' array required");

    std::vector<Bus> buses;
    for (std::size_t i = 0; i < doc["buses"].size(); ++i) {
        const json& entry = doc["buses"][i];
        const std::string where = "bus #" + std::to_string(i);
        if (!entry.is_object()) malformed(where + ": not an object");
        Bus bus;
        bus.id = integer_field(entry, "id", where);
        if (!entry.contains("kind") || !entry["kind"].is_string()) malformed(where + ": 'kind' string required");
        bus.kind = kind_from(entry["kind"].get<std::string>(), where);
        bus.p_sched = optional_number(entry, "p", 0.0, where);
        bus.q_sched = optional_number(entry, "q", 0.0, where);
        if (entry.contains("vm")) bus.v_setpoint = number_field(entry, "vm", where);
        bus.shunt = {optional_number(entry, "shunt_g", 0.0, where), optional_number(entry, "shunt_b", 0.0, where)};
        buses.push_back(bus);
    }

    std::vector<LinePi> lines;
    for (std::size_t i = 0; i < doc["lines"].size(); ++i) {
        const json& entry = doc["lines"][i];
        const std::string where = "line #" + std::to_string(i);
        if (!entry.is_object()) malformed(where + ": not an object");
        LinePi line;
        line.from = integer_field(entry, "from", where);
        line.to = integer_field(entry, "to", where);
        line.series = {number_field(entry, "g", where), number_field(entry, "b", where)};
        line.end_shunt = {optional_number(entry, "sh_g", 0.0, where), optional_number(entry, "sh_b", 0.0, where)};
        line.tap = optional_number(entry, "tap", 1.0, where);
        lines.push_back(line);
    }
    return NetworkCase(base_mva, std::move(buses), std::move(lines));
}

NetworkCase parse_matpower(std::string_view text) {
    const std::string clean = strip_comments(text);
    const double base_mva = read_scalar(clean, "baseMVA");
    const Table bus_table = read_table(clean, "bus", true);
    const Table gen_table = read_table(clean, "gen", false);
    const Table branch_table = read_table(clean, "branch", true);
    require_columns(bus_table, 13, "bus");
    require_columns(gen_table, 8, "gen");
    require_columns(branch_table, 11, "branch");

    struct GenTotals {
        double pg = 0.0;
        double qg = 0.0;
        std::optional<double> vg;
    };
    std::map<int, GenTotals> gens;
    for (const auto& row : gen_table) {
        if (row[7] <= 0.0) continue;  // out of service
        GenTotals& totals = gens[static_cast<int>(row[0])];
        totals.pg += row[1];
        totals.qg += row[2];
        if (!totals.vg) totals.vg = row[5];
    }

    std::vector<Bus> buses;
    for (const auto& row : bus_table) {
        Bus bus;
        bus.id = static_cast<int>(row[0]);
        const int type = static_cast<int>(row[1]);
        switch (type) {
            case 1: bus.kind = BusKind::PQ; break;
            case 2: bus.kind = BusKind::PV; break;
            case 3: bus.kind = BusKind::Slack; break;
            default: malformed("matpower case: bus " + std::to_string(bus.id) + " has unsupported type " +
                               std::to_string(type));
        }
        const GenTotals totals = gens.count(bus.id) ? gens[bus.id] : GenTotals{};
        bus.p_sched = (totals.pg - row[2]) / base_mva;
        bus.q_sched = (totals.qg - row[3]) / base_mva;
        bus.shunt = {row[4] / base_mva, row[5] / base_mva};
        if (bus.kind != BusKind::PQ) {
            bus.v_setpoint = totals.vg ? *totals.vg : row[7];
        }
        buses.push_back(bus);
    }

    std::vector<LinePi> lines;
    for (const auto& row : branch_table) {
        if (row[10] <= 0.0) continue;
        const int from = static_cast<int>(row[0]);
        const int to = static_cast<int>(row[1]);
        const std::string name = "branch (" + std::to_string(from) + "," + std::to_string(to) + ")";
        if (row[9] != 0.0) {
            malformed("matpower case: " + name + " has a phase shift of " + std::to_string(row[9]) +
                      " degrees; phase shifters are not supported");
        }
        const Complex impedance{row[2], row[3]};
        if (impedance == Complex{0.0, 0.0}) {
            malformed("matpower case: " + name + " has zero impedance");
        }
        LinePi line;
        line.from = from;
        line.to = to;
        line.series = 1.0 / impedance;
        line.end_shunt = {0.0, row[4] / 2.0};
        line.tap = row[8] == 0.0 ? 1.0 : row[8];
        lines.push_back(line);
    }
    return NetworkCase(base_mva, std::move(buses), std::move(lines));
}

NetworkCase parse_case(std::string_view text, CaseFormat format) {
    return format == CaseFormat::Native ? parse_native(text) : parse_matpower(text);
}

NetworkCase load_case(const std::string& path, CaseFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open case file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_case(buffer.str(), format);
}

std::string serialize_native(const NetworkCase& net) {
    json doc;
    doc["base_mva"] = net.base_mva();
    json buses = json::array();
    for (const Bus& bus : net.buses()) {
        json entry{{"id", bus.external_id},
                   {"kind", kind_name(bus.kind)},
                   {"p", bus.p_sched},
                   {"q", bus.q_sched}};
        if (bus.v_setpoint) entry["vm"] = *bus.v_setpoint;
        if (bus.shunt.real() != 0.0) entry["shunt_g"] = bus.shunt.real();
        if (bus.shunt.imag() != 0.0) entry["shunt_b"] = bus.shunt.imag();
        buses.push_back(std::move(entry));
    }
    json lines = json::array();
    for (const LinePi& line : net.lines()) {
        json entry{{"from", net.bus(line.from).external_id},
                   {"to", net.bus(line.to).external_id},
                   {"g", line.series.real()},
                   {"b", line.series.imag()},
                   {"sh_g", line.end_shunt.real()},
                   {"sh_b", line.end_shunt.imag()}};
        if (line.tap != 1.0) entry["tap"] = line.tap;
        lines.push_back(std::move(entry));
    }
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    return doc.dump(2) + "\n";
}

}  // namespace powerdiv
