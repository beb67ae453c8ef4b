#include "powerdiv/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include "powerdiv/error.hpp"

namespace powerdiv {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::Parse, what); }

}  // namespace

Complex LinePi::shunt_at(BusId end) const {
    if (tap == 1.0) {
        return end_shunt;
    }
    const Complex ys = series;
    const Complex series_eff = ys / tap;
    if (end == from) {
        return (ys + end_shunt) / (tap * tap) - series_eff;
    }
    return ys + end_shunt - series_eff;
}

NetworkCase::NetworkCase(double base_mva, std::vector<Bus> buses, std::vector<LinePi> lines)
    : base_mva_(base_mva), buses_(std::move(buses)), lines_(std::move(lines)) {
    if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) {
        invalid("base_mva must be a positive number");
    }
    if (buses_.empty()) {
        invalid("case has no buses");
    }

    std::unordered_map<int, BusId> renumber;
    int slack_count = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        Bus& bus = buses_[i];
        const int external = bus.id;
        if (!renumber.emplace(external, static_cast<BusId>(i + 1)).second) {
            invalid("duplicate bus id " + std::to_string(external));
        }
        bus.external_id = external;
        bus.id = static_cast<BusId>(i + 1);
        if (bus.kind == BusKind::Slack) {
            ++slack_count;
            slack_ = bus.id;
        }
        if (bus.kind != BusKind::PQ && !bus.v_setpoint) {
            invalid("bus " + std::to_string(external) + " needs a voltage setpoint");
        }
        if (bus.v_setpoint && !(*bus.v_setpoint > 0.0)) {
            invalid("bus " + std::to_string(external) + " has a non-positive voltage setpoint");
        }
    }
    if (slack_count == 0) {
        invalid("case has no slack bus");
    }
    if (slack_count > 1) {
        invalid("case has " + std::to_string(slack_count) + " slack buses; exactly one is required");
    }

    std::set<std::pair<BusId, BusId>> seen;
    for (LinePi& line : lines_) {
        const int ext_from = line.from;
        const int ext_to = line.to;
        const auto f = renumber.find(ext_from);
        const auto t = renumber.find(ext_to);
        const std::string name = "line (" + std::to_string(ext_from) + "," + std::to_string(ext_to) + ")";
        if (f == renumber.end() || t == renumber.end()) {
            invalid(name + " references an unknown bus");
        }
        if (f->second == t->second) {
            invalid(name + " connects a bus to itself");
        }
        if (line.series == Complex{0.0, 0.0}) {
            invalid(name + " has zero series admittance");
        }
        if (!(line.tap > 0.0) || !std::isfinite(line.tap)) {
            invalid(name + " has a non-positive tap ratio");
        }
        line.from = f->second;
        line.to = t->second;
        const auto pair = std::minmax(line.from, line.to);
        if (!seen.insert({pair.first, pair.second}).second) {
            invalid("duplicate " + name + "; parallel lines are not supported");
        }
    }

    // connectivity
    std::vector<std::vector<BusId>> adjacency(buses_.size() + 1);
    for (const LinePi& line : lines_) {
        adjacency[line.from].push_back(line.to);
        adjacency[line.to].push_back(line.from);
    }
    std::vector<bool> visited(buses_.size() + 1, false);
    std::queue<BusId> frontier;
    frontier.push(1);
    visited[1] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const BusId at = frontier.front();
        frontier.pop();
        for (BusId next : adjacency[at]) {
            if (!visited[next]) {
                visited[next] = true;
                ++reached;
                frontier.push(next);
            }
        }
    }
    if (reached != buses_.size()) {
        invalid("network is disconnected (" + std::to_string(reached) + " of " +
                std::to_string(buses_.size()) + " buses reachable)");
    }
}

const Bus& NetworkCase::bus(BusId id) const {
    if (id < 1 || static_cast<std::size_t>(id) > buses_.size()) {
        throw Error(ErrorKind::Usage, "unknown bus " + std::to_string(id));
    }
    return buses_[static_cast<std::size_t>(id - 1)];
}

std::optional<std::size_t> NetworkCase::find_line(LineKey key) const {
    for (std::size_t i = 0; i < lines_.size(); ++i) {
        const LinePi& line = lines_[i];
        if ((line.from == key.from && line.to == key.to) || (line.from == key.to && line.to == key.from)) {
            return i;
        }
    }
    return std::nullopt;
}

const LinePi& NetworkCase::line(LineKey key) const {
    const auto index = find_line(key);
    if (!index) {
        throw Error(ErrorKind::Usage,
                    "no line between buses " + std::to_string(key.from) + " and " + std::to_string(key.to));
    }
    return lines_[*index];
}

std::vector<LineKey> NetworkCase::line_keys() const {
    std::vector<LineKey> keys;
    keys.reserve(lines_.size());
    for (const LinePi& line : lines_) {
        keys.push_back({line.from, line.to});
    }
    return keys;
}

BusId NetworkCase::from_external(int external) const {
    for (const Bus& bus : buses_) {
        if (bus.external_id == external) {
            return bus.id;
        }
    }
    throw Error(ErrorKind::Usage, "unknown bus " + std::to_string(external));
}

NetworkCase NetworkCase::with_scheduled_p(const Eigen::VectorXd& p) const {
    if (p.size() != static_cast<Eigen::Index>(buses_.size())) {
        throw Error(ErrorKind::Usage, "injection vector has wrong length");
    }
    NetworkCase copy = *this;
    for (Bus& bus : copy.buses_) {
        bus.p_sched = p(index_of(bus.id));
    }
    return copy;
}

NetworkCase NetworkCase::lossless_shunt_free() const {
    NetworkCase copy = *this;
    for (Bus& bus : copy.buses_) {
        bus.shunt = {0.0, 0.0};
    }
    for (LinePi& line : copy.lines_) {
        line.series = {0.0, line.series_admittance().imag()};
        line.end_shunt = {0.0, 0.0};
        line.tap = 1.0;
    }
    return copy;
}

NetworkCase NetworkCase::lossless() const {
    NetworkCase copy = *this;
    for (Bus& bus : copy.buses_) {
        bus.shunt = {0.0, bus.shunt.imag()};
    }
    for (LinePi& line : copy.lines_) {
        line.series = {0.0, line.series.imag()};
        line.end_shunt = {0.0, line.end_shunt.imag()};
    }
    return copy;
}

Complex bus_total_shunt(const NetworkCase& net, BusId m) {
    Complex total = net.bus(m).shunt;
    for (const LinePi& line : net.lines()) {
        if (line.touches(m)) {
            total += line.shunt_at(m);
        }
    }
    return total;
}

AdmittanceMatrix build_admittance(const NetworkCase& net) {
    const auto n = static_cast<Eigen::Index>(net.size());
    AdmittanceMatrix adm;
    adm.y = Eigen::MatrixXcd::Zero(n, n);
    for (const LinePi& line : net.lines()) {
        const Eigen::Index m = index_of(line.from);
        const Eigen::Index k = index_of(line.to);
        const Complex y = line.series_admittance();
        adm.y(m, k) = -y;
        adm.y(k, m) = -y;
        adm.y(m, m) += y;
        adm.y(k, k) += y;
    }
    for (const Bus& bus : net.buses()) {
        const Complex shunt = bus_total_shunt(net, bus.id);
        adm.y(index_of(bus.id), index_of(bus.id)) += shunt;
        if (shunt != Complex{0.0, 0.0}) {
            adm.has_shunts = true;
        }
    }
    adm.g = adm.y.real();
    adm.b = adm.y.imag();
    return adm;
}

}  // namespace powerdiv
