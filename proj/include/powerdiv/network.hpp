#pragma once

#include <compare>
#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace powerdiv {

using Complex = std::complex<double>;

/// 1-based bus number after normalization. Vector entry for bus m is m - 1.
using BusId = int;

inline Eigen::Index index_of(BusId id) { return static_cast<Eigen::Index>(id - 1); }

enum class BusKind { Slack, PV, PQ };

struct Bus {
    BusId id = 0;
    int external_id = 0;  // id as written in the source file
    BusKind kind = BusKind::PQ;
    double p_sched = 0.0;  // generation positive, load negative
    double q_sched = 0.0;
    std::optional<double> v_setpoint;  // Slack and PV only
    Complex shunt{0.0, 0.0};           // passive bus shunt y_mm

    friend bool operator==(const Bus&, const Bus&) = default;
};

/// Ordered endpoint pair. (m, n) and (n, m) name the same line from opposite ends.
struct LineKey {
    BusId from = 0;
    BusId to = 0;

    LineKey reversed() const { return {to, from}; }

    friend auto operator<=>(const LineKey&, const LineKey&) = default;
};

/// Lumped Pi model: series admittance plus an identical shunt at both ends.
///
/// An off-nominal tap ratio (tap != 1, ideal transformer at the `from` side) is
/// folded into an equivalent Pi with series y/tap and unequal end shunts. With
/// tap == 1 the equivalent is the plain line.
struct LinePi {
    BusId from = 0;
    BusId to = 0;
    Complex series{0.0, 0.0};
    Complex end_shunt{0.0, 0.0};
    double tap = 1.0;

    /// Series admittance of the equivalent Pi.
    Complex series_admittance() const { return series / tap; }

    /// Shunt admittance of the equivalent Pi at the given end.
    Complex shunt_at(BusId end) const;

    BusId other_end(BusId end) const { return end == from ? to : from; }

    bool touches(BusId bus) const { return bus == from || bus == to; }

    friend bool operator==(const LinePi&, const LinePi&) = default;
};

/// Static grid description with buses renumbered 1..N in input order.
class NetworkCase {
public:
    /// Validates and normalizes. Bus `id` fields and line endpoints refer to the
    /// caller's numbering; they are rewritten to 1..N and the originals kept in
    /// `Bus::external_id`. Throws Error{Parse} on any invariant violation.
    NetworkCase(double base_mva, std::vector<Bus> buses, std::vector<LinePi> lines);

    double base_mva() const { return base_mva_; }
    std::size_t size() const { return buses_.size(); }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<LinePi>& lines() const { return lines_; }

    const Bus& bus(BusId id) const;
    BusId slack() const { return slack_; }

    std::optional<std::size_t> find_line(LineKey key) const;
    /// Throws Error{Usage} when the pair is not a line of the case.
    const LinePi& line(LineKey key) const;

    /// Each line in stored (from, to) orientation.
    std::vector<LineKey> line_keys() const;

    /// Normalized id of the bus numbered `external` in the source file.
    BusId from_external(int external) const;

    /// Copy with scheduled active injections replaced by `p` (all buses).
    NetworkCase with_scheduled_p(const Eigen::VectorXd& p) const;

    /// Copy with all conductances and all shunts zeroed (series b kept).
    NetworkCase lossless_shunt_free() const;

    /// Copy with all conductances zeroed (series and shunt).
    NetworkCase lossless() const;

    friend bool operator==(const NetworkCase&, const NetworkCase&) = default;

private:
    double base_mva_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<LinePi> lines_;
    BusId slack_ = 0;
};

/// Total shunt admittance at bus m: bus shunt plus every incident line end shunt.
Complex bus_total_shunt(const NetworkCase& net, BusId m);

struct AdmittanceMatrix {
    Eigen::MatrixXcd y;
    Eigen::MatrixXd g;
    Eigen::MatrixXd b;
    bool has_shunts = false;  // true iff some bus total shunt is nonzero; Y is then invertible

    Eigen::Index size() const { return y.rows(); }
};

AdmittanceMatrix build_admittance(const NetworkCase& net);

}  // namespace powerdiv
