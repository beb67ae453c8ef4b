#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <span>

#include <Eigen/Dense>

#include "powerdiv/network.hpp"

namespace powerdiv {

enum class SensitivityBasis { Inverse, Pseudoinverse };

/// Current-injection sensitivity factors of one line end: I_(m,n) = kappa^T I.
struct LineSensitivity {
    LineKey line;
    Eigen::VectorXcd kappa;
    Eigen::VectorXd alpha;  // Re kappa
    Eigen::VectorXd beta;   // Im kappa
    SensitivityBasis basis = SensitivityBasis::Inverse;
};

/// Row vector mapping bus voltages to I_(m,n): y_mn e_mn^T + y_mn^sh e_m^T.
Eigen::RowVectorXcd line_current_row(const NetworkCase& net, LineKey line);

/// kappa^T = (y_mn e_mn + y_mn^sh e_m)^T Y^-1, obtained from a solve with Y^T.
/// Requires y.has_shunts; throws Error{Singular} otherwise or if the solve fails.
LineSensitivity current_sensitivity(const NetworkCase& net, const AdmittanceMatrix& y, LineKey line);

/// kappa^T = y_mn e_mn^T Y^+ for a network without shunt elements.
LineSensitivity current_sensitivity_singular(const NetworkCase& net, const AdmittanceMatrix& y, LineKey line);

/// Picks the inverse or pseudoinverse route from y.has_shunts.
LineSensitivity line_sensitivity(const NetworkCase& net, const AdmittanceMatrix& y, LineKey line);

/// Real sensitivities of the lossless network (Y ~ jB):
/// alpha^T = (b_mn e_mn + b_mn^sh e_m)^T B^-1, or b_mn e_mn^T B^+ without shunts.
LineSensitivity lossless_sensitivity(const NetworkCase& net, LineKey line);

/// Stacks alpha rows in the order given. Throws Error{Usage} on an empty set.
Eigen::MatrixXd sensitivity_matrix(const NetworkCase& net, const AdmittanceMatrix& y,
                                   std::span<const LineKey> lines);

/// Moore-Penrose pseudoinverse through a complex SVD.
Eigen::MatrixXcd pseudoinverse(const Eigen::MatrixXcd& m);

/// Lazily computed, memoized sensitivities for one immutable (case, Y) snapshot.
/// Factorizes Y once. Safe for concurrent readers; insertion is exclusive.
class SensitivityCache {
public:
    SensitivityCache(NetworkCase net, AdmittanceMatrix y);

    const NetworkCase& network() const { return net_; }
    const AdmittanceMatrix& admittance() const { return y_; }

    /// Shared record for the ordered pair; computed on first use.
    std::shared_ptr<const LineSensitivity> get(LineKey line) const;

    Eigen::MatrixXd matrix(std::span<const LineKey> lines) const;

    std::size_t cached() const;

private:
    LineSensitivity compute(LineKey line) const;

    NetworkCase net_;
    AdmittanceMatrix y_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    Eigen::MatrixXcd pinv_;
    mutable std::shared_mutex mutex_;
    mutable std::map<LineKey, std::shared_ptr<const LineSensitivity>> records_;
};

}  // namespace powerdiv
