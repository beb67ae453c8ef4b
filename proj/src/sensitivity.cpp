#include "powerdiv/sensitivity.hpp"

#include <limits>
#include <mutex>
#include <string>

#include "powerdiv/error.hpp"

namespace powerdiv {

namespace {

std::string line_name(LineKey line) {
    return "(" + std::to_string(line.from) + "," + std::to_string(line.to) + ")";
}

LineSensitivity make_record(LineKey line, Eigen::VectorXcd kappa, SensitivityBasis basis) {
    LineSensitivity rec;
    rec.line = line;
    rec.alpha = kappa.real();
    rec.beta = kappa.imag();
    rec.kappa = std::move(kappa);
    rec.basis = basis;
    return rec;
}

Eigen::RowVectorXcd series_difference_row(const NetworkCase& net, LineKey line) {
    const Complex y = net.line(line).series_admittance();
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(net.size()));
    row(index_of(line.from)) = y;
    row(index_of(line.to)) = -y;
    return row;
}

Eigen::VectorXcd solve_transposed(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, const Eigen::MatrixXcd& y,
                                  const Eigen::RowVectorXcd& row, LineKey line) {
    // kappa^T = row Y^-1  <=>  Y^T kappa = row^T
    const Eigen::VectorXcd rhs = row.transpose();
    const Eigen::VectorXcd kappa = lu.transpose().solve(rhs);
    const double residual = (y.transpose() * kappa - rhs).norm();
    if (!kappa.allFinite() || residual > 1e-9 * std::max(1.0, rhs.norm())) {
        throw Error(ErrorKind::Singular, "admittance solve failed for line " + line_name(line) +
                                             " (residual " + std::to_string(residual) + ")");
    }
    return kappa;
}

void require_shunts(const AdmittanceMatrix& y, bool expected) {
    if (y.has_shunts != expected) {
        throw Error(ErrorKind::Singular, expected ? "admittance matrix has no shunts and is singular; use the "
                                                    "pseudoinverse route"
                                                  : "admittance matrix has shunts; use the inverse route");
    }
}

}  // namespace

Eigen::RowVectorXcd line_current_row(const NetworkCase& net, LineKey line) {
    Eigen::RowVectorXcd row = series_difference_row(net, line);
    row(index_of(line.from)) += net.line(line).shunt_at(line.from);
    return row;
}

LineSensitivity current_sensitivity(const NetworkCase& net, const AdmittanceMatrix& y, LineKey line) {
    require_shunts(y, true);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(y.y);
    return make_record(line, solve_transposed(lu, y.y, line_current_row(net, line), line),
                       SensitivityBasis::Inverse);
}

LineSensitivity current_sensitivity_singular(const NetworkCase& net, const AdmittanceMatrix& y, LineKey line) {
    require_shunts(y, false);
    const Eigen::RowVectorXcd kappa = series_difference_row(net, line) * pseudoinverse(y.y);
    return make_record(line, kappa.transpose(), SensitivityBasis::Pseudoinverse);
}

LineSensitivity line_sensitivity(const NetworkCase& net, const AdmittanceMatrix& y, LineKey line) {
    return y.has_shunts ? current_sensitivity(net, y, line) : current_sensitivity_singular(net, y, line);
}

LineSensitivity lossless_sensitivity(const NetworkCase& net, LineKey line) {
    // With every conductance zeroed, Y = jB and kappa is real.
    const NetworkCase lossless = net.lossless();
    LineSensitivity rec = line_sensitivity(lossless, build_admittance(lossless), line);
    rec.kappa = rec.alpha.cast<Complex>();
    rec.beta.setZero();
    return rec;
}

Eigen::MatrixXd sensitivity_matrix(const NetworkCase& net, const AdmittanceMatrix& y,
                                   std::span<const LineKey> lines) {
    return SensitivityCache(net, y).matrix(lines);
}

Eigen::MatrixXcd pseudoinverse(const Eigen::MatrixXcd& m) {
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double cutoff = sigma.size() == 0 ? 0.0
                                            : std::numeric_limits<double>::epsilon() *
                                                  static_cast<double>(std::max(m.rows(), m.cols())) *
                                                  sigma(0);
    Eigen::VectorXd inverted(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        inverted(i) = sigma(i) > cutoff ? 1.0 / sigma(i) : 0.0;
    }
    const Eigen::Index k = sigma.size();
    return svd.matrixV().leftCols(k) * inverted.cast<Complex>().asDiagonal() * svd.matrixU().leftCols(k).adjoint();
}

SensitivityCache::SensitivityCache(NetworkCase net, AdmittanceMatrix y) : net_(std::move(net)), y_(std::move(y)) {
    if (y_.has_shunts) {
        lu_.compute(y_.y);
    } else {
        pinv_ = pseudoinverse(y_.y);
    }
}

std::shared_ptr<const LineSensitivity> SensitivityCache::get(LineKey line) const {
    {
        std::shared_lock lock(mutex_);
        const auto it = records_.find(line);
        if (it != records_.end()) return it->second;
    }
    auto record = std::make_shared<const LineSensitivity>(compute(line));
    std::unique_lock lock(mutex_);
    // another writer may have won the race; keep the first published record
    return records_.emplace(line, std::move(record)).first->second;
}

Eigen::MatrixXd SensitivityCache::matrix(std::span<const LineKey> lines) const {
    if (lines.empty()) {
        throw Error(ErrorKind::Usage, "sensitivity matrix needs at least one line");
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(net_.size()));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) = get(lines[i])->alpha.transpose();
    }
    return a;
}

std::size_t SensitivityCache::cached() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

LineSensitivity SensitivityCache::compute(LineKey line) const {
    if (y_.has_shunts) {
        return make_record(line, solve_transposed(lu_, y_.y, line_current_row(net_, line), line),
                           SensitivityBasis::Inverse);
    }
    const Eigen::RowVectorXcd kappa = series_difference_row(net_, line) * pinv_;
    return make_record(line, kappa.transpose(), SensitivityBasis::Pseudoinverse);
}

}  // namespace powerdiv
