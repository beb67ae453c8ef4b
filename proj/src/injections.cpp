#include "powerdiv/injections.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "powerdiv/error.hpp"

namespace powerdiv {

FlowTargetSet make_targets(const SensitivityCache& cache, std::vector<LineKey> lines, Eigen::VectorXd p_ref) {
    if (static_cast<Eigen::Index>(lines.size()) != p_ref.size()) {
        throw Error(ErrorKind::Usage, "number of target lines and target flows differ");
    }
    FlowTargetSet targets;
    targets.a = cache.matrix(lines);
    targets.lines = std::move(lines);
    targets.p_ref = std::move(p_ref);
    return targets;
}

InjectionSolution solve_targets(const FlowTargetSet& targets, double total_loss) {
    const Eigen::MatrixXd& a = targets.a;
    const Eigen::Index n = a.cols();
    const Eigen::Index d = a.rows();
    if (d == 0 || targets.p_ref.size() != d) {
        throw Error(ErrorKind::Usage, "target set is empty or inconsistent");
    }

    Eigen::MatrixXd stacked(d + 1, n);
    stacked.topRows(d) = a;
    stacked.row(d).setOnes();
    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(stacked);
    rank_check.setThreshold(1e-10);
    if (rank_check.rank() < n) {
        const Eigen::MatrixXd null_space = rank_check.kernel();
        std::ostringstream msg;
        msg << "targets do not determine the injections: [A; 1^T] has rank " << rank_check.rank() << " < " << n
            << "; unresolved direction(s):";
        const Eigen::IOFormat row_format(6, Eigen::DontAlignCols, ", ", ", ", "", "", "[", "]");
        for (Eigen::Index k = 0; k < null_space.cols(); ++k) {
            msg << ' ' << null_space.col(k).normalized().transpose().format(row_format);
        }
        throw Error(ErrorKind::Singular, msg.str());
    }

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = 2.0 * a.transpose() * a;
    kkt.topRightCorner(n, 1).setOnes();
    kkt.bottomLeftCorner(1, n).setOnes();
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = 2.0 * a.transpose() * targets.p_ref;
    rhs(n) = total_loss;

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
    const Eigen::VectorXd x = lu.solve(rhs);
    if (!x.allFinite()) {
        throw Error(ErrorKind::Singular, "KKT system is singular");
    }

    InjectionSolution sol;
    sol.p = x.head(n);
    sol.lambda = x(n);
    sol.residual_norm = (a * sol.p - targets.p_ref).norm();
    sol.balance = sol.p.sum();
    sol.fewer_targets_than_buses = d < n;
    return sol;
}

Eigen::VectorXd estimate_line_losses(const NetworkCase& net, const FlowTargetSet& targets) {
    Eigen::VectorXd losses(targets.p_ref.size());
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
        const Complex y = net.line(targets.lines[static_cast<std::size_t>(i)]).series_admittance();
        const double p = targets.p_ref(i);
        losses(i) = p * p * (1.0 / y).real();
    }
    return losses;
}

InjectionSolution solve_targets_lossy(const NetworkCase& net, const FlowTargetSet& targets) {
    return solve_targets(targets, estimate_line_losses(net, targets).sum());
}

Realization realize_injections(const NetworkCase& net, const FlowTargetSet& targets, const Eigen::VectorXd& p,
                               const SolverOptions& options) {
    Realization out;
    out.op = solve_power_flow(net.with_scheduled_p(p), options);
    out.achieved.resize(static_cast<Eigen::Index>(targets.lines.size()));
    for (std::size_t i = 0; i < targets.lines.size(); ++i) {
        out.achieved(static_cast<Eigen::Index>(i)) = line_complex_flow(net, out.op, targets.lines[i]).complex_flow.real();
    }
    out.error_norm = (out.achieved - targets.p_ref).norm();
    return out;
}

namespace {

double trial_error(const NetworkCase& net, const FlowTargetSet& targets, const InjectionSolution& sol,
                   int& nonconvergent) {
    try {
        return realize_injections(net, targets, sol.p).error_norm;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Convergence) throw;
        ++nonconvergent;
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

ExperimentResult perturbation_experiment(const NetworkCase& net, const ExperimentConfig& config) {
    if (config.trials < 0 || config.bins < 1) {
        throw Error(ErrorKind::Usage, "experiment needs trials >= 0 and bins >= 1");
    }
    ExperimentResult result;
    const auto trials = static_cast<std::size_t>(config.trials);
    result.errors_lossy.assign(trials, 0.0);
    result.errors_lossless.assign(trials, 0.0);
    if (trials == 0) {
        return result;
    }

    const OperatingPoint base = solve_power_flow(net);
    const SensitivityCache cache(net, build_admittance(net));
    const std::vector<LineKey> lines = net.line_keys();
    Eigen::VectorXd base_flows(static_cast<Eigen::Index>(lines.size()));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        base_flows(static_cast<Eigen::Index>(i)) = line_complex_flow(net, base, lines[i]).complex_flow.real();
    }
    const FlowTargetSet base_targets = make_targets(cache, lines, base_flows);
    solve_targets(base_targets, 0.0);  // rank problems surface once, before any trial

    std::vector<int> failed_lossy(trials, 0);
    std::vector<int> failed_lossless(trials, 0);
    auto run_trial = [&](std::size_t t) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> sigma(-1.0, 1.0);
        FlowTargetSet targets = base_targets;
        for (Eigen::Index i = 0; i < targets.p_ref.size(); ++i) {
            const double s = config.fixed_sigma ? *config.fixed_sigma : sigma(rng);
            targets.p_ref(i) = base_flows(i) * (1.0 + s);
        }
        result.errors_lossy[t] = trial_error(net, targets, solve_targets_lossy(net, targets), failed_lossy[t]);
        result.errors_lossless[t] = trial_error(net, targets, solve_targets(targets, 0.0), failed_lossless[t]);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(trials)));
    if (workers == 1) {
        for (std::size_t t = 0; t < trials; ++t) run_trial(t);
    } else {
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t t = w; t < trials; t += workers) run_trial(t);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    for (std::size_t t = 0; t < trials; ++t) {
        result.nonconvergent_lossy += failed_lossy[t];
        result.nonconvergent_lossless += failed_lossless[t];
    }
    result.histogram = make_histogram(result.errors_lossy, result.errors_lossless, config.bins);
    return result;
}

std::vector<HistogramBin> make_histogram(const std::vector<double>& lossy, const std::vector<double>& lossless,
                                         int bins) {
    double top = 0.0;
    bool any = false;
    for (const auto* series : {&lossy, &lossless}) {
        for (double e : *series) {
            if (std::isfinite(e)) {
                top = std::max(top, e);
                any = true;
            }
        }
    }
    if (!any || bins < 1) {
        return {};
    }
    if (top == 0.0) top = 1e-12;
    const double width = top / bins;
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        out[static_cast<std::size_t>(b)].lo = b * width;
        out[static_cast<std::size_t>(b)].hi = b + 1 == bins ? top : (b + 1) * width;
    }
    auto slot = [&](double e) {
        const auto b = static_cast<int>(e / width);
        return static_cast<std::size_t>(std::clamp(b, 0, bins - 1));
    };
    for (double e : lossy) {
        if (std::isfinite(e)) ++out[slot(e)].count_lossy;
    }
    for (double e : lossless) {
        if (std::isfinite(e)) ++out[slot(e)].count_lossless;
    }
    return out;
}

double median(std::vector<double> values) {
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace powerdiv
