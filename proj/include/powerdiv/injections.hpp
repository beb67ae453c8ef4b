#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "powerdiv/network.hpp"
#include "powerdiv/power_flow.hpp"
#include "powerdiv/sensitivity.hpp"

namespace powerdiv {

/// Desired active flows on a set of lines together with their alpha rows.
struct FlowTargetSet {
    std::vector<LineKey> lines;
    Eigen::VectorXd p_ref;
    Eigen::MatrixXd a;  // one alpha row per line
};

/// Builds A from the cache. Throws Error{Usage} on size mismatch or no lines.
FlowTargetSet make_targets(const SensitivityCache& cache, std::vector<LineKey> lines, Eigen::VectorXd p_ref);

struct InjectionSolution {
    Eigen::VectorXd p;
    double lambda = 0.0;
    double residual_norm = 0.0;  // ||A P - P_D||_2
    double balance = 0.0;        // 1^T P
    bool fewer_targets_than_buses = false;
};

/// min ||A P - P_D||^2  s.t.  1^T P = total_loss, through the KKT system
///
///   [2 A^T A  1] [P     ]   [2 A^T P_D ]
///   [1^T      0] [lambda] = [total_loss]
///
/// Throws Error{Singular} naming the null directions when [A; 1^T] lacks full
/// column rank.
InjectionSolution solve_targets(const FlowTargetSet& targets, double total_loss);

/// Expected loss per target line: (P^r)^2 Re{1/y_mn}.
Eigen::VectorXd estimate_line_losses(const NetworkCase& net, const FlowTargetSet& targets);

/// solve_targets with total_loss = sum of estimate_line_losses.
InjectionSolution solve_targets_lossy(const NetworkCase& net, const FlowTargetSet& targets);

/// Nonlinear check of a set of injections: every non-slack bus gets its entry of
/// `p`, the slack absorbs the mismatch, Q schedules and setpoints are kept.
struct Realization {
    OperatingPoint op;
    Eigen::VectorXd achieved;  // P_(m,n) on the target lines
    double error_norm = 0.0;   // ||achieved - P_D||_2
};

Realization realize_injections(const NetworkCase& net, const FlowTargetSet& targets, const Eigen::VectorXd& p,
                               const SolverOptions& options = {});

struct ExperimentConfig {
    int trials = 5000;
    std::uint64_t seed = 1;
    int bins = 50;
    unsigned threads = 1;
    /// Replaces the random draw; used to measure the unperturbed error floor.
    std::optional<double> fixed_sigma;
};

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    int count_lossy = 0;
    int count_lossless = 0;
};

struct ExperimentResult {
    // NaN where the re-solve did not converge
    std::vector<double> errors_lossy;
    std::vector<double> errors_lossless;
    int nonconvergent_lossy = 0;
    int nonconvergent_lossless = 0;
    std::vector<HistogramBin> histogram;
};

/// Perturbs every line flow of the solved base case by (1 + sigma), sigma ~ U(-1, 1)
/// drawn per line and trial, fits injections with both loss models and re-solves
/// the power flow. Trial t draws from its own stream seeded by (seed, t), so the
/// output does not depend on `threads`.
ExperimentResult perturbation_experiment(const NetworkCase& net, const ExperimentConfig& config);

/// Shared equal-width bins over [0, max error]; non-finite errors are skipped.
std::vector<HistogramBin> make_histogram(const std::vector<double>& lossy, const std::vector<double>& lossless,
                                         int bins);

double median(std::vector<double> values);

}  // namespace powerdiv
