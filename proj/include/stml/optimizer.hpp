#pragma once

// Limited-memory BFGS with Armijo backtracking.

#include <functional>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace stml {

struct ObjectiveEval {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

using Objective = std::function<ObjectiveEval(const Eigen::VectorXd&)>;

struct OptimOptions {
    int memory = 5;
    int max_iters = 50;
    /// Stop once ||g||_inf <= grad_tol * reference, where reference is
    /// grad_reference if set and ||g(x0)||_inf otherwise.
    double grad_tol = 1e-4;
    std::optional<double> grad_reference;
    /// Stop once ||s||_inf <= step_tol * (1 + ||x||_inf).
    double step_tol = 1e-7;
    double armijo_c1 = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 20;
    /// Inverse-Hessian scale used before the first curvature pair exists.
    double initial_scale = 1.0;

    void validate() const;
};

enum class StopReason { grad_tol, step_tol, max_iters, line_search_failure };

std::string_view to_string(StopReason r);

struct OptimResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    int objective_evaluations = 0;
    StopReason reason = StopReason::max_iters;
    /// Objective value at x0.
    double initial_value = 0.0;
    /// Latest s'y / y'y, or initial_scale if no pair was accepted.
    double scale = 1.0;
};

struct IterationRecord {
    int iteration;
    double f;
    double grad_norm;
    double step;
    int evaluations;
};

using IterationSink = std::function<void(const IterationRecord&)>;

/// Throws std::domain_error if the objective is not finite at x0.
OptimResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0, const OptimOptions& opts = {},
                           const IterationSink& sink = {});

}  // namespace stml
