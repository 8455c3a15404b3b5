#include "stml/optimizer.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace stml {

void OptimOptions::validate() const {
    if (memory < 1 || max_iters < 1 || max_backtracks < 1) {
        throw std::invalid_argument("OptimOptions: counts must be positive");
    }
    if (!(grad_tol > 0.0) || !(step_tol > 0.0) || !(initial_scale > 0.0)) {
        throw std::invalid_argument("OptimOptions: tolerances must be positive");
    }
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw std::invalid_argument("OptimOptions: need 0 < c1 < 1");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
        throw std::invalid_argument("OptimOptions: need 0 < backtrack factor < 1");
    }
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::grad_tol: return "grad_tol";
        case StopReason::step_tol: return "step_tol";
        case StopReason::max_iters: return "max_iters";
        case StopReason::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

namespace {

struct CurvaturePair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

Eigen::VectorXd two_loop(const std::deque<CurvaturePair>& pairs, const Eigen::VectorXd& g, double gamma) {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
        alpha[i] = pairs[i].rho * pairs[i].s.dot(q);
        q -= alpha[i] * pairs[i].y;
    }
    q *= gamma;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double beta = pairs[i].rho * pairs[i].y.dot(q);
        q += (alpha[i] - beta) * pairs[i].s;
    }
    return -q;
}

bool finite(const ObjectiveEval& e) {
    return std::isfinite(e.value) && e.gradient.allFinite();
}

}  // namespace

OptimResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0, const OptimOptions& opts,
                           const IterationSink& sink) {
    opts.validate();
    OptimResult res;
    res.x = x0;
    res.scale = opts.initial_scale;

    ObjectiveEval cur = objective(x0);
    res.objective_evaluations = 1;
    if (!finite(cur)) throw std::domain_error("lbfgs_minimize: objective not finite at x0");
    if (cur.gradient.size() != x0.size()) throw std::invalid_argument("lbfgs_minimize: gradient size mismatch");
    res.f = cur.value;
    res.initial_value = cur.value;

    const double reference = opts.grad_reference.value_or(cur.gradient.lpNorm<Eigen::Infinity>());
    std::deque<CurvaturePair> pairs;

    if (sink) sink({0, cur.value, cur.gradient.lpNorm<Eigen::Infinity>(), 0.0, 1});

    while (true) {
        if (cur.gradient.lpNorm<Eigen::Infinity>() <= opts.grad_tol * reference) {
            res.reason = StopReason::grad_tol;
            break;
        }
        if (res.iterations >= opts.max_iters) {
            res.reason = StopReason::max_iters;
            break;
        }

        Eigen::VectorXd dir = two_loop(pairs, cur.gradient, res.scale);
        double slope = cur.gradient.dot(dir);
        if (!(slope < 0.0)) {
            pairs.clear();
            dir = -res.scale * cur.gradient;
            slope = cur.gradient.dot(dir);
        }

        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new;
        ObjectiveEval trial;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            x_new = res.x + step * dir;
            trial = objective(x_new);
            ++res.objective_evaluations;
            if (finite(trial) && trial.value <= cur.value + opts.armijo_c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= opts.backtrack_factor;
        }
        if (!accepted) {
            res.reason = StopReason::line_search_failure;
            break;
        }

        Eigen::VectorXd s = x_new - res.x;
        Eigen::VectorXd y = trial.gradient - cur.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            res.scale = sy / y.squaredNorm();
            pairs.push_back({s, y, 1.0 / sy});
            if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
        } else {
            pairs.clear();
        }

        const double x_scale = 1.0 + res.x.lpNorm<Eigen::Infinity>();
        res.x = std::move(x_new);
        cur = std::move(trial);
        res.f = cur.value;
        ++res.iterations;
        if (sink) {
            sink({res.iterations, cur.value, cur.gradient.lpNorm<Eigen::Infinity>(), step,
                  res.objective_evaluations});
        }
        if (s.lpNorm<Eigen::Infinity>() <= opts.step_tol * x_scale) {
            res.reason = StopReason::step_tol;
            break;
        }
    }
    return res;
}

}  // namespace stml
