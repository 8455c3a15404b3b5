#include "stml/drivers.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "stml/penalty.hpp"

namespace stml {

SubsetObjective::SubsetObjective(const ImageSequence& level, std::vector<int> active, double lambda, EvalOptions opts)
    : level_(&level), active_(std::move(active)), cell_volume_(level.grid().cell_volume()), lambda_(lambda),
      opts_(opts) {
    const TimeInterval iv = default_interval(level.times());
    std::vector<double> t;
    t.reserve(active_.size());
    for (int k : active_) t.push_back(level.time(k));
    weights_ = quad_weights(t, iv.a, iv.b);
    const auto c = level.grid().center();
    const auto e = level.grid().half_extent();
    center_ = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    half_extent_ = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
}

double SubsetObjective::dissimilarity(const AffineStack& y) const {
    return evaluate_dissimilarity(*level_, y, active_, weights_, cell_volume_, false, opts_).value;
}

double SubsetObjective::value(const AffineStack& y) const {
    return dissimilarity(y) + penalty_value(y.restricted(active_), lambda_);
}

Eigen::VectorXd SubsetObjective::to_variables(const AffineStack& y) const {
    const int d = level_->grid().dim();
    const int np = Affine::param_count(d);
    Eigen::VectorXd z(np * static_cast<Eigen::Index>(active_.size()));
    for (std::size_t f = 0; f < active_.size(); ++f) {
        const Affine& t = y.at(active_[f]);
        auto zf = z.segment(static_cast<Eigen::Index>(f) * np, np);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) zf(i * d + j) = (t.matrix(i, j) - (i == j ? 1.0 : 0.0)) * half_extent_(j);
        }
        zf.tail(d) = t.matrix * center_ + t.translation - center_;
    }
    return z;
}

AffineStack SubsetObjective::from_variables(const Eigen::VectorXd& z) const {
    const int d = level_->grid().dim();
    const int np = Affine::param_count(d);
    AffineStack y(static_cast<int>(level_->size()), d);
    for (std::size_t f = 0; f < active_.size(); ++f) {
        const auto zf = z.segment(static_cast<Eigen::Index>(f) * np, np);
        Affine t{Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd(d)};
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) t.matrix(i, j) += zf(i * d + j) / half_extent_(j);
        }
        t.translation = center_ + zf.tail(d) - t.matrix * center_;
        y.set(active_[f], std::move(t));
    }
    return y;
}

Eigen::VectorXd SubsetObjective::chain(const Affine& t, const Eigen::VectorXd& gp) const {
    const int d = t.dim();
    Eigen::VectorXd gz(gp.size());
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) gz(i * d + j) = (gp(i * d + j) - gp(d * d + i) * center_(j)) / half_extent_(j);
    }
    gz.tail(d) = gp.tail(d);
    return gz;
}

ObjectiveEval SubsetObjective::evaluate(const Eigen::VectorXd& z) const {
    const AffineStack y = from_variables(z);
    const DissimilarityEval de = evaluate_dissimilarity(*level_, y, active_, weights_, cell_volume_, true, opts_);
    const auto pg = penalty_gradient(y, lambda_);
    const int np = Affine::param_count(y.dim());
    ObjectiveEval out{de.value + penalty_value(y, lambda_), Eigen::VectorXd(z.size())};
    for (std::size_t f = 0; f < active_.size(); ++f) {
        out.gradient.segment(static_cast<Eigen::Index>(f) * np, np) = chain(y.at(active_[f]), de.gradient[f] + pg[f]);
    }
    return out;
}

Eigen::VectorXd SubsetObjective::dissimilarity_gradient(const AffineStack& y) const {
    const DissimilarityEval de = evaluate_dissimilarity(*level_, y, active_, weights_, cell_volume_, true, opts_);
    const int np = Affine::param_count(y.dim());
    Eigen::VectorXd g(np * static_cast<Eigen::Index>(active_.size()));
    for (std::size_t f = 0; f < active_.size(); ++f) {
        g.segment(static_cast<Eigen::Index>(f) * np, np) = chain(y.at(active_[f]), de.gradient[f]);
    }
    return g;
}

int DriverResult::evaluations_at_level(int spatial_level) const {
    int total = 0;
    for (const auto& r : runs) {
        if (r.spatial_level == spatial_level) total += r.total_evaluations();
    }
    return total;
}

double DriverResult::wall_ms_at_level(int spatial_level) const {
    double total = 0.0;
    for (const auto& r : runs) {
        if (r.spatial_level == spatial_level) total += r.wall_ms;
    }
    return total;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<int> all_frames(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 1);
    return v;
}

struct SpatialLevelInfo {
    int index = 0;
    double unregistered = 0.0;
    /// ||grad D||_inf at identity over all frames, in optimizer variables.
    double grad_scale = 0.0;
    double max_weight_all = 1.0;
};

struct SolveOutput {
    AffineStack solution;
    OptimResult result;
    double dissimilarity_before;
    double dissimilarity_after;
};

// Shared registration machinery, so both drivers run identical solves.
class Engine {
public:
    Engine(const SpatialPyramid& pyramid, const RegistrationConfig& config)
        : pyramid_(pyramid), config_(config), n_(static_cast<int>(pyramid.finest().size())),
          d_(pyramid.finest().grid().dim()) {}

    int frame_count() const { return n_; }
    int dim() const { return d_; }
    double lambda() const { return lambda_; }
    const ImageSequence& level(int l) const { return pyramid_.levels[static_cast<std::size_t>(l)]; }
    EvalOptions eval_options() const { return {config_.threads}; }

    // One evaluation at identity; fixes lambda on the first call.
    SpatialLevelInfo begin_level(int l) {
        const ImageSequence& lvl = level(l);
        const std::vector<int> all = all_frames(n_);
        SubsetObjective obj(lvl, all, 0.0, eval_options());
        const AffineStack id = AffineStack::identity(n_, d_);
        const ObjectiveEval e = obj.evaluate(obj.to_variables(id));
        if (!lambda_set_) {
            const TimeInterval span = default_interval(lvl.times());
            const double extent = span.b - span.a;
            lambda_ = config_.lambda.value_or(config_.lambda_factor * lvl.grid().cell_volume() * extent * extent);
            lambda_set_ = true;
        }
        SpatialLevelInfo info;
        info.index = l;
        info.unregistered = e.value;
        info.grad_scale = e.gradient.lpNorm<Eigen::Infinity>();
        info.max_weight_all = *std::max_element(obj.weights().begin(), obj.weights().end());
        return info;
    }

    SolveOutput solve(const SpatialLevelInfo& info, const AffineStack& start, const std::vector<int>& active) {
        const ImageSequence& lvl = level(info.index);
        SubsetObjective obj(lvl, active, lambda_, eval_options());
        const double wmax = *std::max_element(obj.weights().begin(), obj.weights().end());
        const double h = obj.cell_volume();
        const double reference = info.grad_scale * wmax / info.max_weight_all;

        OptimOptions opts = config_.optim;
        opts.grad_reference = reference;
        if (have_scale_) {
            opts.initial_scale = scale_ * (scale_h_ * scale_w_) / (h * wmax);
        } else if (reference > 0.0) {
            opts.initial_scale = 1.0 / reference;
        }

        const Eigen::VectorXd z0 = obj.to_variables(start);
        OptimResult res = lbfgs_minimize([&obj](const Eigen::VectorXd& z) { return obj.evaluate(z); }, z0, opts);
        if (res.scale != opts.initial_scale) {
            have_scale_ = true;
            scale_ = res.scale;
            scale_h_ = h;
            scale_w_ = wmax;
        }

        AffineStack solution = obj.from_variables(res.x);
        const AffineStack start_on_active = start.restricted(active);
        const double d_before = res.initial_value - penalty_value(start_on_active, lambda_);
        const double d_after = res.f - penalty_value(solution, lambda_);
        return {std::move(solution), std::move(res), d_before, d_after};
    }

    double dissimilarity_all(int l, const AffineStack& y) const {
        SubsetObjective obj(level(l), all_frames(n_), lambda_, eval_options());
        return obj.dissimilarity(y);
    }

private:
    const SpatialPyramid& pyramid_;
    const RegistrationConfig& config_;
    int n_;
    int d_;
    double lambda_ = 0.0;
    bool lambda_set_ = false;
    bool have_scale_ = false;
    double scale_ = 1.0;
    double scale_h_ = 1.0;
    double scale_w_ = 1.0;
};

void validate(const SpatialPyramid& pyramid, const RegistrationConfig& config) {
    if (pyramid.levels.empty()) throw std::invalid_argument("driver: empty pyramid");
    if (!(config.beta > 0.0)) throw std::invalid_argument("driver: beta must be positive");
    if (config.lambda && !(*config.lambda >= 0.0)) throw std::invalid_argument("driver: lambda must be >= 0");
    if (!(config.stop.eps >= 0.0)) throw std::invalid_argument("driver: eps must be >= 0");
}

}  // namespace

DriverResult spml_run(const SpatialPyramid& pyramid, const RegistrationConfig& config) {
    validate(pyramid, config);
    Engine engine(pyramid, config);
    const int n = engine.frame_count();
    const std::vector<int> all = all_frames(n);

    std::optional<AffineStack> prev;
    DriverResult out{AffineStack::identity(n, engine.dim()), {}, {}, {}, 0.0};
    for (int l = 0; l < pyramid.level_count(); ++l) {
        const auto t0 = Clock::now();
        const SpatialLevelInfo info = engine.begin_level(l);
        const AffineStack start = prev ? *prev : AffineStack::identity(n, engine.dim());
        SolveOutput s = engine.solve(info, start, all);

        LevelRun run{l, 0, all, start, s.solution, s.result, s.dissimilarity_before, s.dissimilarity_after,
                     s.dissimilarity_after, 1, elapsed_ms(t0), false};
        out.unregistered_dissimilarity.push_back(info.unregistered);
        out.level_solutions.push_back(s.solution);
        out.runs.push_back(std::move(run));
        prev = std::move(s.solution);
    }
    out.transforms = *prev;
    out.lambda = engine.lambda();
    return out;
}

DriverResult stml_run(const SpatialPyramid& pyramid, const TemporalSchedule& schedule,
                      const RegistrationConfig& config) {
    validate(pyramid, config);
    Engine engine(pyramid, config);
    const int n = engine.frame_count();
    if (schedule.frame_count() != n) throw std::invalid_argument("stml_run: schedule does not match frame count");
    const int top = schedule.finest_level();
    const int finest_spatial = pyramid.level_count() - 1;
    const std::vector<double>& times = pyramid.finest().times();

    std::optional<AffineStack> prev_full;
    DriverResult out{AffineStack::identity(n, engine.dim()), {}, {}, {}, 0.0};

    for (int l = 0; l <= finest_spatial; ++l) {
        auto t0 = Clock::now();
        const SpatialLevelInfo info = engine.begin_level(l);
        int pending_aux = 1;

        std::vector<LevelRun> history;
        const std::vector<int>& k0 = schedule.levels.front();
        AffineStack start = prev_full ? prev_full->restricted(k0) : AffineStack::identity(n, engine.dim(), k0);
        std::optional<AffineStack> ls_ref = prev_full;
        std::optional<AffineStack> level_result;
        StopReference reference;
        std::optional<double> reference_norm;
        if (prev_full) reference_norm = stack_norm(*prev_full);
        if (config.stop.mode == StopMode::dissimilarity) {
            if (prev_full) {
                reference.dissimilarity = engine.dissimilarity_all(l, *prev_full);
                ++pending_aux;
            } else {
                reference.dissimilarity = info.unregistered;
            }
        }

        int q = 0;
        while (true) {
            const std::vector<int>& active = schedule.levels[static_cast<std::size_t>(q)];
            SolveOutput s = engine.solve(info, start, active);

            // Full-frame estimate from the current subset.
            std::optional<AffineStack> full;
            double d_all = s.dissimilarity_after;
            if (q == top) {
                full = s.solution;
            } else {
                full = ls_ref ? ls_predict(s.solution, *ls_ref, config.beta)
                              : interpolate_linear(s.solution, all_frames(n), times);
                d_all = engine.dissimilarity_all(l, *full);
                ++pending_aux;
            }
            if (!reference_norm) reference_norm = stack_norm(*full);

            history.push_back(LevelRun{l, q, active, start, s.solution, s.result, s.dissimilarity_before,
                                       s.dissimilarity_after, d_all, pending_aux, 0.0, false});
            pending_aux = 0;

            bool stop = false;
            if (q >= 1 && q < top) {
                const LevelRun& before = history[history.size() - 2];
                reference.parameter_norm = *reference_norm;
                stop = check_stop(config.stop, history, before.solution, s.solution, reference);
                history.back().stopped = stop;
            }
            history.back().wall_ms = elapsed_ms(t0);
            t0 = Clock::now();

            if (q == top || (stop && l != finest_spatial)) {
                level_result = std::move(full);
                break;
            }
            const int next_q = stop ? top : q + 1;
            start = full->restricted(schedule.levels[static_cast<std::size_t>(next_q)]);
            if (ls_ref) ls_ref = *full;
            q = next_q;
        }

        out.unregistered_dissimilarity.push_back(info.unregistered);
        out.level_solutions.push_back(*level_result);
        for (auto& r : history) out.runs.push_back(std::move(r));
        prev_full = std::move(level_result);
    }
    out.transforms = *prev_full;
    out.lambda = engine.lambda();
    return out;
}

}  // namespace stml
