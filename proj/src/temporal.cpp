#include "stml/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stml {

TemporalSchedule build_temporal_levels(int n, int coarsest_size) {
    if (n < 3) throw std::invalid_argument("build_temporal_levels: need n >= 3");
    if (coarsest_size < 3) throw std::invalid_argument("build_temporal_levels: coarsest_size must be >= 3");

    std::vector<std::vector<int>> fine_to_coarse;
    std::vector<int> cur(static_cast<std::size_t>(n));
    std::iota(cur.begin(), cur.end(), 1);
    fine_to_coarse.push_back(cur);

    while (static_cast<int>(cur.size()) > coarsest_size) {
        std::vector<int> next;
        for (std::size_t i = 0; i < cur.size(); i += 2) next.push_back(cur[i]);
        if (static_cast<int>(next.size()) < coarsest_size) break;
        if (next.back() != n) next.push_back(n);
        cur = std::move(next);
        fine_to_coarse.push_back(cur);
    }
    return TemporalSchedule{std::vector<std::vector<int>>(fine_to_coarse.rbegin(), fine_to_coarse.rend())};
}

AffineStack interpolate_linear(const AffineStack& y, std::span<const int> targets, std::span<const double> times) {
    const std::vector<int> known = y.indices();
    AffineStack out(y.frame_count(), y.dim());
    for (int k : targets) {
        if (y.contains(k)) {
            out.set(k, y.at(k));
            continue;
        }
        const auto right = std::upper_bound(known.begin(), known.end(), k);
        if (right == known.begin() || right == known.end()) {
            throw std::out_of_range("interpolate_linear: frame " + std::to_string(k) + " has no bracketing frames");
        }
        const int r = *right;
        const int l = *(right - 1);
        const double tl = times[static_cast<std::size_t>(l - 1)];
        const double tr = times[static_cast<std::size_t>(r - 1)];
        const double theta = (times[static_cast<std::size_t>(k - 1)] - tl) / (tr - tl);
        const Eigen::VectorXd p = (1.0 - theta) * y.at(l).params() + theta * y.at(r).params();
        out.set(k, Affine::from_params(y.dim(), p));
    }
    return out;
}

AffineStack linear_predict(const AffineStack& y, const TemporalSchedule& schedule, int q,
                           std::span<const double> times) {
    if (q < 0 || q >= schedule.finest_level()) throw std::out_of_range("linear_predict: no finer temporal level");
    return interpolate_linear(y, schedule.levels[static_cast<std::size_t>(q + 1)], times);
}

std::vector<double> thomas_solve(const TridiagSystem& sys) {
    const std::size_t n = sys.diag.size();
    if (n == 0 || sys.rhs.size() != n || sys.sub.size() + 1 != n || sys.super.size() + 1 != n) {
        throw std::invalid_argument("thomas_solve: inconsistent system lengths");
    }
    double scale = 0.0;
    for (double d : sys.diag) scale = std::max(scale, std::abs(d));
    const double tiny = 1e-14 * scale;

    std::vector<double> c(n, 0.0);
    std::vector<double> x(n);
    double pivot = sys.diag[0];
    if (!(std::abs(pivot) >= tiny) || pivot == 0.0) throw SingularSystemError("thomas_solve: zero pivot at row 0");
    if (n > 1) c[0] = sys.super[0] / pivot;
    x[0] = sys.rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = sys.diag[i] - sys.sub[i - 1] * c[i - 1];
        if (!(std::abs(pivot) >= tiny) || pivot == 0.0) {
            throw SingularSystemError("thomas_solve: zero pivot at row " + std::to_string(i));
        }
        if (i + 1 < n) c[i] = sys.super[i] / pivot;
        x[i] = (sys.rhs[i] - sys.sub[i - 1] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
}

TridiagSystem assemble_ls_system(std::span<const int> active, std::span<const double> eta,
                                 std::span<const double> ref, double beta) {
    const std::size_t n = ref.size();
    if (!(beta > 0.0)) throw std::invalid_argument("ls_predict: beta must be positive");
    if (active.empty()) throw std::invalid_argument("ls_predict: no registered frames");
    if (eta.size() != active.size()) throw std::invalid_argument("ls_predict: eta must align with active frames");

    TridiagSystem sys{std::vector<double>(n ? n - 1 : 0, -beta), std::vector<double>(n, 0.0),
                      std::vector<double>(n ? n - 1 : 0, -beta), std::vector<double>(n, 0.0)};
    for (std::size_t k = 0; k + 1 < n; ++k) {
        // One smoothness term per consecutive pair (k, k+1).
        const double dref = ref[k + 1] - ref[k];
        sys.diag[k] += beta;
        sys.diag[k + 1] += beta;
        sys.rhs[k] -= beta * dref;
        sys.rhs[k + 1] += beta * dref;
    }
    for (std::size_t i = 0; i < active.size(); ++i) {
        const int k = active[i];
        if (k < 1 || static_cast<std::size_t>(k) > n) throw std::out_of_range("ls_predict: frame index out of range");
        sys.diag[static_cast<std::size_t>(k - 1)] += 1.0;
        sys.rhs[static_cast<std::size_t>(k - 1)] += eta[i];
    }
    return sys;
}

std::vector<double> ls_predict_component(std::span<const int> active, std::span<const double> eta,
                                         std::span<const double> ref, double beta) {
    return thomas_solve(assemble_ls_system(active, eta, ref, beta));
}

AffineStack ls_predict(const AffineStack& eta, const AffineStack& ref, double beta) {
    const int n = ref.frame_count();
    const int d = ref.dim();
    if (eta.dim() != d || eta.frame_count() != n) throw std::invalid_argument("ls_predict: stack shape mismatch");
    if (static_cast<int>(ref.size()) != n) throw std::invalid_argument("ls_predict: ref must cover all frames");

    const std::vector<int> active = eta.indices();
    const int np = Affine::param_count(d);
    std::vector<Eigen::VectorXd> ref_params;
    std::vector<Eigen::VectorXd> eta_params;
    for (int k = 1; k <= n; ++k) ref_params.push_back(ref.at(k).params());
    for (int k : active) eta_params.push_back(eta.at(k).params());

    std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(n), Eigen::VectorXd(np));
    std::vector<double> r(static_cast<std::size_t>(n));
    std::vector<double> e(active.size());
    for (int c = 0; c < np; ++c) {
        for (int k = 0; k < n; ++k) r[static_cast<std::size_t>(k)] = ref_params[static_cast<std::size_t>(k)](c);
        for (std::size_t i = 0; i < active.size(); ++i) e[i] = eta_params[i](c);
        const std::vector<double> z = ls_predict_component(active, e, r, beta);
        for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)](c) = z[static_cast<std::size_t>(k)];
    }

    AffineStack result(n, d);
    for (int k = 1; k <= n; ++k) result.set(k, Affine::from_params(d, out[static_cast<std::size_t>(k - 1)]));
    return result;
}

bool check_stop(const StoppingPolicy& policy, std::span<const LevelRun> history, const AffineStack& y_prev,
                const AffineStack& y_curr, const StopReference& reference) {
    if (history.size() < 2) throw std::invalid_argument("check_stop: need at least two completed temporal levels");
    if (policy.mode == StopMode::dissimilarity) {
        const double d0 = reference.dissimilarity;
        const double dq = history.back().dissimilarity_all;
        const double dprev = history[history.size() - 2].dissimilarity_all;
        return std::abs(dq - dprev) <= policy.eps * std::abs(d0);
    }
    return stack_diff_norm(y_curr, y_prev) <= policy.eps * reference.parameter_norm;
}

}  // namespace stml
