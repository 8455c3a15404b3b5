#pragma once

// Temporal multilevel machinery: nested frame subsets, predictors that carry
// transforms from a coarse frame subset to all frames, and stopping rules.

#include <span>
#include <stdexcept>
#include <vector>

#include "stml/optimizer.hpp"
#include "stml/transform.hpp"

namespace stml {

/// Nested subsets K_0 c K_1 c ... c K_T of 1-based frame indices, coarse to
/// fine. K_T = {1..n}; every level contains 1 and n.
struct TemporalSchedule {
    std::vector<std::vector<int>> levels;

    int frame_count() const { return static_cast<int>(levels.back().size()); }
    int finest_level() const { return static_cast<int>(levels.size()) - 1; }
};

/// Binary-tree schedule: each coarser level keeps every second element of the
/// finer one plus the last frame. Coarsening stops once a level holds at most
/// coarsest_size frames, or when the kept elements (without the forced
/// endpoint) would number fewer than coarsest_size.
TemporalSchedule build_temporal_levels(int n, int coarsest_size);

/// Transforms on `targets`: injected where y has the frame, otherwise linear
/// in time between the nearest known neighbours (per affine parameter).
AffineStack interpolate_linear(const AffineStack& y, std::span<const int> targets, std::span<const double> times);

/// Prediction on K_{q+1} from transforms on K_q.
AffineStack linear_predict(const AffineStack& y, const TemporalSchedule& schedule, int q,
                           std::span<const double> times);

struct TridiagSystem {
    std::vector<double> sub;    ///< sub[i] = a(i+1, i)
    std::vector<double> diag;
    std::vector<double> super;  ///< super[i] = a(i, i+1)
    std::vector<double> rhs;
};

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thomas algorithm. Throws SingularSystemError when a pivot falls below
/// 1e-14 * max|diag|.
std::vector<double> thomas_solve(const TridiagSystem& sys);

/// Normal equations (M + beta L) zeta = M eta + beta L ref of
///   sum_{k in active} (zeta_k - eta_k)^2
///     + beta sum_{k=1}^{n-1} ((zeta_{k+1} - zeta_k) - (ref_{k+1} - ref_k))^2,
/// with M the 0/1 indicator of `active` and L the path-graph Laplacian.
/// `active` holds 1-based indices into ref; eta is aligned with active.
TridiagSystem assemble_ls_system(std::span<const int> active, std::span<const double> eta,
                                 std::span<const double> ref, double beta);

std::vector<double> ls_predict_component(std::span<const int> active, std::span<const double> eta,
                                         std::span<const double> ref, double beta);

/// Least-squares prediction for all frames, solved independently per affine
/// parameter. eta lives on the registered subset, ref on all frames.
AffineStack ls_predict(const AffineStack& eta, const AffineStack& ref, double beta);

enum class StopMode { dissimilarity, parameter };

struct StoppingPolicy {
    StopMode mode = StopMode::dissimilarity;
    double eps = 1e-3;
};

/// One registration at spatial level `spatial_level` and temporal level
/// `temporal_level` (K_q = active).
struct LevelRun {
    int spatial_level = 0;
    int temporal_level = 0;
    std::vector<int> active;
    AffineStack start;
    AffineStack solution;
    OptimResult result;
    double dissimilarity_before = 0.0;  ///< D over active at start
    double dissimilarity_after = 0.0;   ///< D over active at solution
    double dissimilarity_all = 0.0;     ///< D over all frames of the full-frame estimate
    int aux_evaluations = 0;            ///< reference and stopping-rule evaluations
    double wall_ms = 0.0;
    bool stopped = false;               ///< stopping rule fired after this run

    int total_evaluations() const { return result.objective_evaluations + aux_evaluations; }
};

/// Scales of the stopping tests at one spatial level.
struct StopReference {
    /// D over all frames at the starting stack of the spatial level.
    double dissimilarity = 0.0;
    /// Parameter norm of the previous spatial level's solution.
    double parameter_norm = 0.0;
};

/// history: runs of the current spatial level in order, at least two.
/// Dissimilarity mode: |D_q - D_{q-1}| <= eps |D_0| on dissimilarity_all.
/// Parameter mode: stack_diff_norm(y_curr, y_prev) <= eps * parameter_norm.
/// Throws std::invalid_argument on insufficient history.
bool check_stop(const StoppingPolicy& policy, std::span<const LevelRun> history, const AffineStack& y_prev,
                const AffineStack& y_curr, const StopReference& reference);

}  // namespace stml
