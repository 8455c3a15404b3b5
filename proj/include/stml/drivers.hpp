#pragma once

// Multilevel registration drivers.
//
// spml_run: coarse-to-fine over spatial levels, every frame at every level.
// stml_run: additionally walks the temporal schedule at each spatial level,
//           predicting transforms for newly activated frames and correcting
//           them by registration.

#include <optional>
#include <span>
#include <vector>

#include "stml/optimizer.hpp"
#include "stml/pyramid.hpp"
#include "stml/similarity.hpp"
#include "stml/temporal.hpp"
#include "stml/transform.hpp"

namespace stml {

struct RegistrationConfig {
    double beta = 1e-5;
    /// Penalty weight; when unset it is lambda_factor * h * (b - a)^2 with h the
    /// cell volume of the coarsest spatial level and [a, b] the quadrature
    /// interval of the sequence.
    std::optional<double> lambda;
    double lambda_factor = 0.01;
    StoppingPolicy stop;
    OptimOptions optim;
    int threads = 1;
};

/// Groupwise objective on one spatial level restricted to a frame subset:
/// D over the subset plus the drift penalty over the subset.
class SubsetObjective {
public:
    SubsetObjective(const ImageSequence& level, std::vector<int> active, double lambda, EvalOptions opts = {});

    const std::vector<int>& active() const { return active_; }
    const std::vector<double>& weights() const { return weights_; }
    double cell_volume() const { return cell_volume_; }

    double dissimilarity(const AffineStack& y) const;
    double value(const AffineStack& y) const;

    /// Optimizer variables: per frame, the deviation of A from identity scaled
    /// by the domain half extent, then the displacement of the domain center.
    Eigen::VectorXd to_variables(const AffineStack& y) const;
    AffineStack from_variables(const Eigen::VectorXd& z) const;
    /// Objective and gradient in optimizer variables.
    ObjectiveEval evaluate(const Eigen::VectorXd& z) const;
    /// Gradient of D alone at y, in optimizer variables.
    Eigen::VectorXd dissimilarity_gradient(const AffineStack& y) const;

private:
    Eigen::VectorXd chain(const Affine&, const Eigen::VectorXd& grad_params) const;

    const ImageSequence* level_;
    std::vector<int> active_;
    std::vector<double> weights_;
    double cell_volume_;
    double lambda_;
    EvalOptions opts_;
    Eigen::VectorXd center_;
    Eigen::VectorXd half_extent_;
};

struct DriverResult {
    AffineStack transforms;
    std::vector<LevelRun> runs;
    /// Full-frame transforms at the end of each spatial level, coarse to fine.
    std::vector<AffineStack> level_solutions;
    /// D of all frames at identity, per spatial level.
    std::vector<double> unregistered_dissimilarity;
    double lambda = 0.0;

    int evaluations_at_level(int spatial_level) const;
    double wall_ms_at_level(int spatial_level) const;
};

DriverResult stml_run(const SpatialPyramid& pyramid, const TemporalSchedule& schedule,
                      const RegistrationConfig& config);

DriverResult spml_run(const SpatialPyramid& pyramid, const RegistrationConfig& config);

}  // namespace stml
