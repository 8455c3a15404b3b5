#pragma once

// Drift penalty P(Y) = lambda * || mean_k p_k - p_Id ||^2 on the stacked
// affine parameter vectors. It only constrains the common motion of the group.

#include <vector>

#include <Eigen/Dense>

#include "stml/transform.hpp"

namespace stml {

double penalty_value(const AffineStack& y, double lambda);

/// dP/dp_k for every frame of y, in ascending frame order. All entries are
/// equal: 2 lambda / |K| * (mean - p_Id).
std::vector<Eigen::VectorXd> penalty_gradient(const AffineStack& y, double lambda);

}  // namespace stml
