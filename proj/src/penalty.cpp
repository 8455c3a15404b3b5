#include "stml/penalty.hpp"

#include <stdexcept>

namespace stml {

namespace {

Eigen::VectorXd mean_drift(const AffineStack& y) {
    if (y.size() == 0) throw std::invalid_argument("penalty: empty stack");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(Affine::param_count(y.dim()));
    for (const auto& [k, t] : y.items()) mean += t.params();
    mean /= static_cast<double>(y.size());
    return mean - identity_affine(y.dim()).params();
}

}  // namespace

double penalty_value(const AffineStack& y, double lambda) {
    return lambda * mean_drift(y).squaredNorm();
}

std::vector<Eigen::VectorXd> penalty_gradient(const AffineStack& y, double lambda) {
    const Eigen::VectorXd g = (2.0 * lambda / static_cast<double>(y.size())) * mean_drift(y);
    return std::vector<Eigen::VectorXd>(y.size(), g);
}

}  // namespace stml
