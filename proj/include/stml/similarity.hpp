#pragma once

// Correlation-based groupwise dissimilarity
//
//   D = h_d * sum_{i != j in S} w_i w_j (1 - rho_ij^2),  rho_ij = <f_i, f_j>,
//
// where f_k is the centered, unit-normalized intensity vector of frame k after
// resampling with its affine transform, w are temporal trapezoidal weights and
// h_d is the spatial cell volume. D is zero iff all frames are perfectly
// (anti-)correlated.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stml/grid_image.hpp"
#include "stml/transform.hpp"

namespace stml {

struct TimeInterval {
    double a;
    double b;
};

/// [t_1 - dt/2, t_n + dt/2] with dt the mean sample spacing.
TimeInterval default_interval(std::span<const double> times);

/// Trapezoidal weights on [a, b]; they sum to b - a.
std::vector<double> quad_weights(std::span<const double> times, double a, double b);

struct Feature {
    std::vector<double> values;
    /// Norm of the centered intensities before normalization.
    double norm = 0.0;
    bool degenerate = false;
};

/// Centered and normalized intensities. Near-constant input yields the zero
/// vector with degenerate set.
Feature feature(std::span<const double> intensities);

struct EvalOptions {
    int threads = 1;
};

struct CorrelationState {
    std::vector<int> subset;
    /// One column per frame of subset.
    Eigen::MatrixXd features;
    Eigen::MatrixXd correlation;
    std::vector<double> weights;
    std::vector<double> norms;
    std::vector<bool> degenerate;
    double cell_volume = 1.0;
};

CorrelationState correlation_state(const ImageSequence& level, const AffineStack& y, std::span<const int> subset,
                                   std::span<const double> weights, double cell_volume, EvalOptions opts = {});

double dissimilarity(const CorrelationState& state);

/// dD/dp_k for every frame of state.subset, in subset order.
std::vector<Eigen::VectorXd> dissimilarity_gradient(const CorrelationState& state, const ImageSequence& level,
                                                    const AffineStack& y, EvalOptions opts = {});

struct DissimilarityEval {
    double value = 0.0;
    std::vector<Eigen::VectorXd> gradient;
};

/// Value and (optionally) gradient in one resampling pass per frame.
DissimilarityEval evaluate_dissimilarity(const ImageSequence& level, const AffineStack& y, std::span<const int> subset,
                                         std::span<const double> weights, double cell_volume, bool with_gradient,
                                         EvalOptions opts = {});

struct Decomposition {
    double within = 0.0;     ///< pairs inside the split-off part
    double remainder = 0.0;  ///< pairs inside the rest of the subset
    double mixed = 0.0;      ///< cross pairs
    double total() const { return within + remainder + mixed; }
};

/// Splits D over `subset` into the three pair classes induced by `part`.
/// `part` must be a nonempty proper subset of `subset`.
Decomposition decompose(const ImageSequence& level, const AffineStack& y, std::span<const int> subset,
                        std::span<const double> weights, double cell_volume, std::span<const int> part);

/// min_i rho_{i,i+1} over all frames of the sequence.
double min_consecutive_rho(const ImageSequence& seq, const AffineStack& y);

}  // namespace stml
