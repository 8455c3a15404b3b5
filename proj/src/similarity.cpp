#include "stml/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "stml/detail/parallel.hpp"

namespace stml {

TimeInterval default_interval(std::span<const double> times) {
    if (times.empty()) throw std::invalid_argument("default_interval: no times");
    if (times.size() == 1) return {times.front() - 0.5, times.front() + 0.5};
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    return {times.front() - 0.5 * dt, times.back() + 0.5 * dt};
}

std::vector<double> quad_weights(std::span<const double> times, double a, double b) {
    const std::size_t n = times.size();
    if (n == 0) throw std::invalid_argument("quad_weights: no times");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("quad_weights: times not increasing");
    }
    if (a > times.front() || times.back() > b) throw std::invalid_argument("quad_weights: times outside [a, b]");
    if (n == 1) return {b - a};

    std::vector<double> w(n);
    w[0] = (times[0] - a) + 0.5 * (times[1] - times[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) w[i] = 0.5 * (times[i + 1] - times[i - 1]);
    w[n - 1] = 0.5 * (times[n - 1] - times[n - 2]) + (b - times[n - 1]);
    return w;
}

Feature feature(std::span<const double> intensities) {
    const std::size_t m = intensities.size();
    if (m < 2) throw std::invalid_argument("feature: need at least two values");
    const double mean = std::accumulate(intensities.begin(), intensities.end(), 0.0) / static_cast<double>(m);
    Feature f;
    f.values.resize(m);
    double sq = 0.0;
    double vmax = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        f.values[i] = intensities[i] - mean;
        sq += f.values[i] * f.values[i];
        vmax = std::max(vmax, std::abs(intensities[i]));
    }
    f.norm = std::sqrt(sq);
    if (f.norm < 1e-12 * std::sqrt(static_cast<double>(m)) * (1.0 + vmax)) {
        std::fill(f.values.begin(), f.values.end(), 0.0);
        f.degenerate = true;
        return f;
    }
    for (double& v : f.values) v /= f.norm;
    return f;
}

namespace {

struct FrameSample {
    Feature feat;
    std::vector<double> spatial_gradients;  // m * d, empty unless requested
};

void check_subset(const AffineStack& y, std::span<const int> subset, std::span<const double> weights) {
    if (subset.empty()) throw std::invalid_argument("similarity: empty subset");
    if (weights.size() != subset.size()) throw std::invalid_argument("similarity: one weight per frame required");
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i > 0 && subset[i] <= subset[i - 1]) throw std::invalid_argument("similarity: subset must be increasing");
        if (!y.contains(subset[i])) throw std::invalid_argument("similarity: transform missing for a subset frame");
    }
}

std::vector<FrameSample> sample_frames(const ImageSequence& level, const AffineStack& y,
                                       std::span<const int> subset, bool with_gradient, int threads) {
    const PointSet centers = cell_centers(level.grid());
    std::vector<FrameSample> out(subset.size());
    detail::parallel_for(subset.size(), threads, [&](std::size_t i) {
        const int k = subset[i];
        const PointSet pts = apply_affine(y.at(k), centers);
        if (with_gradient) {
            SampledField field = sample_with_gradient(level.frame(k), pts);
            out[i].feat = feature(field.values);
            out[i].spatial_gradients = std::move(field.gradients);
        } else {
            out[i].feat = feature(sample(level.frame(k), pts));
        }
    });
    return out;
}

CorrelationState assemble_state(std::vector<FrameSample>& frames, std::span<const int> subset,
                                std::span<const double> weights, double cell_volume) {
    const std::size_t s = subset.size();
    const auto m = static_cast<Eigen::Index>(frames.front().feat.values.size());
    CorrelationState st;
    st.subset.assign(subset.begin(), subset.end());
    st.weights.assign(weights.begin(), weights.end());
    st.cell_volume = cell_volume;
    st.features.resize(m, static_cast<Eigen::Index>(s));
    st.norms.resize(s);
    st.degenerate.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        st.features.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(frames[i].feat.values.data(), m);
        st.norms[i] = frames[i].feat.norm;
        st.degenerate[i] = frames[i].feat.degenerate;
    }
    st.correlation.resize(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s); ++i) {
        st.correlation(i, i) = st.degenerate[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
        for (Eigen::Index j = i + 1; j < static_cast<Eigen::Index>(s); ++j) {
            const double rho = st.features.col(i).dot(st.features.col(j));
            st.correlation(i, j) = rho;
            st.correlation(j, i) = rho;
        }
    }
    return st;
}

// Gradient for column kk given the resampled spatial gradients of that frame.
Eigen::VectorXd frame_gradient(const CorrelationState& st, std::size_t kk, const PointSet& centers,
                               const std::vector<double>& spatial_gradients) {
    const int d = centers.dim;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(Affine::param_count(d));
    if (st.degenerate[kk]) return g;

    const auto k = static_cast<Eigen::Index>(kk);
    const Eigen::Index m = st.features.rows();
    // dD/df_k
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < st.features.cols(); ++i) {
        if (i == k) continue;
        r += (st.weights[static_cast<std::size_t>(i)] * st.correlation(i, k)) * st.features.col(i);
    }
    r *= -4.0 * st.cell_volume * st.weights[kk];

    // Back through normalization and centering.
    const auto f = st.features.col(k);
    Eigen::VectorXd s = (r - f * f.dot(r)) / st.norms[kk];
    s.array() -= s.mean();

    for (Eigen::Index c = 0; c < m; ++c) {
        const double* grad = spatial_gradients.data() + c * d;
        const auto x = centers[static_cast<std::size_t>(c)];
        for (int i = 0; i < d; ++i) {
            const double sg = s(c) * grad[i];
            for (int j = 0; j < d; ++j) g(i * d + j) += sg * x[j];
            g(d * d + i) += sg;
        }
    }
    return g;
}

}  // namespace

CorrelationState correlation_state(const ImageSequence& level, const AffineStack& y, std::span<const int> subset,
                                   std::span<const double> weights, double cell_volume, EvalOptions opts) {
    check_subset(y, subset, weights);
    auto frames = sample_frames(level, y, subset, false, opts.threads);
    return assemble_state(frames, subset, weights, cell_volume);
}

double dissimilarity(const CorrelationState& state) {
    const auto s = state.correlation.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = 0; j < s; ++j) {
            if (i == j) continue;
            const double rho = state.correlation(i, j);
            total += state.weights[static_cast<std::size_t>(i)] * state.weights[static_cast<std::size_t>(j)] *
                     (1.0 - rho * rho);
        }
    }
    return state.cell_volume * total;
}

std::vector<Eigen::VectorXd> dissimilarity_gradient(const CorrelationState& state, const ImageSequence& level,
                                                    const AffineStack& y, EvalOptions opts) {
    const PointSet centers = cell_centers(level.grid());
    std::vector<Eigen::VectorXd> out(state.subset.size());
    detail::parallel_for(state.subset.size(), opts.threads, [&](std::size_t i) {
        const int k = state.subset[i];
        const SampledField field = sample_with_gradient(level.frame(k), apply_affine(y.at(k), centers));
        out[i] = frame_gradient(state, i, centers, field.gradients);
    });
    return out;
}

DissimilarityEval evaluate_dissimilarity(const ImageSequence& level, const AffineStack& y, std::span<const int> subset,
                                         std::span<const double> weights, double cell_volume, bool with_gradient,
                                         EvalOptions opts) {
    check_subset(y, subset, weights);
    auto frames = sample_frames(level, y, subset, with_gradient, opts.threads);
    const CorrelationState st = assemble_state(frames, subset, weights, cell_volume);
    DissimilarityEval out{dissimilarity(st), {}};
    if (with_gradient) {
        const PointSet centers = cell_centers(level.grid());
        out.gradient.resize(subset.size());
        detail::parallel_for(subset.size(), opts.threads, [&](std::size_t i) {
            out.gradient[i] = frame_gradient(st, i, centers, frames[i].spatial_gradients);
        });
    }
    return out;
}

Decomposition decompose(const ImageSequence& level, const AffineStack& y, std::span<const int> subset,
                        std::span<const double> weights, double cell_volume, std::span<const int> part) {
    std::vector<bool> in_part(subset.size(), false);
    std::size_t found = 0;
    for (int k : part) {
        const auto it = std::find(subset.begin(), subset.end(), k);
        if (it == subset.end()) throw std::invalid_argument("decompose: part is not contained in the subset");
        const auto idx = static_cast<std::size_t>(it - subset.begin());
        if (in_part[idx]) throw std::invalid_argument("decompose: duplicate frame in part");
        in_part[idx] = true;
        ++found;
    }
    if (found == 0 || found == subset.size()) {
        throw std::invalid_argument("decompose: part must be a nonempty proper subset");
    }

    const CorrelationState st = correlation_state(level, y, subset, weights, cell_volume);
    Decomposition out;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        for (std::size_t j = 0; j < subset.size(); ++j) {
            if (i == j) continue;
            const double rho = st.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double term = cell_volume * st.weights[i] * st.weights[j] * (1.0 - rho * rho);
            if (in_part[i] && in_part[j]) out.within += term;
            else if (!in_part[i] && !in_part[j]) out.remainder += term;
            else out.mixed += term;
        }
    }
    return out;
}

double min_consecutive_rho(const ImageSequence& seq, const AffineStack& y) {
    const int n = static_cast<int>(seq.size());
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 1);
    const std::vector<double> ones(all.size(), 1.0);
    const CorrelationState st = correlation_state(seq, y, all, ones, 1.0);
    double best = 1.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) best = std::min(best, st.correlation(i, i + 1));
    return best;
}

}  // namespace stml
