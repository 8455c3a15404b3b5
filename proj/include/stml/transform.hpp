#pragma once

// Affine-linear transforms y(x) = A x + b in world coordinates.
//
// Parameter vector layout: row-major vec(A) followed by b, length d*d + d.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stml/grid_image.hpp"

namespace stml {

struct Affine {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd translation;

    int dim() const { return static_cast<int>(translation.size()); }
    Eigen::VectorXd params() const;
    static Affine from_params(int d, const Eigen::Ref<const Eigen::VectorXd>& p);
    static int param_count(int d) { return d * d + d; }

    /// this(other(x))
    Affine compose(const Affine& other) const;
    Affine inverse() const;

    bool operator==(const Affine& o) const { return matrix == o.matrix && translation == o.translation; }
};

/// Throws std::invalid_argument unless d is 2 or 3.
Affine identity_affine(int d);

PointSet apply_affine(const Affine& t, const PointSet& points);

/// Output value at every cell center x equals sample(img, t(x)).
Image transform_image(const Image& img, const Affine& t);

/// Per-frame affines over a subset of the 1-based frame indices 1..n.
class AffineStack {
public:
    AffineStack(int frame_count, int dim);

    static AffineStack identity(int frame_count, int dim, std::span<const int> frames);
    static AffineStack identity(int frame_count, int dim);

    int frame_count() const { return frame_count_; }
    int dim() const { return dim_; }
    std::size_t size() const { return items_.size(); }
    bool contains(int k) const { return items_.count(k) != 0; }
    const Affine& at(int k) const { return items_.at(k); }
    void set(int k, Affine t);
    std::vector<int> indices() const;
    const std::map<int, Affine>& items() const { return items_; }

    /// Sub-stack on the given frames; all must be present.
    AffineStack restricted(std::span<const int> frames) const;

    bool operator==(const AffineStack&) const = default;

private:
    int frame_count_;
    int dim_;
    std::map<int, Affine> items_;
};

double stack_norm(const AffineStack& y);
/// Norm of the parameter difference over the frames both stacks contain.
/// Throws std::invalid_argument on dimension or frame-count mismatch.
double stack_diff_norm(const AffineStack& a, const AffineStack& b);

/// Text form: one line per frame, "k: a11 a12 ... b1 b2 [b3]".
void write_stack(std::ostream& os, const AffineStack& y);
AffineStack read_stack(std::istream& is, int frame_count);
void write_stack(const std::filesystem::path& path, const AffineStack& y);
AffineStack read_stack(const std::filesystem::path& path, int frame_count);

}  // namespace stml
