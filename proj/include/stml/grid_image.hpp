#pragma once

// Spatial grids, cell-centered scalar images, image sequences and the
// STSQ1 on-disk sequence format.
//
// Axis order: axis 0 is the fastest-varying axis of every value array.

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stml {

class Grid {
public:
    Grid(std::vector<int> dims, std::vector<double> spacing, std::vector<double> origin);

    int dim() const { return static_cast<int>(dims_.size()); }
    const std::vector<int>& dims() const { return dims_; }
    const std::vector<double>& spacing() const { return spacing_; }
    const std::vector<double>& origin() const { return origin_; }

    std::size_t cell_count() const;
    /// Product of the spacings (h_d).
    double cell_volume() const;
    /// Center of the domain in world coordinates.
    std::vector<double> center() const;
    /// Half of the domain extent per axis, in world units.
    std::vector<double> half_extent() const;

    bool operator==(const Grid&) const = default;

private:
    std::vector<int> dims_;
    std::vector<double> spacing_;
    std::vector<double> origin_;
};

/// Flat list of points of one spatial dimension; point i occupies
/// coords[i*dim .. i*dim+dim).
struct PointSet {
    int dim = 0;
    std::vector<double> coords;

    std::size_t size() const { return dim == 0 ? 0 : coords.size() / static_cast<std::size_t>(dim); }
    std::span<const double> operator[](std::size_t i) const {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

class Image {
public:
    Image(Grid grid, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const Image&) const = default;

private:
    Grid grid_;
    std::vector<double> values_;
};

class ImageSequence {
public:
    ImageSequence(std::vector<Image> frames, std::vector<double> times);

    std::size_t size() const { return frames_.size(); }
    const Grid& grid() const { return frames_.front().grid(); }
    /// Frame by 1-based index.
    const Image& frame(int k) const { return frames_.at(static_cast<std::size_t>(k - 1)); }
    /// Time by 1-based index.
    double time(int k) const { return times_.at(static_cast<std::size_t>(k - 1)); }
    const std::vector<Image>& frames() const { return frames_; }
    const std::vector<double>& times() const { return times_; }

    bool operator==(const ImageSequence&) const = default;

private:
    std::vector<Image> frames_;
    std::vector<double> times_;
};

/// World coordinates of all cell centers, in value-array order.
PointSet cell_centers(const Grid& grid);

/// Multilinear interpolation of cell-centered values. The grid is padded by
/// one ring of zero-valued ghost cells; points farther out evaluate to 0.
std::vector<double> sample(const Image& image, const PointSet& points);

/// Samples and spatial (world-coordinate) gradients. gradients has
/// points.size()*dim entries laid out like PointSet::coords.
struct SampledField {
    std::vector<double> values;
    std::vector<double> gradients;
};
SampledField sample_with_gradient(const Image& image, const PointSet& points);

class SequenceFormatError : public std::runtime_error {
public:
    enum class Kind { io, malformed_header, truncated_payload, dimension_mismatch };

    SequenceFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

void write_sequence(const ImageSequence& seq, const std::filesystem::path& path);
ImageSequence read_sequence(const std::filesystem::path& path);

}  // namespace stml
