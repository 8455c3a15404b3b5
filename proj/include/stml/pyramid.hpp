#pragma once

// Spatial multilevel representation. Smoothing and restriction act on the
// spatial axes of each frame; the temporal axis is never touched.

#include <vector>

#include "stml/grid_image.hpp"

namespace stml {

struct SpatialPyramid {
    /// Ordered coarse -> fine; levels.back() is the input sequence.
    std::vector<ImageSequence> levels;

    int level_count() const { return static_cast<int>(levels.size()); }
    const ImageSequence& finest() const { return levels.back(); }
    const ImageSequence& coarsest() const { return levels.front(); }
};

/// Separable [1,2,1]/4 filter along every axis, half-sample reflective
/// boundaries.
Image smooth(const Image& image);

/// Block mean over 2^d cells; dims become ceil(dims/2), spacing doubles,
/// origin is kept. Trailing blocks of odd axes average the cells present.
Image restrict_image(const Image& image);

SpatialPyramid build_pyramid(const ImageSequence& seq, int level_count);

}  // namespace stml
