#include "stml/pyramid.hpp"

#include <stdexcept>
#include <string>

namespace stml {

namespace {

std::vector<std::size_t> strides_of(const std::vector<int>& dims) {
    std::vector<std::size_t> s(dims.size(), 1);
    for (std::size_t a = 1; a < dims.size(); ++a) s[a] = s[a - 1] * static_cast<std::size_t>(dims[a - 1]);
    return s;
}

}  // namespace

Image smooth(const Image& image) {
    const Grid& g = image.grid();
    const auto& dims = g.dims();
    const auto strides = strides_of(dims);
    std::vector<double> cur = image.values();
    std::vector<double> next(cur.size());

    for (std::size_t a = 0; a < dims.size(); ++a) {
        const std::size_t stride = strides[a];
        const int len = dims[a];
        for (std::size_t c = 0; c < cur.size(); ++c) {
            const int i = static_cast<int>((c / stride) % static_cast<std::size_t>(len));
            const double left = i > 0 ? cur[c - stride] : cur[c];
            const double right = i + 1 < len ? cur[c + stride] : cur[c];
            next[c] = 0.25 * left + 0.5 * cur[c] + 0.25 * right;
        }
        cur.swap(next);
    }
    return Image(g, std::move(cur));
}

Image restrict_image(const Image& image) {
    const Grid& g = image.grid();
    const int d = g.dim();
    std::vector<int> cdims(static_cast<std::size_t>(d));
    std::vector<double> cspacing(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        cdims[a] = (g.dims()[a] + 1) / 2;
        cspacing[a] = 2.0 * g.spacing()[a];
    }
    Grid coarse(cdims, cspacing, g.origin());

    std::vector<double> sums(coarse.cell_count(), 0.0);
    std::vector<int> counts(coarse.cell_count(), 0);
    const auto cstrides = strides_of(cdims);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t c = 0; c < image.values().size(); ++c) {
        std::size_t target = 0;
        for (int a = 0; a < d; ++a) target += static_cast<std::size_t>(idx[a] / 2) * cstrides[a];
        sums[target] += image.values()[c];
        counts[target] += 1;
        for (int a = 0; a < d; ++a) {
            if (++idx[a] < g.dims()[a]) break;
            idx[a] = 0;
        }
    }
    for (std::size_t c = 0; c < sums.size(); ++c) sums[c] /= counts[c];
    return Image(std::move(coarse), std::move(sums));
}

SpatialPyramid build_pyramid(const ImageSequence& seq, int level_count) {
    if (level_count < 1) throw std::invalid_argument("build_pyramid: level_count must be >= 1");
    for (int dim : seq.grid().dims()) {
        int coarse = dim;
        for (int l = 1; l < level_count; ++l) coarse = (coarse + 1) / 2;
        if (level_count > 1 && coarse < 4) {
            throw std::invalid_argument("build_pyramid: " + std::to_string(level_count) +
                                        " levels would shrink an axis of " + std::to_string(dim) +
                                        " cells below 4");
        }
    }

    std::vector<ImageSequence> levels;
    levels.push_back(seq);
    for (int l = 1; l < level_count; ++l) {
        const ImageSequence& fine = levels.back();
        std::vector<Image> frames;
        frames.reserve(fine.size());
        for (const auto& f : fine.frames()) frames.push_back(restrict_image(smooth(f)));
        levels.emplace_back(std::move(frames), fine.times());
    }
    return SpatialPyramid{std::vector<ImageSequence>(levels.rbegin(), levels.rend())};
}

}  // namespace stml
