#include <numeric>
#include <random>

#include "doctest.h"
#include "stml/pyramid.hpp"

using namespace stml;

namespace {

Image line(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Image(Grid({n}, {1.0}, {0.0}), std::move(v));
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("smooth") {
    SUBCASE("constant") {
        const Image img(Grid({5, 4}, {1, 1}, {0, 0}), std::vector<double>(20, 3.0));
        const Image out = smooth(img);
        for (double v : out.values()) CHECK(v == doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("impulse") {
        const auto out = smooth(line({0, 0, 1, 0, 0})).values();
        const std::vector<double> expected{0, 0.25, 0.5, 0.25, 0};
        for (std::size_t i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(expected[i]));
    }
    SUBCASE("ramp interior unchanged") {
        // (0.25 (i-1) + 0.5 i + 0.25 (i+1)) = i
        const auto out = smooth(line({1, 3, 5, 7, 9, 11})).values();
        for (std::size_t i = 1; i + 1 < out.size(); ++i) CHECK(out[i] == doctest::Approx(1.0 + 2.0 * i));
    }
    SUBCASE("2-D separable ramp") {
        const Grid g({6, 5}, {1, 1}, {0, 0});
        std::vector<double> v;
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 6; ++i) v.push_back(2.0 * i - j);
        const auto out = smooth(Image(g, v)).values();
        for (int j = 1; j < 4; ++j)
            for (int i = 1; i < 5; ++i) CHECK(out[j * 6 + i] == doctest::Approx(2.0 * i - j));
    }
}

TEST_CASE("restrict") {
    CHECK(restrict_image(line({1, 3, 5, 7})).values() == std::vector<double>{2, 6});
    CHECK(restrict_image(line({1, 3, 5})).values() == std::vector<double>{2, 5});
    const Image c(Grid({6, 4}, {0.5, 1.0}, {1.0, 2.0}), std::vector<double>(24, -1.5));
    const Image r = restrict_image(c);
    CHECK(r.grid() == Grid({3, 2}, {1.0, 2.0}, {1.0, 2.0}));
    for (double v : r.values()) CHECK(v == -1.5);
}

TEST_CASE("restrict preserves the mean for even dims") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(8 * 6);
    for (auto& x : v) x = u(rng);
    const Image img(Grid({8, 6}, {1, 1}, {0, 0}), v);
    CHECK(mean(restrict_image(img).values()) == doctest::Approx(mean(v)).epsilon(1e-14));
}

TEST_CASE("build pyramid") {
    const Grid g({64, 64}, {1, 1}, {0, 0});
    std::vector<Image> frames;
    std::vector<double> times;
    for (int k = 0; k < 17; ++k) {
        frames.emplace_back(g, std::vector<double>(g.cell_count(), k));
        times.push_back(0.5 * k);
    }
    const ImageSequence seq(frames, times);

    const SpatialPyramid one = build_pyramid(seq, 1);
    REQUIRE(one.level_count() == 1);
    CHECK(one.finest() == seq);

    const SpatialPyramid p = build_pyramid(seq, 3);
    REQUIRE(p.level_count() == 3);
    CHECK(p.levels[0].grid().dims() == std::vector<int>{16, 16});
    CHECK(p.levels[1].grid().dims() == std::vector<int>{32, 32});
    CHECK(p.levels[2].grid().dims() == std::vector<int>{64, 64});
    CHECK(p.levels[0].grid().spacing() == std::vector<double>{4, 4});
    for (const auto& lvl : p.levels) {
        CHECK(lvl.size() == 17);
        CHECK(lvl.times() == times);
    }
    // frames stay separate: no mixing over time
    CHECK(p.levels[0].frame(5).values()[0] == doctest::Approx(4.0));

    CHECK_THROWS_AS(build_pyramid(seq, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_pyramid(seq, 6), std::invalid_argument);
}
