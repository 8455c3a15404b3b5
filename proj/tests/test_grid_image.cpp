#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "stml/grid_image.hpp"

using namespace stml;
namespace fs = std::filesystem;

namespace {

std::vector<double> coords(const PointSet& p) { return p.coords; }

ImageSequence small_sequence() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Grid g({5, 4}, {0.5, 0.25}, {-1.0, 2.0});
    std::vector<Image> frames;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> v(g.cell_count());
        for (auto& x : v) x = static_cast<float>(u(rng));
        frames.emplace_back(g, v);
    }
    return ImageSequence(frames, {0.0, 0.5, 1.25});
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("stml_test_" + name); }

std::string read_all(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

void write_all(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    os << s;
}

}  // namespace

TEST_CASE("cell centers") {
    CHECK(coords(cell_centers(Grid({2}, {1.0}, {0.0}))) == std::vector<double>{0.5, 1.5});
    CHECK(coords(cell_centers(Grid({2, 2}, {0.5, 0.5}, {0.0, 0.0}))) ==
          std::vector<double>{0.25, 0.25, 0.75, 0.25, 0.25, 0.75, 0.75, 0.75});
    CHECK(coords(cell_centers(Grid({3}, {2.0}, {-3.0}))) == std::vector<double>{-2.0, 0.0, 2.0});
}

TEST_CASE("grid validation and volume") {
    CHECK_THROWS_AS(Grid({1, 4}, {1.0, 1.0}, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Grid({4, 4}, {1.0, 0.0}, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Grid({4, 4}, {1.0}, {0.0, 0.0}), std::invalid_argument);
    CHECK(Grid({4, 3, 2}, {0.5, 2.0, 3.0}, {0, 0, 0}).cell_volume() == doctest::Approx(3.0));
    CHECK_THROWS_AS(Image(Grid({2, 2}, {1, 1}, {0, 0}), {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("sequence validation") {
    const Grid g({2, 2}, {1, 1}, {0, 0});
    const Image a(g, {1, 2, 3, 4});
    CHECK_THROWS_AS(ImageSequence({a}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(ImageSequence({a, a}, {1.0, 1.0}), std::invalid_argument);
    const Image b(Grid({2, 2}, {2, 1}, {0, 0}), {1, 2, 3, 4});
    CHECK_THROWS_AS(ImageSequence({a, b}, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("sample") {
    SUBCASE("constant image") {
        const Grid g({4, 3}, {1.0, 2.0}, {0.0, 0.0});
        const Image img(g, std::vector<double>(12, 2.5));
        PointSet p{2, {0.5, 1.0, 2.2, 3.7, 3.5, 5.0, 1.9, 4.4}};
        for (double v : sample(img, p)) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));
    }
    SUBCASE("linear midpoint") {
        const Image img(Grid({2}, {1.0}, {0.0}), {0.0, 1.0});
        CHECK(sample(img, PointSet{1, {1.0}})[0] == doctest::Approx(0.5));
    }
    SUBCASE("far outside is zero") {
        const Grid g({3, 3}, {1.0, 1.0}, {0.0, 0.0});
        const Image img(g, std::vector<double>(9, 4.0));
        const auto v = sample(img, PointSet{2, {-1.6, 1.5, 1.5, 4.7, 10.0, 10.0}});
        CHECK(v == std::vector<double>{0.0, 0.0, 0.0});
    }
    SUBCASE("exact for affine intensities inside the hull") {
        const Grid g({5, 4}, {0.5, 1.5}, {1.0, -2.0});
        const PointSet c = cell_centers(g);
        std::vector<double> v;
        for (std::size_t i = 0; i < c.size(); ++i) v.push_back(3.0 * c[i][0] - 2.0 * c[i][1] + 0.7);
        const Image img(g, v);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ux(1.25, 3.25), uy(-1.25, 3.25);
        PointSet p{2, {}};
        for (int i = 0; i < 50; ++i) {
            p.coords.push_back(ux(rng));
            p.coords.push_back(uy(rng));
        }
        const auto s = sample(img, p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(s[i] == doctest::Approx(3.0 * p[i][0] - 2.0 * p[i][1] + 0.7).epsilon(1e-12));
        }
    }
    SUBCASE("gradient of a linear field") {
        const Grid g({4, 4}, {1.0, 1.0}, {0.0, 0.0});
        const PointSet c = cell_centers(g);
        std::vector<double> v;
        for (std::size_t i = 0; i < c.size(); ++i) v.push_back(2.0 * c[i][0] + 5.0 * c[i][1]);
        const auto f = sample_with_gradient(Image(g, v), PointSet{2, {1.3, 2.2}});
        CHECK(f.values[0] == doctest::Approx(13.6));
        CHECK(f.gradients[0] == doctest::Approx(2.0));
        CHECK(f.gradients[1] == doctest::Approx(5.0));
    }
}

TEST_CASE("sequence file round trip") {
    const ImageSequence s = small_sequence();
    const fs::path p = temp_file("roundtrip.stsq");
    write_sequence(s, p);
    CHECK(read_sequence(p) == s);
    fs::remove(p);
}

TEST_CASE("sequence file errors") {
    const ImageSequence s = small_sequence();
    const fs::path p = temp_file("errors.stsq");
    write_sequence(s, p);
    const std::string good = read_all(p);

    auto kind_of = [&](const std::string& content) {
        write_all(p, content);
        try {
            read_sequence(p);
        } catch (const SequenceFormatError& e) {
            return e.kind();
        }
        FAIL("no error raised");
        return SequenceFormatError::Kind::io;
    };

    SUBCASE("truncated payload") {
        CHECK(kind_of(good.substr(0, good.size() - 4 * 20)) == SequenceFormatError::Kind::truncated_payload);
    }
    SUBCASE("bad magic") {
        std::string bad = good;
        bad[4] = '2';
        CHECK(kind_of(bad) == SequenceFormatError::Kind::malformed_header);
    }
    SUBCASE("dimension mismatch") {
        std::string bad = good;
        const auto pos = bad.find("spacing:");
        bad.replace(pos, bad.find('\n', pos) - pos, "spacing: 0.5");
        CHECK(kind_of(bad) == SequenceFormatError::Kind::dimension_mismatch);
    }
    SUBCASE("missing file") {
        fs::remove(p);
        CHECK_THROWS_AS(read_sequence(p), SequenceFormatError);
    }
    fs::remove(p);
}
