#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stml/temporal.hpp"

using namespace stml;

namespace {

std::vector<int> range(int a, int b, int step = 1) {
    std::vector<int> v;
    for (int i = a; i <= b; i += step) v.push_back(i);
    return v;
}

std::vector<double> uniform_times(int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    std::iota(t.begin(), t.end(), 0.0);
    return t;
}

Affine scalar_affine(double v) {
    Eigen::VectorXd p = Eigen::VectorXd::Constant(6, v);
    return Affine::from_params(2, p);
}

LevelRun run_with(double d_all) {
    const AffineStack y = AffineStack::identity(3, 2);
    return LevelRun{.spatial_level = 0,
                    .temporal_level = 0,
                    .active = {1, 2, 3},
                    .start = y,
                    .solution = y,
                    .result = {},
                    .dissimilarity_all = d_all};
}

}  // namespace

TEST_CASE("temporal schedules") {
    const auto s17 = build_temporal_levels(17, 3);
    REQUIRE(s17.levels.size() == 4);
    CHECK(s17.levels[0] == std::vector<int>{1, 9, 17});
    CHECK(s17.levels[1] == std::vector<int>{1, 5, 9, 13, 17});
    CHECK(s17.levels[2] == range(1, 17, 2));
    CHECK(s17.levels[3] == range(1, 17));
    CHECK(s17.finest_level() == 3);
    CHECK(s17.frame_count() == 17);

    const auto s129 = build_temporal_levels(129, 17);
    std::vector<std::size_t> sizes;
    for (const auto& l : s129.levels) sizes.push_back(l.size());
    CHECK(sizes == std::vector<std::size_t>{17, 33, 65, 129});

    const auto s6 = build_temporal_levels(6, 3);
    REQUIRE(s6.levels.size() == 2);
    CHECK(s6.levels[0] == std::vector<int>{1, 3, 5, 6});
    CHECK(s6.levels[1] == range(1, 6));

    CHECK(build_temporal_levels(3, 3).levels.size() == 1);
    CHECK_THROWS_AS(build_temporal_levels(2, 3), std::invalid_argument);
    CHECK_THROWS_AS(build_temporal_levels(10, 2), std::invalid_argument);
}

TEST_CASE("schedule properties") {
    for (int cs : {3, 4, 5, 9, 17}) {
        for (int n = 3; n <= 300; ++n) {
            const auto s = build_temporal_levels(n, cs);
            CHECK(s.levels.back() == range(1, n));
            for (std::size_t q = 0; q < s.levels.size(); ++q) {
                const auto& k = s.levels[q];
                CHECK(k.front() == 1);
                CHECK(k.back() == n);
                CHECK(std::is_sorted(k.begin(), k.end()));
                CHECK(std::adjacent_find(k.begin(), k.end()) == k.end());
                if (q + 1 < s.levels.size()) {
                    const auto& f = s.levels[q + 1];
                    CHECK(std::includes(f.begin(), f.end(), k.begin(), k.end()));
                    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
                        const auto inside = std::count_if(f.begin(), f.end(), [&](int x) { return x > k[i] && x < k[i + 1]; });
                        CHECK(inside <= 1);
                    }
                    CHECK(k.size() < f.size());
                }
            }
            if (s.levels.size() > 1) CHECK(static_cast<int>(s.levels[1].size()) > cs);
        }
    }
}

TEST_CASE("linear prediction") {
    const auto s = build_temporal_levels(5, 3);
    const auto t = uniform_times(5);
    AffineStack y(5, 2);
    y.set(1, scalar_affine(2.0));
    y.set(3, scalar_affine(4.0));
    y.set(5, scalar_affine(4.0));
    const AffineStack z = linear_predict(y, s, 0, t);
    CHECK(z.indices() == range(1, 5));
    CHECK(z.at(1) == y.at(1));
    CHECK(z.at(3) == y.at(3));
    CHECK(z.at(2).params().isApprox(Eigen::VectorXd::Constant(6, 3.0)));
    CHECK(z.at(4) == y.at(5));

    const std::vector<double> nonuniform{0.0, 0.1, 1.0, 1.5, 2.0};
    const AffineStack w = linear_predict(y, s, 0, nonuniform);
    CHECK(w.at(2).params()(0) == doctest::Approx(2.2));
    CHECK_THROWS(linear_predict(y, s, 1, t));
}

TEST_CASE("thomas solver") {
    CHECK(thomas_solve({{0, 0}, {1, 1, 1}, {0, 0}, {4, 5, 6}}) == std::vector<double>{4, 5, 6});
    const auto x = thomas_solve({{-1, -1}, {2, 2, 2}, {-1, -1}, {1, 0, 1}});
    for (double v : x) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(thomas_solve({{1}, {0, 1}, {1}, {1, 1}}), SingularSystemError);
    CHECK_THROWS_AS(thomas_solve({{1}, {1, 1, 1}, {1}, {1, 1}}), std::invalid_argument);

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 50;
        TridiagSystem s;
        for (int i = 0; i < n; ++i) {
            s.rhs.push_back(u(rng));
            if (i + 1 < n) {
                s.sub.push_back(u(rng));
                s.super.push_back(u(rng));
            }
        }
        for (int i = 0; i < n; ++i) s.diag.push_back(2.5 + u(rng));
        const auto got = thomas_solve(s);
        const Eigen::VectorXd ref = oracle::gauss_solve(oracle::dense_tridiag(s.sub, s.diag, s.super),
                                                        Eigen::Map<const Eigen::VectorXd>(s.rhs.data(), n));
        for (int i = 0; i < n; ++i) CHECK(std::abs(got[static_cast<std::size_t>(i)] - ref(i)) < 1e-10);
    }
}

TEST_CASE("least-squares prediction") {
    SUBCASE("small example") {
        const std::vector<int> active{1, 3, 5};
        const std::vector<double> eta{0, 1, 0};
        const std::vector<double> ref{0, 0.4, 0.6, 0.8, 1};
        const auto z = ls_predict_component(active, eta, ref, 1e-5);
        const Eigen::VectorXd o = oracle::ls_minimizer(active, eta, ref, 1e-5);
        for (int i = 0; i < 5; ++i) CHECK(std::abs(z[static_cast<std::size_t>(i)] - o(i)) < 1e-10);
    }
    SUBCASE("constant data") {
        const auto z = ls_predict_component(std::vector<int>{1, 4, 7}, std::vector<double>{2, 2, 2},
                                            std::vector<double>(7, -3.0), 0.1);
        for (double v : z) CHECK(v == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("data term dominates for vanishing beta") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> u(-2, 2);
        std::vector<double> eta(20), ref(20);
        for (auto& v : eta) v = u(rng);
        for (auto& v : ref) v = u(rng);
        const auto z = ls_predict_component(range(1, 20), eta, ref, 1e-12);
        for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(z[i] - eta[i]) < 1e-8);
    }
    SUBCASE("random instances against dense least squares") {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(-1, 1);
        std::uniform_real_distribution<double> lb(-6, 1);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + trial % 49;
            std::vector<int> active{1};
            for (int k = 2; k < n; ++k)
                if (u(rng) > 0.2) active.push_back(k);
            active.push_back(n);
            std::vector<double> eta, ref;
            for (std::size_t i = 0; i < active.size(); ++i) eta.push_back(u(rng));
            for (int k = 0; k < n; ++k) ref.push_back(u(rng));
            const double beta = std::pow(10.0, lb(rng));
            const auto z = ls_predict_component(active, eta, ref, beta);
            const Eigen::VectorXd o = oracle::ls_minimizer(active, eta, ref, beta);
            for (int i = 0; i < n; ++i) CHECK(std::abs(z[static_cast<std::size_t>(i)] - o(i)) < 1e-10);
        }
    }
    SUBCASE("assembled system is the normal equations") {
        const auto sys = assemble_ls_system(std::vector<int>{1, 3}, std::vector<double>{1, 2},
                                            std::vector<double>{0, 1, 3}, 0.5);
        CHECK(sys.diag == std::vector<double>{1.5, 1.0, 1.5});
        CHECK(sys.sub == std::vector<double>{-0.5, -0.5});
        CHECK(sys.super == std::vector<double>{-0.5, -0.5});
        // M eta + beta L ref with L ref = [-1, -1, 2]
        CHECK(sys.rhs[0] == doctest::Approx(0.5));
        CHECK(sys.rhs[1] == doctest::Approx(-0.5));
        CHECK(sys.rhs[2] == doctest::Approx(3.0));
    }
    SUBCASE("stack version works per parameter") {
        std::mt19937_64 rng(14);
        AffineStack eta(7, 2), ref(7, 2);
        for (int k : {1, 4, 7}) eta.set(k, oracle::random_affine(rng, 1.0));
        for (int k = 1; k <= 7; ++k) ref.set(k, oracle::random_affine(rng, 1.0));
        const AffineStack z = ls_predict(eta, ref, 1e-3);
        CHECK(z.indices() == range(1, 7));
        for (int c = 0; c < 6; ++c) {
            std::vector<double> e, r;
            for (int k : {1, 4, 7}) e.push_back(eta.at(k).params()(c));
            for (int k = 1; k <= 7; ++k) r.push_back(ref.at(k).params()(c));
            const Eigen::VectorXd o = oracle::ls_minimizer({1, 4, 7}, e, r, 1e-3);
            for (int k = 1; k <= 7; ++k) CHECK(std::abs(z.at(k).params()(c) - o(k - 1)) < 1e-10);
        }
    }
}

TEST_CASE("stopping rule") {
    const AffineStack a = AffineStack::identity(3, 2);
    AffineStack b = a;
    b.set(2, scalar_affine(0.01));
    const StopReference ref{.dissimilarity = 2.0, .parameter_norm = 1.0};

    SUBCASE("dissimilarity mode") {
        const std::vector<LevelRun> same{run_with(1.0), run_with(1.0)};
        CHECK(check_stop({StopMode::dissimilarity, 1e-3}, same, a, a, ref));
        const std::vector<LevelRun> moved{run_with(1.0), run_with(0.9)};
        CHECK_FALSE(check_stop({StopMode::dissimilarity, 0.0}, moved, a, a, ref));
        CHECK_FALSE(check_stop({StopMode::dissimilarity, 0.01}, moved, a, a, ref));
        CHECK(check_stop({StopMode::dissimilarity, 0.05}, moved, a, a, ref));
    }
    SUBCASE("parameter mode") {
        const std::vector<LevelRun> h{run_with(1.0), run_with(0.5)};
        CHECK(check_stop({StopMode::parameter, 1e-3}, h, a, a, ref));
        CHECK_FALSE(check_stop({StopMode::parameter, 0.0}, h, a, b, ref));
        const double diff = stack_diff_norm(a, b);
        CHECK(check_stop({StopMode::parameter, 1.01 * diff}, h, a, b, ref));
        CHECK_FALSE(check_stop({StopMode::parameter, 0.99 * diff}, h, a, b, ref));
    }
    SUBCASE("needs two runs") {
        const std::vector<LevelRun> one{run_with(1.0)};
        CHECK_THROWS_AS(check_stop({}, one, a, a, ref), std::invalid_argument);
    }
}
