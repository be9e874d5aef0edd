#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rst/gibbs.hpp"
#include "rst/rng.hpp"

using namespace rst;

TEST_CASE("neighborhood is empty when too few points lie within delta") {
    const double delta = 0.5;
    ProjectedDiagram ppd;
    ppd.points = {{0, 0}, {2 * delta, 0}};
    CHECK(neighborhood(ppd.points[0], 1, ppd, delta, 0).empty());
    CHECK_THROWS_AS(neighborhood(ppd.points[0], 0, ppd, delta, 0), error);
}

TEST_CASE("neighborhood of the middle collinear point") {
    const double delta = 1.0;
    ProjectedDiagram ppd;
    ppd.points = {{-delta / 2, 0}, {0, 0}, {delta / 2, 0}};
    const auto nb = neighborhood(ppd.points[1], 2, ppd, delta, 1);
    REQUIRE(nb.members.size() == 2);
    CHECK(nb.distances[0] == doctest::Approx(delta / 2));
    CHECK(nb.distances[1] == doctest::Approx(delta / 2));
}

TEST_CASE("neighborhood matches brute-force all-pairs sort") {
    Rng rng(17);
    const auto ppd = oracle::random_ppd(rng, 50);
    const double delta = 0.8;
    for (std::size_t i = 0; i < ppd.size(); ++i) {
        for (int k = 1; k <= 3; ++k) {
            const auto nb = neighborhood(ppd.points[i], k, ppd, delta, static_cast<long>(i));
            const auto ref = oracle::knn_indices(ppd, i, k, delta);
            REQUIRE(nb.members.size() == ref.size());
            for (std::size_t j = 0; j < ref.size(); ++j) {
                CHECK(nb.members[j].x1 == ppd.points[ref[j]].x1);
                CHECK(nb.members[j].x2 == ppd.points[ref[j]].x2);
            }
        }
    }
}

TEST_CASE("cluster lengths") {
    const double delta = 1.0;
    ProjectedDiagram iso;
    iso.points = {{0, 0}, {10, 0}};
    CHECK(cluster_length(iso.points[0], 1, iso, delta, 0) == 0.0);

    ProjectedDiagram col;
    col.points = {{-delta / 2, 0}, {0, 0}, {delta / 2, 0}};
    CHECK(cluster_length(col.points[1], 2, col, delta, 1) == doctest::Approx(delta));

    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ppd = oracle::random_ppd(rng, 20);
        for (int k = 1; k <= 3; ++k)
            for (std::size_t i = 0; i < ppd.size(); ++i)
                CHECK(cluster_length(ppd.points[i], k, ppd, 0.6, static_cast<long>(i)) ==
                      doctest::Approx(oracle::cluster_length(ppd, i, k, 0.6)).epsilon(1e-14));
    }
}

TEST_CASE("total cluster length") {
    const double delta = 1.0;
    ProjectedDiagram two;
    two.points = {{0, 0}, {delta / 2, 0}};
    CHECK(total_cluster_length(1, two, delta) == doctest::Approx(delta));

    ProjectedDiagram one;
    one.points = {{0, 0}};
    CHECK(total_cluster_length(1, one, delta) == 0.0);
}

TEST_CASE("spread terms") {
    ProjectedDiagram axis;
    axis.points = {{0, 0}, {1, 0}, {5, 0}};
    CHECK(spread_terms(axis).sigma_V_sq == 0.0);

    ProjectedDiagram single;
    single.points = {{3, 2}};
    CHECK(spread_terms(single).sigma_H_sq == 0.0);

    ProjectedDiagram two;
    two.points = {{0, 1}, {2, 3}};
    const auto s = spread_terms(two);
    CHECK(s.xbar1 == doctest::Approx(1.0));
    CHECK(s.sigma_H_sq == doctest::Approx(2.0));
    CHECK(s.sigma_V_sq == doctest::Approx(10.0));

    CHECK_THROWS_AS(spread_terms(ProjectedDiagram{}), error);
}

TEST_CASE("hamiltonian basics and dimension check") {
    ModelConfig config;
    config.K = 2;
    config.delta = 0.5;
    Theta zero;
    zero.theta_k = {0.0, 0.0};
    zero.theta_H = zero.theta_V = 0.0;
    Rng rng(5);
    const auto ppd = oracle::random_ppd(rng, 8);
    CHECK(hamiltonian(ppd, zero, config) == 0.0);

    Theta axis_theta;
    axis_theta.theta_H = 0.0;
    axis_theta.theta_V = 1.0;
    axis_theta.theta_k = {0.0, 0.0};
    ProjectedDiagram axis;
    axis.points = {{0, 0}, {1, 0}, {2, 0}};
    CHECK(hamiltonian(axis, axis_theta, config) == 0.0);

    Theta wrong;
    wrong.theta_k = {1.0};
    CHECK_THROWS_AS(hamiltonian(ppd, wrong, config), error);
}

TEST_CASE("hamiltonian matches the brute-force oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const auto ppd = oracle::random_ppd(rng, 15);
        Theta theta;
        theta.theta_H = 0.2 + rng.uniform();
        theta.theta_V = 0.2 + rng.uniform();
        theta.theta_k = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
        ModelConfig config;
        config.K = 2;
        config.delta = 0.3 + 0.5 * rng.uniform();
        const double ours = hamiltonian(ppd, theta, config);
        const double ref = oracle::hamiltonian(ppd, theta, config.delta);
        CHECK(ours == doctest::Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("conditional energy") {
    Rng rng(41);
    const auto ppd = oracle::random_ppd(rng, 12);
    ModelConfig config;
    config.K = 2;
    config.delta = 0.7;
    Theta theta;
    theta.theta_H = 1.3;
    theta.theta_V = 0.9;
    theta.theta_k = {-0.4, 0.2};
    const auto s = spread_terms(ppd);

    SUBCASE("z = x reproduces the per-point term") {
        for (std::size_t i = 0; i < ppd.size(); ++i) {
            const auto nbs = neighborhoods_of(ppd.points[i], config.K, ppd, config.delta,
                                              static_cast<long>(i));
            const auto& x = ppd.points[i];
            double expected = theta.theta_H * (x.x1 - s.xbar1) * (x.x1 - s.xbar1) +
                              theta.theta_V * x.x2 * x.x2;
            for (int k = 1; k <= config.K; ++k)
                expected += theta.theta_k[k - 1] *
                            cluster_length(x, k, ppd, config.delta, static_cast<long>(i));
            CHECK(conditional_energy(x, nbs, s.xbar1, theta, config) ==
                  doctest::Approx(expected).epsilon(1e-13));
        }
    }

    SUBCASE("theta_k = 0 gives the pure quadratic") {
        Theta quad = theta;
        quad.theta_k = {0.0, 0.0};
        const auto nbs = neighborhoods_of(ppd.points[0], config.K, ppd, config.delta, 0);
        const PpdPoint z{0.3, 0.8};
        CHECK(conditional_energy(z, nbs, s.xbar1, quad, config) ==
              doctest::Approx(quad.theta_H * (z.x1 - s.xbar1) * (z.x1 - s.xbar1) +
                              quad.theta_V * z.x2 * z.x2));
    }

    SUBCASE("grid of z values against direct formula") {
        const auto nbs = neighborhoods_of(ppd.points[3], config.K, ppd, config.delta, 3);
        const PpdPoint zs[5] = {{0, 0}, {0.5, 0.2}, {-1, 1}, {3, 0.1}, {0.1, 2}};
        for (const auto& z : zs) {
            double expected = theta.theta_H * (z.x1 - s.xbar1) * (z.x1 - s.xbar1) +
                              theta.theta_V * z.x2 * z.x2;
            for (int k = 1; k <= config.K; ++k) {
                const auto& nb = nbs[k - 1];
                if (nb.empty()) continue;
                double len = 0.0;
                bool ok = true;
                for (const auto& y : nb.members) {
                    const double d = std::hypot(z.x1 - y.x1, z.x2 - y.x2);
                    if (d > config.delta) ok = false;
                    len += d;
                }
                if (ok) expected += theta.theta_k[k - 1] * len;
            }
            CHECK(conditional_energy(z, nbs, s.xbar1, theta, config) ==
                  doctest::Approx(expected).epsilon(1e-13));
        }
    }
}

TEST_CASE("cluster length bounds and delta monotonicity") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ppd = oracle::random_ppd(rng, 15);
        const double delta = 0.2 + rng.uniform();
        for (int k = 1; k <= 3; ++k) {
            for (std::size_t i = 0; i < ppd.size(); ++i) {
                const double len = cluster_length(ppd.points[i], k, ppd, delta,
                                                  static_cast<long>(i));
                CHECK(len >= 0.0);
                CHECK(len <= k * delta + 1e-12);
                const double bigger = cluster_length(ppd.points[i], k, ppd, 2.0 * delta,
                                                     static_cast<long>(i));
                if (len > 0.0) CHECK(bigger > 0.0);
            }
        }
    }
}

TEST_CASE("hamiltonian permutation and translation invariance") {
    Rng rng(61);
    const auto ppd = oracle::random_ppd(rng, 14);
    Theta theta;
    theta.theta_H = 0.8;
    theta.theta_V = 1.6;
    theta.theta_k = {0.5, -0.2};
    ModelConfig config;
    config.K = 2;
    config.delta = 0.5;
    const double base = hamiltonian(ppd, theta, config);

    auto perm = ppd;
    std::rotate(perm.points.begin(), perm.points.begin() + 5, perm.points.end());
    CHECK(hamiltonian(perm, theta, config) == doctest::Approx(base).epsilon(1e-13));

    auto shifted = ppd;
    for (auto& p : shifted.points) p.x1 += 17.25;
    CHECK(hamiltonian(shifted, theta, config) == doctest::Approx(base).epsilon(1e-10));
}
