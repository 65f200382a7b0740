#include <doctest.h>

#include <cmath>

#include "habsim/market.hpp"
#include "habsim/rng.hpp"

using namespace habsim;

namespace {
const MarketParams kBaseline{0.01, 0.05, 0.2};
}

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 distribution (kat_vectors).
    auto out = rng::philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);

    out = rng::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);

    out = rng::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("market price of risk") {
    CHECK(market_price_of_risk(kBaseline) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(market_price_of_risk({0.03, 0.03, 0.5}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(market_price_of_risk({0.01, 0.05, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(market_price_of_risk({0.01, 0.05, -0.1}), std::invalid_argument);
}

TEST_CASE("spd starts at one and the drift-only path discounts exactly") {
    TimeGrid grid{1.0, 4};
    auto batch = simulate_paths(kBaseline, grid, 8, 123u);
    for (std::size_t i = 0; i < batch.n_paths; ++i) {
        CHECK(batch.log_spd(i, 0) == 0.0);
        CHECK(batch.brownian(i, 0) == 0.0);
        CHECK(batch.log_spd_integral(i, 0) == 0.0);
    }

    auto zero_noise = simulate_paths_with(kBaseline, grid, 2,
                                          [](std::uint32_t, std::uint32_t) { return 0.0; });
    // lambda = 0.2, r = 0.01: M_1 = exp(-(r + lambda^2/2)) = exp(-0.03)
    CHECK(std::exp(zero_noise.log_spd(0, 4)) ==
          doctest::Approx(std::exp(-0.03)).epsilon(1e-14));
}

TEST_CASE("spd is a supermartingale deflator: E[M_1] = e^{-r} within 3 SE") {
    TimeGrid grid{1.0, 8};
    const std::size_t n = 1000000;
    auto batch = simulate_paths(kBaseline, grid, n, 2024u, 0);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::exp(batch.log_spd(i, grid.n_steps));
        sum += m;
        sum_sq += m * m;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean - std::exp(-0.01)) < 3.0 * se);
}

TEST_CASE("empirical discount curve holds at every grid point (1e4 paths)") {
    TimeGrid grid{10.0, 40};
    const std::size_t n = 10000;
    auto batch = simulate_paths(kBaseline, grid, n, 7u);
    for (int k = 1; k <= grid.n_steps; k += 4) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = std::exp(batch.log_spd(i, k));
            sum += m;
            sum_sq += m * m;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum_sq / n - mean * mean) / n);
        CHECK(std::abs(mean - std::exp(-kBaseline.r * grid.time(k))) < 3.0 * se);
    }
}

TEST_CASE("fixed seed is bit-identical across thread counts") {
    TimeGrid grid{5.0, 20};
    auto a = simulate_paths(kBaseline, grid, 257, 99u, 1);
    auto b = simulate_paths(kBaseline, grid, 257, 99u, 7);
    auto c = simulate_paths(kBaseline, grid, 257, 99u, 0);
    for (std::size_t i = 0; i < a.n_paths; ++i)
        for (std::size_t k = 0; k < grid.n_points(); ++k) {
            CHECK(a.log_spd(i, k) == b.log_spd(i, k));
            CHECK(a.log_spd(i, k) == c.log_spd(i, k));
        }
}

TEST_CASE("trapezoid accumulator is exact for constant log M") {
    // a path with log M constant == c has A_t = c t exactly under trapezoid
    TimeGrid grid{2.0, 8};
    MarketParams flat{0.0, 0.0, 0.5};  // r = 0, lambda = 0
    auto batch = simulate_paths_with(flat, grid, 1,
                                     [](std::uint32_t, std::uint32_t) { return 0.0; });
    for (std::size_t k = 0; k <= 8; ++k) {
        CHECK(batch.log_spd(0, k) == 0.0);
        CHECK(batch.log_spd_integral(0, k) == 0.0);
    }
    // drift-only path: log M_t = -r t linear, so trapezoid is exact: A_t = -r t^2/2
    MarketParams drift{0.02, 0.02, 0.5};
    auto batch2 = simulate_paths_with(drift, grid, 1,
                                      [](std::uint32_t, std::uint32_t) { return 0.0; });
    for (std::size_t k = 0; k <= 8; ++k) {
        const double t = grid.time(k);
        CHECK(batch2.log_spd_integral(0, k) ==
              doctest::Approx(-0.02 * t * t / 2.0).epsilon(1e-13));
    }
}

TEST_CASE("spd_moment identities") {
    CHECK(spd_moment(1.0, 2.5, kBaseline) ==
          doctest::Approx(std::exp(-0.01 * 2.5)).epsilon(1e-15));
    CHECK(spd_moment(0.0, 3.0, kBaseline) == 1.0);
    // spd_moment(1, tau) * e^{r tau} = 1 exactly
    for (double tau : {0.1, 1.0, 7.3})
        CHECK(spd_moment(1.0, tau, kBaseline) * std::exp(kBaseline.r * tau) ==
              doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(spd_moment(1.0, -0.1, kBaseline), std::invalid_argument);
}

TEST_CASE("spd_moment matches a Monte Carlo estimate within 3 SE") {
    TimeGrid grid{1.0, 10};
    const std::size_t n = 200000;
    auto batch = simulate_paths(kBaseline, grid, n, 31u);
    const double mq = 0.9;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::exp(mq * batch.log_spd(i, grid.n_steps));
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean - spd_moment(mq, 1.0, kBaseline)) < 3.0 * se);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(simulate_paths(kBaseline, {0.0, 10}, 1, 1u), std::invalid_argument);
    CHECK_THROWS_AS(simulate_paths(kBaseline, {1.0, 0}, 1, 1u), std::invalid_argument);
    CHECK_THROWS_AS(simulate_paths(kBaseline, {1.0, 10}, 0, 1u), std::invalid_argument);
}
