#include <doctest.h>

#include <cmath>
#include <vector>

#include "habsim/habit.hpp"

using namespace habsim;

namespace {

// gentle smooth path so quadrature-convention error stays inside tolerances
double smooth_log_c(double s) {
    return 0.25 * std::sin(0.11 * s + 0.4) + 0.2 * std::sin(0.05 * s) +
           0.15 * std::cos(0.21 * s - 1.0);
}

std::vector<double> sample_path(const TimeGrid& grid) {
    std::vector<double> v(grid.n_points());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = smooth_log_c(grid.time(k));
    return v;
}

}  // namespace

TEST_CASE("habit parameter validation") {
    CHECK_THROWS_AS((HabitParams{0.1, 0.2}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((HabitParams{0.1, -0.1}).validate(), std::invalid_argument);
    CHECK_NOTHROW((HabitParams{0.0, 0.0}).validate());
    CHECK_NOTHROW((HabitParams{0.2, 0.1}).validate());
}

TEST_CASE("zero consumption path gives zero habit") {
    TimeGrid grid{10.0, 40};
    std::vector<double> zero(grid.n_points(), 0.0);
    auto h = integrate_log_habit(zero, {0.1, 0.1}, grid);
    for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("constant log consumption matches the continuum closed form") {
    TimeGrid grid{10.0, 40};
    std::vector<double> ones(grid.n_points(), 1.0);
    auto h = integrate_log_habit(ones, {0.1, 0.1}, grid);
    // (beta/alpha) (1 - e^{-alpha t}) = 1 - e^{-1} at t = 10
    CHECK(std::abs(h.back() - (1.0 - std::exp(-1.0))) < 1e-3);
    CHECK(h.front() == 0.0);
}

TEST_CASE("recursion contract holds exactly") {
    TimeGrid grid{10.0, 40};
    auto log_c = sample_path(grid);
    const HabitParams hp{0.15, 0.1};
    auto h = integrate_log_habit(log_c, hp, grid);
    const double dt = grid.dt();
    const double decay = std::exp(-hp.alpha * dt);
    const double w = hp.beta * dt * std::exp(-0.5 * hp.alpha * dt);
    for (std::size_t k = 0; k + 1 < h.size(); ++k)
        CHECK(h[k + 1] == decay * h[k] + w * log_c[k]);
}

TEST_CASE("refinement oracle: recursion tracks the exact kernel integral") {
    TimeGrid grid{10.0, 512};
    auto log_c = sample_path(grid);
    const HabitParams hp{0.1, 0.1};
    auto h = integrate_log_habit(log_c, hp, grid);

    // 64x refined trapezoid quadrature of the exact kernel integral
    const int refine = 64;
    for (std::size_t k : {grid.n_points() / 4, grid.n_points() / 2, grid.n_points() - 1}) {
        const double t = grid.time(k);
        const double hfine = t / (static_cast<double>(k) * refine);
        double acc = 0.0;
        const std::size_t n = k * refine;
        for (std::size_t j = 0; j <= n; ++j) {
            const double s = hfine * static_cast<double>(j);
            const double f = std::exp(-hp.alpha * (t - s)) * smooth_log_c(s);
            acc += (j == 0 || j == n ? 0.5 : 1.0) * hfine * f;
        }
        CHECK(std::abs(h[k] - hp.beta * acc) < 1e-3);
    }
}

TEST_CASE("grid mismatch is rejected") {
    TimeGrid grid{10.0, 40};
    std::vector<double> wrong(grid.n_points() + 3, 0.0);
    CHECK_THROWS_AS(integrate_log_habit(wrong, {0.1, 0.1}, grid), std::invalid_argument);
}

TEST_CASE("ratio_and_level: unit ratio gives unit habit and level") {
    TimeGrid grid{10.0, 40};
    std::vector<double> zero(grid.n_points(), 0.0);
    auto out = ratio_and_level(zero, {0.1, 0.1}, grid);
    for (std::size_t k = 0; k < zero.size(); ++k) {
        CHECK(out.log_habit[k] == 0.0);
        CHECK(out.log_level[k] == 0.0);
    }
}

TEST_CASE("ratio_and_level at alpha == beta integrates without decay") {
    TimeGrid grid{10.0, 200};
    auto chat = sample_path(grid);
    const HabitParams hp{0.1, 0.1};
    auto out = ratio_and_level(chat, hp, grid);
    // kernel reduces to a constant: log h_t = beta int_0^t log chat ds; compare
    // against a cumulative trapezoid with an O(dt) convention allowance
    const double dt = grid.dt();
    double trapz = 0.0;
    for (std::size_t k = 0; k + 1 < chat.size(); ++k) {
        trapz += 0.5 * dt * (chat[k] + chat[k + 1]);
        const double tol = hp.beta * dt * (std::abs(chat[0]) + std::abs(chat[k + 1]));
        CHECK(std::abs(out.log_habit[k + 1] - hp.beta * trapz) <= tol + 1e-12);
    }
}

TEST_CASE("ratio_and_level agrees with the reduced-kernel integral identically") {
    TimeGrid grid{10.0, 64};
    auto chat = sample_path(grid);
    const HabitParams hp{0.25, 0.1};
    auto out = ratio_and_level(chat, hp, grid);
    auto kernel = exp_decay_integral(chat, hp.decay_gap(), hp.beta, grid);
    for (std::size_t k = 0; k < chat.size(); ++k) {
        CHECK(std::abs((out.log_level[k] - chat[k]) - kernel[k]) < 1e-12);
        CHECK(std::exp(out.log_habit[k]) > 0.0);
    }
}

TEST_CASE("no habit formation when alpha = beta = 0") {
    TimeGrid grid{10.0, 40};
    auto chat = sample_path(grid);
    auto out = ratio_and_level(chat, {0.0, 0.0}, grid);
    for (std::size_t k = 0; k < chat.size(); ++k) {
        CHECK(out.log_habit[k] == 0.0);
        CHECK(out.log_level[k] == chat[k]);
    }
}

TEST_CASE("monotone response: raising log chat never lowers log h") {
    TimeGrid grid{10.0, 40};
    auto chat = sample_path(grid);
    auto bumped = chat;
    for (auto& v : bumped) v += 0.3;
    const HabitParams hp{0.2, 0.05};
    auto lo = ratio_and_level(chat, hp, grid);
    auto hi = ratio_and_level(bumped, hp, grid);
    for (std::size_t k = 0; k < chat.size(); ++k)
        CHECK(hi.log_habit[k] >= lo.log_habit[k]);
}
