#include <doctest.h>

#include <cmath>

#include "habsim/preferences.hpp"
#include "habsim/rng.hpp"

using namespace habsim;

namespace {

// golden-section minimizer over a bracket; oracle for the conjugates
template <typename F>
double golden_min(const F& f, double a, double b, double tol = 1e-11) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return f(0.5 * (a + b));
}

double rnd(std::uint32_t i, std::uint32_t slot) {
    return rng::uniform01(555u, rng::Stream::node_sampling, i, 0, 0, slot);
}

}  // namespace

TEST_CASE("utility values and domain") {
    Preferences p{2.0, 0.0};
    CHECK(p.utility(0.0, 1.0) == doctest::Approx(-1.0));
    Preferences pd{5.0, 0.03};
    CHECK(pd.utility(2.0, 1.0) == doctest::Approx(std::exp(-0.06) / (1.0 - 5.0)));
    CHECK_THROWS_AS(p.utility(0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(p.utility(0.0, -1.0), std::domain_error);
    CHECK_THROWS_AS((Preferences{1.0, 0.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((Preferences{2.0, -0.1}).validate(), std::invalid_argument);
}

TEST_CASE("finite differences recover the marginal") {
    Preferences p{10.0, 0.03};
    for (int i = 0; i < 20; ++i) {
        const double t = 10.0 * rnd(i, 0);
        const double x = 0.5 + 2.0 * rnd(i, 1);
        const double h = 1e-5 * x;
        const double fd = (p.utility(t, x + h) - p.utility(t, x - h)) / (2.0 * h);
        CHECK(fd == doctest::Approx(p.marginal(t, x)).epsilon(1e-6));
    }
}

TEST_CASE("inverse ratio marginal: closed form and plug-back identity") {
    Preferences p{2.0, 0.0};
    CHECK(p.inverse_ratio_marginal(0.0, 4.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p.inverse_ratio_marginal(0.0, 1.0) == doctest::Approx(1.0));
    Preferences q{7.5, 0.02};
    for (int i = 0; i < 50; ++i) {
        const double t = 10.0 * rnd(100 + i, 0);
        const double x = std::exp(6.0 * (rnd(100 + i, 1) - 0.5));
        const double inv = q.inverse_ratio_marginal(t, x);
        // U'(t, I) * I = x to 1e-12 relative
        CHECK(q.marginal(t, inv) * inv == doctest::Approx(x).epsilon(1e-12));
    }
    CHECK_THROWS_AS(p.inverse_ratio_marginal(0.0, 0.0), std::domain_error);
}

TEST_CASE("inverse marginal: closed form and plug-back identity") {
    Preferences p{2.0, 0.0};
    CHECK(p.inverse_marginal(0.0, 4.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p.inverse_marginal(0.0, 1.0) == doctest::Approx(1.0));
    Preferences q{12.0, 0.04};
    for (int i = 0; i < 50; ++i) {
        const double t = 10.0 * rnd(200 + i, 0);
        const double x = std::exp(6.0 * (rnd(200 + i, 1) - 0.5));
        CHECK(q.marginal(t, q.inverse_marginal(t, x)) ==
              doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("conjugate V1: trivial points and the minimization oracle") {
    Preferences p{2.0, 0.0};
    CHECK(p.conjugate_v1(0.0, 1.0) == doctest::Approx(1.0));
    CHECK(p.conjugate_v1(0.0, std::exp(1.0)) == doctest::Approx(0.0).epsilon(1e-14));

    Preferences q{10.0, 0.03};
    for (int i = 0; i < 30; ++i) {
        const double t = 10.0 * rnd(300 + i, 0);
        const double x = std::exp(4.0 * (rnd(300 + i, 1) - 0.5));
        const auto objective = [&](double z) { return -q.utility(t, std::exp(-z)) - x * z; };
        const double z_star = -std::log(q.inverse_ratio_marginal(t, x));
        const double oracle = golden_min(objective, z_star - 5.0, z_star + 5.0);
        CHECK(q.conjugate_v1(t, x) == doctest::Approx(oracle).epsilon(1e-8));
    }
}

TEST_CASE("conjugate V2: trivial points and the minimization oracle") {
    CHECK(Preferences::conjugate_v2(1.0) == doctest::Approx(1.0));
    CHECK(Preferences::conjugate_v2(std::exp(1.0)) == doctest::Approx(0.0).epsilon(1e-14));
    for (int i = 0; i < 30; ++i) {
        const double x = std::exp(4.0 * (rnd(400 + i, 0) - 0.5));
        const auto objective = [&](double z) { return std::exp(z) - x * z; };
        const double z_star = std::log(x);
        const double oracle = golden_min(objective, z_star - 5.0, z_star + 5.0);
        CHECK(Preferences::conjugate_v2(x) == doctest::Approx(oracle).epsilon(1e-8));
    }
    CHECK_THROWS_AS(Preferences::conjugate_v2(0.0), std::domain_error);
}

TEST_CASE("conjugacy inequalities hold at sampled points") {
    Preferences p{6.0, 0.02};
    for (int i = 0; i < 200; ++i) {
        const double t = 10.0 * rnd(500 + i, 0);
        const double x = std::exp(4.0 * (rnd(500 + i, 1) - 0.5));
        const double z = 8.0 * (rnd(500 + i, 2) - 0.5);
        CHECK(-p.utility(t, std::exp(-z)) - x * z >=
              p.conjugate_v1(t, x) - 1e-12 * std::abs(p.conjugate_v1(t, x)));
        CHECK(std::exp(z) - x * z >= Preferences::conjugate_v2(x) - 1e-12);
    }
}

TEST_CASE("inverse maps are strictly decreasing and relative risk aversion is gamma") {
    Preferences p{3.5, 0.01};
    double prev_i = 1e300, prev_ihat = 1e300;
    for (double x = 0.25; x < 8.0; x *= 1.7) {
        const double vi = p.inverse_ratio_marginal(1.0, x);
        const double vih = p.inverse_marginal(1.0, x);
        CHECK(vi < prev_i);
        CHECK(vih < prev_ihat);
        prev_i = vi;
        prev_ihat = vih;

        // -x U''/U' == gamma for all x
        const double h = 1e-5 * x;
        const double upp =
            (p.marginal(1.0, x + h) - p.marginal(1.0, x - h)) / (2.0 * h);
        CHECK(-x * upp / p.marginal(1.0, x) == doctest::Approx(3.5).epsilon(1e-6));
    }
}
