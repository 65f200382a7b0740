#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>

namespace habsim {

namespace detail {

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double h = b - a;
    const double left = h / 12.0 * (fa + 4.0 * flm + fm);
    const double right = h / 12.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with absolute tolerance; the workhorse for the
/// deterministic kernel integrals.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol = 1e-12,
                        int max_depth = 40) {
    if (!(b > a)) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

/// Integral of tabulated values v[i0..i1] on a uniform grid of spacing h.
/// Composite Simpson over even interval counts, with a 3/8 cell absorbing an
/// odd remainder; single leftover interval falls back to one trapezoid.
inline double integrate_table(std::span<const double> v, double h, std::size_t i0,
                              std::size_t i1) {
    if (i1 <= i0) return 0.0;
    std::size_t n = i1 - i0;
    double total = 0.0;
    std::size_t i = i0;
    if (n == 1) return 0.5 * h * (v[i0] + v[i1]);
    if (n % 2 == 1) {
        if (n >= 3) {
            total += 3.0 * h / 8.0 * (v[i] + 3.0 * v[i + 1] + 3.0 * v[i + 2] + v[i + 3]);
            i += 3;
        } else {
            total += 0.5 * h * (v[i] + v[i + 1]);
            i += 1;
        }
    }
    for (; i + 2 <= i1; i += 2)
        total += h / 3.0 * (v[i] + 4.0 * v[i + 1] + v[i + 2]);
    return total;
}

}  // namespace habsim
