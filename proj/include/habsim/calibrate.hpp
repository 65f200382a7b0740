#pragma once

#include <cmath>
#include <functional>

#include "habsim/errors.hpp"

namespace habsim {

struct BisectionResult {
    double log_root = 0.0;
    int iterations = 0;
};

/// Solves f(x) = target for a strictly decreasing f by bracketing from x = 0
/// in log-2 steps and bisecting. Both budget calibrations use this with
/// x = log eta; common random numbers across iterates are the caller's
/// responsibility (the same batch is re-evaluated).
inline BisectionResult bisect_decreasing(const std::function<double(double)>& f,
                                         double target, int max_bracket = 200,
                                         int max_iter = 200) {
    constexpr double step = 0.6931471805599453;  // log 2
    int iterations = 1;
    double lo = 0.0;
    double hi = 0.0;
    const double f0 = f(0.0);
    if (f0 > target) {
        hi = step;
        while (f(hi) > target) {
            lo = hi;
            hi += step;
            if (++iterations > max_bracket)
                throw CalibrationError("calibration: bracket not found (root too large)");
        }
        ++iterations;
    } else {
        lo = -step;
        while (f(lo) < target) {
            hi = lo;
            lo -= step;
            if (++iterations > max_bracket)
                throw CalibrationError("calibration: bracket not found (root too small)");
        }
        ++iterations;
    }
    for (int it = 0;
         it < max_iter && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        ++iterations;
        if (f(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return {0.5 * (lo + hi), iterations};
}

}  // namespace habsim
