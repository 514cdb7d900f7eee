#pragma once

#include <cmath>
#include <utility>

#include "waves/errors.hpp"

namespace waves::roots {

struct Options {
    double x_tol = 1e-14;  // relative bracket width target
    double f_tol = 0.0;    // optional residual target (0 disables)
    int max_iter = 200;
};

/// Root of f on a bracketing interval [lo, hi] with f(lo) f(hi) <= 0.
/// Bisection, accelerated by a guarded secant step that is only taken when it
/// lands safely inside the current bracket. Never leaves the bracket, fully
/// deterministic.
template <class F>
double solve_bracketed(F&& f, double lo, double hi, Options opt = {}) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (!(std::isfinite(flo) && std::isfinite(fhi)) || flo * fhi > 0.0)
        throw SolverError("root bracket invalid: f(" + std::to_string(lo) + ")=" +
                          std::to_string(flo) + ", f(" + std::to_string(hi) + ")=" +
                          std::to_string(fhi));
    double x_prev = lo, f_prev = flo;
    double x_cur = hi, f_cur = fhi;
    for (int it = 0; it < opt.max_iter; ++it) {
        const double width = hi - lo;
        const double scale = 1.0 + std::fabs(lo) + std::fabs(hi);
        if (width <= opt.x_tol * scale) break;
        double cand = 0.5 * (lo + hi);
        if (f_cur != f_prev) {
            const double sec = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev);
            const double margin = 0.01 * width;
            if (sec > lo + margin && sec < hi - margin) cand = sec;
        }
        const double fc = f(cand);
        x_prev = x_cur;
        f_prev = f_cur;
        x_cur = cand;
        f_cur = fc;
        if (fc == 0.0) return cand;
        if (opt.f_tol > 0.0 && std::fabs(fc) <= opt.f_tol) return cand;
        if (!std::isfinite(fc))
            throw SolverError("root solve hit non-finite value at x=" + std::to_string(cand));
        if (flo * fc < 0.0) {
            hi = cand;
            fhi = fc;
        } else {
            lo = cand;
            flo = fc;
        }
    }
    // Return the endpoint with the smaller residual.
    return std::fabs(flo) <= std::fabs(fhi) ? lo : hi;
}

/// Scan [lo, hi] in n steps (geometric spacing if requested) and return the
/// first subinterval with a sign change. Returns false when none exists.
template <class F>
bool scan_bracket(F&& f, double lo, double hi, int n, bool geometric,
                  double& out_lo, double& out_hi) {
    double x_prev = lo;
    double f_prev = f(lo);
    const double ratio = geometric ? std::pow(hi / lo, 1.0 / n) : 0.0;
    for (int k = 1; k <= n; ++k) {
        const double x = geometric ? lo * std::pow(ratio, k)
                                   : lo + (hi - lo) * static_cast<double>(k) / n;
        const double fx = f(x);
        if (std::isfinite(f_prev) && std::isfinite(fx) && f_prev * fx <= 0.0 &&
            (f_prev != 0.0 || fx != 0.0)) {
            out_lo = x_prev;
            out_hi = x;
            return true;
        }
        x_prev = x;
        f_prev = fx;
    }
    return false;
}

} // namespace waves::roots
