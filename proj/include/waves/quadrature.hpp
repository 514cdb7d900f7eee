#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "waves/errors.hpp"

namespace waves::quad {

/// Adaptive Gauss-Kronrod 15(7) integration.
///
/// The error estimate on each segment is the difference between the 15-point
/// Kronrod value and the embedded 7-point Gauss value. Segments are bisected
/// until each carries an error budget proportional to its length, so the
/// accumulated absolute error stays below the requested tolerance. Endpoints
/// are never evaluated, which makes the rule safe on integrands with an
/// integrable inverse-square-root blowup at the interval ends.

struct Options {
    double abs_tol = 1e-12;
    int max_depth = 52;
    std::int64_t max_evals = 4000000;
    double diverge_above = 1e12; // running total beyond this flags divergence
    // Attainable-accuracy floor. Integrands built from differences of O(1)
    // quantities carry relative noise well above machine epsilon near a
    // cancellation point; once the segment error estimate is below this
    // fraction of the segment value it measures that noise, and further
    // splitting would recurse without gaining accuracy.
    double noise_rel = 2e-11;
};

struct Outcome {
    double value = 0.0;
    double error_estimate = 0.0;
    std::int64_t evaluations = 0;
    bool converged = false;
    bool diverged = false;
};

namespace detail {

// Kronrod 15 abscissae (positive half) and weights, Gauss 7 weights.
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

template <class F>
inline void gk15(F& f, double a, double b, double& kronrod, double& gauss) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int k = 0; k < 7; ++k) {
        fv[k] = f(c - h * kXgk[k]);
        fv[14 - k] = f(c + h * kXgk[k]);
    }
    fv[7] = f(c);
    double resk = kWgk[7] * fv[7];
    double resg = kWg[3] * fv[7];
    for (int k = 0; k < 7; ++k) resk += kWgk[k] * (fv[k] + fv[14 - k]);
    // Gauss points sit at the odd Kronrod abscissae.
    for (int k = 0; k < 3; ++k) resg += kWg[k] * (fv[2 * k + 1] + fv[13 - 2 * k]);
    kronrod = resk * h;
    gauss = resg * h;
}

} // namespace detail

template <class F>
Outcome try_integrate(F&& f, double a, double b, Options opt = {}) {
    Outcome out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    struct Seg {
        double a, b, tol;
        int depth;
    };
    std::vector<Seg> stack;
    stack.push_back({a, b, opt.abs_tol, 0});
    while (!stack.empty()) {
        Seg seg = stack.back();
        stack.pop_back();
        double resk = 0.0, resg = 0.0;
        detail::gk15(f, seg.a, seg.b, resk, resg);
        out.evaluations += 15;
        const double err = std::fabs(resk - resg);
        if (!std::isfinite(resk)) {
            out.diverged = true;
            return out;
        }
        if (err <= seg.tol + opt.noise_rel * std::fabs(resk) ||
            seg.depth >= opt.max_depth || out.evaluations >= opt.max_evals) {
            out.value += resk;
            out.error_estimate += err;
            if (std::fabs(out.value) > opt.diverge_above) {
                out.diverged = true;
                return out;
            }
            continue;
        }
        const double mid = 0.5 * (seg.a + seg.b);
        stack.push_back({seg.a, mid, 0.5 * seg.tol, seg.depth + 1});
        stack.push_back({mid, seg.b, 0.5 * seg.tol, seg.depth + 1});
    }
    out.converged = out.error_estimate <=
                    opt.abs_tol * 8.0 + 8.0 * opt.noise_rel * std::fabs(out.value);
    return out;
}

template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-12) {
    Options opt;
    opt.abs_tol = abs_tol;
    Outcome out = try_integrate(std::forward<F>(f), a, b, opt);
    if (out.diverged)
        throw SolverError("quadrature diverged on [" + std::to_string(a) + "," +
                          std::to_string(b) + "]");
    if (!out.converged)
        throw SolverError("quadrature non-convergent: value=" + std::to_string(out.value) +
                          " err=" + std::to_string(out.error_estimate) +
                          " evals=" + std::to_string(out.evaluations));
    return out.value;
}

/// Integrate f over [a,b] where f behaves like (p-a)^(-1/2) near a.
/// Substituting p = a + u^2 removes the blowup.
template <class F>
Outcome try_integrate_sqrt_left(F&& f, double a, double b, Options opt = {}) {
    const double w = std::sqrt(b - a);
    auto g = [&](double u) { return 2.0 * u * f(a + u * u); };
    return try_integrate(g, 0.0, w, opt);
}

/// Same with the near-singular end at b: p = b - u^2.
template <class F>
Outcome try_integrate_sqrt_right(F&& f, double a, double b, Options opt = {}) {
    const double w = std::sqrt(b - a);
    auto g = [&](double u) { return 2.0 * u * f(b - u * u); };
    return try_integrate(g, 0.0, w, opt);
}

} // namespace waves::quad
