#include "waves/streamflow.hpp"

#include <cmath>
#include <limits>

#include "waves/errors.hpp"
#include "waves/io.hpp"
#include "waves/quadrature.hpp"
#include "waves/rootfind.hpp"

namespace waves {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

quad::Outcome merge(const quad::Outcome& a, const quad::Outcome& b) {
    quad::Outcome out;
    out.value = a.value + b.value;
    out.error_estimate = a.error_estimate + b.error_estimate;
    out.evaluations = a.evaluations + b.evaluations;
    out.converged = a.converged && b.converged;
    out.diverged = a.diverged || b.diverged;
    return out;
}

/// Integral over [a,b] of (s^2 - 2 Omega(p))^{-power/2}, power 1 or 3. The
/// integrand peaks where 2 Omega approaches s^2, which happens at the argmax
/// of Omega; integrating with a square-root change of variables toward that
/// point keeps the rule accurate whether or not a blowup is actually present
/// (the substituted integrand is smooth in both cases).
quad::Outcome inverse_power_integral(const VorticityModel& model, double s,
                                     double a, double b, int power) {
    const double s2 = s * s;
    auto f = [&](double p) {
        const double g = s2 - 2.0 * model.Omega(p);
        if (g <= 0.0) return kInf;
        double v = 1.0 / std::sqrt(g);
        if (power == 3) v /= g;
        return v;
    };
    quad::Options opt;
    const double pstar = model.two_omega_argmax();
    if (pstar <= a) return quad::try_integrate_sqrt_left(f, a, b, opt);
    if (pstar >= b) return quad::try_integrate_sqrt_right(f, a, b, opt);
    return merge(quad::try_integrate_sqrt_right(f, a, pstar, opt),
                 quad::try_integrate_sqrt_left(f, pstar, b, opt));
}

double require_integral(const quad::Outcome& out, const std::string& what) {
    if (out.diverged || !out.converged)
        throw SolverError(what + ": quadrature failed (value=" + io::fmt17(out.value) +
                          ", err=" + io::fmt17(out.error_estimate) +
                          ", evals=" + std::to_string(out.evaluations) + ")");
    return out.value;
}

void require_admissible(const VorticityModel& model, double s) {
    const double s0sq = std::max(0.0, model.two_omega_max());
    if (!(s > 0.0) || !(s * s > s0sq))
        throw RegimeError("stream parameter s = " + io::fmt17(s) +
                          " is not admissible: s must exceed s0 = " +
                          io::fmt17(std::sqrt(s0sq)));
}

} // namespace

StreamSolution::StreamSolution(VorticityModel model, double s)
    : model_(std::move(model)), s_(s) {
    require_admissible(model_, s_);
    depth_ = require_integral(inverse_power_integral(model_, s_, 0.0, 1.0, 1),
                              "stream depth at s = " + io::fmt17(s_));
}

double StreamSolution::bernoulli() const {
    return 0.5 * s_ * s_ - model_.Omega1() + depth_;
}

double StreamSolution::height(double p) const {
    if (!(p >= 0.0 && p <= 1.0))
        throw SolverError("stream height: p = " + io::fmt17(p) + " outside [0,1]");
    return require_integral(inverse_power_integral(model_, s_, 0.0, p, 1),
                            "stream height at p = " + io::fmt17(p));
}

double StreamSolution::slope(double p) const {
    if (!(p >= 0.0 && p <= 1.0))
        throw SolverError("stream slope: p = " + io::fmt17(p) + " outside [0,1]");
    const double g = s_ * s_ - 2.0 * model_.Omega(p);
    if (!(g > 0.0))
        throw SolverError("stream slope: s^2 - 2 Omega vanishes at p = " + io::fmt17(p));
    return 1.0 / std::sqrt(g);
}

StreamSolution stream_solution(const VorticityModel& model, double s) {
    return StreamSolution(model, s);
}

double stream_depth(const VorticityModel& model, double s) {
    require_admissible(model, s);
    return require_integral(inverse_power_integral(model, s, 0.0, 1.0, 1),
                            "stream depth at s = " + io::fmt17(s));
}

double stream_bernoulli(const VorticityModel& model, double s) {
    return 0.5 * s * s - model.Omega1() + stream_depth(model, s);
}

CriticalParams critical_parameters(const VorticityModel& model) {
    CriticalParams crit;
    const double s0sq = std::max(0.0, model.two_omega_max());
    crit.s0 = std::sqrt(s0sq);

    // g(s) = int_0^1 (s^2 - 2 Omega)^{-3/2} - 1, strictly decreasing in s,
    // positive near s0 (the integral blows up) and -1 in the limit s -> inf.
    auto g = [&](double s) {
        quad::Outcome out = inverse_power_integral(model, s, 0.0, 1.0, 3);
        if (out.diverged || !std::isfinite(out.value)) return 1e15;
        return out.value - 1.0;
    };

    const double scale = std::max(crit.s0, 1.0);
    double delta = 1e-3 * scale;
    double lo = crit.s0 + delta;
    int guard = 0;
    while (g(lo) <= 0.0) {
        delta *= 0.1;
        lo = crit.s0 + delta;
        if (++guard > 12)
            throw SolverError("critical parameters: no bracket for s_c above s0 = " +
                              io::fmt17(crit.s0));
    }
    double hi = std::max(2.0 * lo, crit.s0 + 1.0);
    guard = 0;
    while (g(hi) >= 0.0) {
        hi *= 2.0;
        if (++guard > 60)
            throw SolverError("critical parameters: no upper bracket for s_c");
    }
    roots::Options ropt;
    ropt.x_tol = 1e-15;
    crit.sc = roots::solve_bracketed(g, lo, hi, ropt);
    crit.Rc = stream_bernoulli(model, crit.sc);

    // Probe the limiting depth at three points approaching s0 with
    // sqrt(delta) halving, delta = s^2 - s0^2. A finite limit behaves like
    // d0 - C sqrt(delta) + D delta, so gaps between probes shrink by about
    // one half and Lagrange extrapolation in sqrt(delta) recovers d0. Gaps
    // that fail to shrink expose a divergent limit: d0 and R0 are infinite.
    const double base = crit.s0 > 0.0 ? crit.s0 : 1.0;
    double probes[3];
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
        const double delta = 1e-6 * base * base / std::pow(4.0, k);
        quad::Outcome out =
            inverse_power_integral(model, std::sqrt(s0sq + delta), 0.0, 1.0, 1);
        ok = !out.diverged && out.converged && out.value <= 1e6;
        probes[k] = out.value;
    }
    const double g1 = ok ? probes[1] - probes[0] : 0.0;
    const double g2 = ok ? probes[2] - probes[1] : 0.0;
    const double settled = ok ? 1e-12 * std::max(1.0, std::abs(probes[2])) : 0.0;
    if (!ok || (std::abs(g1) > settled && (!(g1 > 0.0) || g2 >= 0.75 * g1))) {
        crit.d0 = kInf;
        crit.R0 = kInf;
    } else if (std::abs(g1) <= settled) {
        crit.d0 = probes[2];
        crit.R0 = 0.5 * s0sq - model.Omega1() + crit.d0;
    } else {
        crit.d0 = (probes[0] - 6.0 * probes[1] + 8.0 * probes[2]) / 3.0;
        crit.R0 = 0.5 * s0sq - model.Omega1() + crit.d0;
    }
    return crit;
}

FlowRegime conjugate_streams(const VorticityModel& model, double r) {
    return conjugate_streams(model, critical_parameters(model), r);
}

FlowRegime conjugate_streams(const VorticityModel& model, const CriticalParams& crit,
                             double r) {
    if (!std::isfinite(r))
        throw RegimeError("head r must be finite, got " + io::fmt17(r));
    if (!(r > crit.Rc))
        throw RegimeError("r <= Rc: r = " + io::fmt17(r) + ", Rc = " + io::fmt17(crit.Rc) +
                          " (no conjugate streams at or below the critical head)");
    if (!(r < crit.d0))
        throw RegimeError("r >= d0: r = " + io::fmt17(r) + ", d0 = " + io::fmt17(crit.d0) +
                          " (regime assumption r < d0 violated)");

    // Capped, non-throwing head evaluation: probing near s0 can push the
    // depth quadrature into its blowup regime, which only means the head is
    // far above r there.
    auto head_gap = [&](double s) {
        quad::Outcome d = inverse_power_integral(model, s, 0.0, 1.0, 1);
        double depth = d.value;
        if (d.diverged || !std::isfinite(depth) || depth > 1e15) depth = 1e15;
        return 0.5 * s * s - model.Omega1() + depth - r;
    };

    // Lower root: R decreases from R0 (>= d0 > r) to Rc (< r) on (s0, sc).
    const double scale = std::max(crit.s0, 1.0);
    double delta = std::min(1e-3 * scale, 0.5 * (crit.sc - crit.s0));
    double lo = crit.s0 + delta;
    int guard = 0;
    while (head_gap(lo) <= 0.0) {
        delta *= 0.1;
        lo = crit.s0 + delta;
        if (++guard > 14)
            throw SolverError("conjugate streams: no bracket for s_minus near s0 = " +
                              io::fmt17(crit.s0));
    }
    roots::Options ropt;
    ropt.x_tol = 1e-15;
    FlowRegime reg;
    reg.r = r;
    reg.s0 = crit.s0;
    reg.sc = crit.sc;
    reg.Rc = crit.Rc;
    reg.R0 = crit.R0;
    reg.d0 = crit.d0;
    reg.s_minus = roots::solve_bracketed(head_gap, lo, crit.sc, ropt);

    // Upper root: R increases without bound beyond sc.
    double hi = std::max(2.0 * crit.sc, crit.sc + 1.0);
    guard = 0;
    while (head_gap(hi) <= 0.0) {
        hi *= 2.0;
        if (++guard > 60)
            throw SolverError("conjugate streams: no upper bracket for s_plus");
    }
    reg.s_plus = roots::solve_bracketed(head_gap, crit.sc, hi, ropt);

    reg.d_plus = stream_depth(model, reg.s_minus);
    reg.d_minus = stream_depth(model, reg.s_plus);
    return reg;
}

double depth_to_s(const VorticityModel& model, const CriticalParams& crit, double depth) {
    if (!(depth > 0.0))
        throw RegimeError("depth_to_s: depth must be positive, got " + io::fmt17(depth));
    if (!(depth < crit.d0))
        throw RegimeError("depth_to_s: depth = " + io::fmt17(depth) +
                          " is not below d0 = " + io::fmt17(crit.d0));

    auto gap = [&](double s) {
        quad::Outcome d = inverse_power_integral(model, s, 0.0, 1.0, 1);
        double value = d.value;
        if (d.diverged || !std::isfinite(value) || value > 1e15) value = 1e15;
        return value - depth;
    };
    const double scale = std::max(crit.s0, 1.0);
    double delta = 1e-3 * scale;
    double lo = crit.s0 + delta;
    int guard = 0;
    while (gap(lo) <= 0.0) {
        delta *= 0.1;
        lo = crit.s0 + delta;
        if (++guard > 14)
            throw SolverError("depth_to_s: no bracket near s0 for depth = " +
                              io::fmt17(depth));
    }
    double hi = std::max(2.0 * lo, crit.s0 + 1.0);
    guard = 0;
    while (gap(hi) >= 0.0) {
        hi *= 2.0;
        if (++guard > 60)
            throw SolverError("depth_to_s: no upper bracket for depth = " + io::fmt17(depth));
    }
    roots::Options ropt;
    ropt.x_tol = 1e-15;
    return roots::solve_bracketed(gap, lo, hi, ropt);
}

std::string stream_json(const StreamSolution& sol) {
    io::JsonWriter jw;
    jw.number("s", sol.s()).number("depth", sol.depth()).number("bernoulli", sol.bernoulli());
    return jw.str();
}

std::string regime_json(const VorticityModel& model, const FlowRegime& regime) {
    io::JsonWriter jw;
    jw.text("omega", model.describe());
    jw.text("omega_class", omega_class_name(model.omega_class()));
    jw.number("r", regime.r);
    jw.number("s0", regime.s0);
    jw.number("sc", regime.sc);
    jw.number("Rc", regime.Rc);
    jw.number("R0", regime.R0);
    jw.number("d0", regime.d0);
    jw.number("s_minus", regime.s_minus);
    jw.number("s_plus", regime.s_plus);
    jw.number("d_plus", regime.d_plus);
    jw.number("d_minus", regime.d_minus);
    return jw.str();
}

} // namespace waves
