#include "waves/dispersion.hpp"

#include <cmath>
#include <vector>

#include "waves/errors.hpp"
#include "waves/io.hpp"
#include "waves/log.hpp"
#include "waves/rootfind.hpp"
#include "waves/spline.hpp"

namespace waves {

namespace {

/// Coefficients of the first-order form u = phi, v = phi'/H_p^3:
///   u' = A(p) v,   v' = lambda^2 B(p) u,
/// with A = H_p^3 = (s^2 - 2 Omega)^{-3/2} and B = 1/H_p = (s^2 - 2 Omega)^{1/2},
/// sampled on the half-step grid p_k = k/(2N) so RK4 never re-evaluates Omega.
struct ShootingCoefficients {
    int steps;
    std::vector<double> A; // size 2*steps+1
    std::vector<double> B;

    ShootingCoefficients(const StreamSolution& stream, int n) : steps(n) {
        A.resize(2 * n + 1);
        B.resize(2 * n + 1);
        const double s2 = stream.s() * stream.s();
        const VorticityModel& model = stream.model();
        for (int k = 0; k <= 2 * n; ++k) {
            const double p = static_cast<double>(k) / (2.0 * n);
            const double g = s2 - 2.0 * model.Omega(p);
            if (!(g > 0.0))
                throw SolverError("dispersion coefficients: s^2 - 2 Omega not positive at p = " +
                                  io::fmt17(p));
            const double root = std::sqrt(g);
            B[k] = root;
            A[k] = 1.0 / (g * root);
        }
    }
};

struct ShotResult {
    double u1 = 0.0; // phi(1)
    double v1 = 0.0; // flux at 1
};

/// RK4 over [0,1] from u(0)=0, v(0)=1. Optionally records u at every
/// `stride`-th node into out_u (including both endpoints).
ShotResult shoot(const ShootingCoefficients& c, double lambda, int stride = 0,
                 std::vector<double>* out_u = nullptr,
                 std::vector<double>* out_v = nullptr) {
    const int n = c.steps;
    const double h = 1.0 / n;
    const double lam2 = lambda * lambda;
    double u = 0.0, v = 1.0;
    if (out_u) {
        out_u->clear();
        out_u->push_back(u);
    }
    if (out_v) {
        out_v->clear();
        out_v->push_back(v);
    }
    for (int k = 0; k < n; ++k) {
        const double A0 = c.A[2 * k], Am = c.A[2 * k + 1], A1 = c.A[2 * k + 2];
        const double B0 = c.B[2 * k], Bm = c.B[2 * k + 1], B1 = c.B[2 * k + 2];
        const double ku1 = A0 * v;
        const double kv1 = lam2 * B0 * u;
        const double ku2 = Am * (v + 0.5 * h * kv1);
        const double kv2 = lam2 * Bm * (u + 0.5 * h * ku1);
        const double ku3 = Am * (v + 0.5 * h * kv2);
        const double kv3 = lam2 * Bm * (u + 0.5 * h * ku2);
        const double ku4 = A1 * (v + h * kv3);
        const double kv4 = lam2 * B1 * (u + h * ku3);
        u += h / 6.0 * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4);
        v += h / 6.0 * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4);
        if (out_u && stride > 0 && (k + 1) % stride == 0) out_u->push_back(u);
        if (out_v && stride > 0 && (k + 1) % stride == 0) out_v->push_back(v);
    }
    return {u, v};
}

double residual_from(const ShootingCoefficients& c, double lambda) {
    ShotResult shot = shoot(c, lambda);
    return shot.v1 - shot.u1;
}

} // namespace

double dispersion_residual(const StreamSolution& stream, double lambda, int steps) {
    ShootingCoefficients c(stream, steps);
    return residual_from(c, lambda);
}

BifurcationSeed dispersion_eigenvalue(const StreamSolution& stream, int steps) {
    if (steps < 256 || steps % 256 != 0)
        throw SolverError("dispersion: step count must be a multiple of 256");
    ShootingCoefficients c(stream, steps);
    auto res = [&](double lambda) { return residual_from(c, lambda); };

    double blo = 0.0, bhi = 0.0;
    if (!roots::scan_bracket(res, 1e-6, 100.0, 64, true, blo, bhi))
        throw RegimeError("no bifurcation point: the boundary residual has no sign change "
                          "on lambda in (1e-06, 100); the stream with s = " +
                          io::fmt17(stream.s()) + " is not subcritical");
    roots::Options ropt;
    ropt.x_tol = 1e-15;
    double lambda0 = roots::solve_bracketed(res, blo, bhi, ropt);

    // The eigenfunction stretches like exp(lambda int H_p); keep the step
    // small against the local rate lambda*H_p or the fourth-order accuracy
    // of both the integrator and the residual certificate degrades.
    double hp_max = 0.0;
    for (double b : c.B) hp_max = std::max(hp_max, 1.0 / b);
    const double rate = lambda0 * hp_max;
    const int needed = 2048 * static_cast<int>(std::ceil(rate * 256.0 / 2048.0));
    if (needed > steps) {
        logging::debug("dispersion: refining from " + std::to_string(steps) + " to " +
                       std::to_string(needed) + " steps (rate " + io::fmt17(rate) + ")");
        c = ShootingCoefficients(stream, needed);
        steps = needed;
        double flo = res(lambda0 * (1.0 - 1e-3));
        double fhi = res(lambda0 * (1.0 + 1e-3));
        if (flo * fhi <= 0.0) {
            lambda0 = roots::solve_bracketed(res, lambda0 * (1.0 - 1e-3),
                                             lambda0 * (1.0 + 1e-3), ropt);
        } else {
            if (!roots::scan_bracket(res, 1e-6, 100.0, 64, true, blo, bhi))
                throw SolverError("dispersion: refined bracket lost the eigenvalue");
            lambda0 = roots::solve_bracketed(res, blo, bhi, ropt);
        }
    }
    logging::debug("dispersion lambda0 = " + io::fmt17(lambda0) + " with " +
                   std::to_string(steps) + " steps");

    // Final integration pass: keep every 8th node for the stored eigenfunction
    // and the full trace for the residual certificates.
    std::vector<double> ufull, vfull;
    ShotResult shot = shoot(c, lambda0, 1, &ufull, &vfull);
    if (!(shot.u1 > 0.0))
        throw SolverError("dispersion: eigenfunction has nonpositive surface value " +
                          io::fmt17(shot.u1));

    // Interior residual -(phi'/H_p^3)' + lambda^2 phi/H_p = -(v' - lambda^2 B u),
    // with v' from five-point differences on the integration grid.
    const int n = steps;
    const double h = 1.0 / n;
    const double lam2 = lambda0 * lambda0;
    double sl_max = 0.0;
    for (int k = 2; k <= n - 2; ++k) {
        const double vp = (vfull[k - 2] - 8.0 * vfull[k - 1] + 8.0 * vfull[k + 1] -
                           vfull[k + 2]) /
                          (12.0 * h);
        const double rk = std::fabs(vp - lam2 * c.B[2 * k] * ufull[k]) / shot.u1;
        if (rk > sl_max) sl_max = rk;
    }
    // Boundary row phi'(1) - H_p^3(1) phi(1), using the integrated flux.
    const double hp3_surf = c.A[2 * n];
    const double boundary = std::fabs(hp3_surf * (shot.v1 - shot.u1)) / shot.u1;

    const int stride = n / 256;
    const int m = n / stride;
    Eigen::VectorXd p_grid(m + 1), phi0(m + 1);
    for (int j = 0; j <= m; ++j) {
        p_grid[j] = static_cast<double>(j * stride) / n;
        phi0[j] = ufull[static_cast<size_t>(j) * stride] / shot.u1;
    }
    for (int j = 1; j <= m; ++j)
        if (!(phi0[j] > 0.0))
            throw SolverError("dispersion: eigenfunction not positive at p = " +
                              io::fmt17(p_grid[j]));

    return BifurcationSeed(stream, lambda0, std::move(p_grid), std::move(phi0), sl_max,
                           boundary);
}

BifurcationSeed::BifurcationSeed(StreamSolution stream, double lambda0,
                                 Eigen::VectorXd p_grid, Eigen::VectorXd phi0,
                                 double sl_residual_max, double boundary_residual)
    : stream_(std::move(stream)),
      lambda0_(lambda0),
      p_grid_(std::move(p_grid)),
      phi0_(std::move(phi0)),
      sl_residual_max_(sl_residual_max),
      boundary_residual_(boundary_residual) {
    interp_ = std::make_shared<const CubicSpline>(CubicSpline::natural(p_grid_, phi0_));
}

double BifurcationSeed::phi0_at(double p) const {
    if (!(p >= 0.0 && p <= 1.0))
        throw SolverError("phi0_at: p = " + io::fmt17(p) + " outside [0,1]");
    return (*interp_)(p);
}

Eigen::MatrixXd kernel_mode(const BifurcationSeed& seed, const Eigen::VectorXd& q_grid) {
    return kernel_mode(seed, q_grid, seed.p_grid());
}

Eigen::MatrixXd kernel_mode(const BifurcationSeed& seed, const Eigen::VectorXd& q_grid,
                            const Eigen::VectorXd& p_grid) {
    Eigen::MatrixXd w(q_grid.size(), p_grid.size());
    Eigen::VectorXd phi(p_grid.size());
    for (Eigen::Index j = 0; j < p_grid.size(); ++j) phi[j] = seed.phi0_at(p_grid[j]);
    for (Eigen::Index i = 0; i < q_grid.size(); ++i)
        for (Eigen::Index j = 0; j < p_grid.size(); ++j)
            w(i, j) = phi[j] * std::cos(q_grid[i]);
    return w;
}

std::string seed_json(const BifurcationSeed& seed) {
    io::JsonWriter jw;
    jw.number("lambda0", seed.lambda0());
    jw.raw("p_grid", io::json_number_array(seed.p_grid()));
    jw.raw("phi0", io::json_number_array(seed.phi0()));
    jw.number("sl_residual_max", seed.sl_residual_max());
    jw.number("boundary_residual", seed.boundary_residual());
    jw.raw("stream", stream_json(seed.stream()));
    return jw.str();
}

} // namespace waves
