#pragma once

#include <memory>
#include <string>

#include <Eigen/Dense>

#include "waves/streamflow.hpp"

namespace waves {

class CubicSpline;

/// Ground-state solution of the dispersion problem at a subcritical stream:
///   -(phi' / H_p^3)' + lambda^2 phi / H_p = 0 on (0,1),
///   phi(0) = 0,  phi'(1) = H_p^3(1) phi(1),
/// normalized so phi(1) = 1. lambda0 is the unique positive wavenumber with
/// a nontrivial solution; the pair seeds the bifurcating wave branch.
class BifurcationSeed {
  public:
    BifurcationSeed(StreamSolution stream, double lambda0, Eigen::VectorXd p_grid,
                    Eigen::VectorXd phi0, double sl_residual_max,
                    double boundary_residual);

    double lambda0() const { return lambda0_; }
    const Eigen::VectorXd& p_grid() const { return p_grid_; }
    const Eigen::VectorXd& phi0() const { return phi0_; }
    const StreamSolution& stream() const { return stream_; }

    double phi0_at(double p) const; // cubic interpolation of the samples

    /// Interior equation residual (max norm over the integration grid) and
    /// boundary-row residual, both recorded when the seed was built.
    double sl_residual_max() const { return sl_residual_max_; }
    double boundary_residual() const { return boundary_residual_; }

  private:
    StreamSolution stream_;
    double lambda0_ = 0.0;
    Eigen::VectorXd p_grid_;
    Eigen::VectorXd phi0_;
    double sl_residual_max_ = 0.0;
    double boundary_residual_ = 0.0;
    std::shared_ptr<const CubicSpline> interp_;
};

/// Shooting residual at the surface for a trial wavenumber: integrate with
/// phi(0) = 0 and unit flux and return the mismatch in the boundary row.
/// Vanishes exactly at eigenvalues; one sign change on (0, inf) for
/// subcritical streams.
double dispersion_residual(const StreamSolution& stream, double lambda,
                           int steps = 2048);

/// Solve for lambda0 by a geometric scan of (1e-6, 100) followed by a
/// bracketed root solve. Throws RegimeError when no sign change exists
/// (the stream is not subcritical).
BifurcationSeed dispersion_eigenvalue(const StreamSolution& stream, int steps = 2048);

/// Kernel direction at the stream: w(q,p) = phi0(p) cos(q), sampled on the
/// seed's own p-grid (rows follow q_grid, columns the p-grid).
Eigen::MatrixXd kernel_mode(const BifurcationSeed& seed, const Eigen::VectorXd& q_grid);
Eigen::MatrixXd kernel_mode(const BifurcationSeed& seed, const Eigen::VectorXd& q_grid,
                            const Eigen::VectorXd& p_grid);

std::string seed_json(const BifurcationSeed& seed);

} // namespace waves
