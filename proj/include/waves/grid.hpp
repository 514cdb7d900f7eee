#pragma once

#include <Eigen/Dense>

namespace waves {

/// Solver grid on the half-period strip [0,pi] x [0,1]. The q direction is
/// uniform; evenness of the height function supplies the other half period.
/// The p levels are either uniform or clustered toward the surface p=1 by a
/// sine map, which pays off once the flow gets close to stagnation there.
struct StripGrid {
    int Nq = 0;              // full-period column count, even
    int Np = 0;              // number of p intervals
    bool clustered = false;  // true when built by stretched()
    Eigen::VectorXd q;       // M+1 nodes, q_i = i*pi/M with M = Nq/2
    Eigen::VectorXd p;       // Np+1 nodes, p_0 = 0, p_Np = 1, strictly increasing

    int M() const { return Nq / 2; }
    double dq() const { return q(1) - q(0); }

    static StripGrid uniform(int Nq, int Np);
    static StripGrid stretched(int Nq, int Np);
};

/// Weights w such that sum_i w_i f(x_i) approximates the order-th derivative
/// of f at x0. Exact for polynomials of degree < xs.size(); solved from the
/// small Vandermonde system.
Eigen::VectorXd fd_weights(const Eigen::VectorXd& xs, double x0, int order);

/// Central first-derivative weights for nodes (x0-A, x0, x0+B), in that
/// order. Second-order accurate on non-uniform spacings.
Eigen::Vector3d central_first(double A, double B);

/// One-sided first-derivative weights at the upper edge for nodes
/// (x0, x0-A, x0-A-B), in that order. Second-order accurate.
Eigen::Vector3d onesided_first_top(double A, double B);

} // namespace waves
