#include "waves/grid.hpp"

#include <cmath>
#include <string>

#include "waves/errors.hpp"

namespace waves {

namespace {

const double kPi = 3.14159265358979323846;

void check_sizes(int Nq, int Np) {
    if (Nq < 4 || Nq % 2 != 0)
        throw ParseError("Nq must be even and at least 4, got " + std::to_string(Nq));
    if (Np < 3)
        throw ParseError("Np must be at least 3, got " + std::to_string(Np));
}

Eigen::VectorXd half_period_nodes(int Nq) {
    const int M = Nq / 2;
    Eigen::VectorXd q(M + 1);
    for (int i = 0; i <= M; ++i) q(i) = kPi * static_cast<double>(i) / M;
    return q;
}

} // namespace

StripGrid StripGrid::uniform(int Nq, int Np) {
    check_sizes(Nq, Np);
    StripGrid g;
    g.Nq = Nq;
    g.Np = Np;
    g.clustered = false;
    g.q = half_period_nodes(Nq);
    g.p.resize(Np + 1);
    for (int j = 0; j <= Np; ++j) g.p(j) = static_cast<double>(j) / Np;
    return g;
}

StripGrid StripGrid::stretched(int Nq, int Np) {
    check_sizes(Nq, Np);
    StripGrid g;
    g.Nq = Nq;
    g.Np = Np;
    g.clustered = true;
    g.q = half_period_nodes(Nq);
    g.p.resize(Np + 1);
    for (int j = 0; j <= Np; ++j)
        g.p(j) = std::sin(0.5 * kPi * static_cast<double>(j) / Np);
    g.p(0) = 0.0;
    g.p(Np) = 1.0;
    return g;
}

Eigen::VectorXd fd_weights(const Eigen::VectorXd& xs, double x0, int order) {
    const int n = static_cast<int>(xs.size());
    if (order < 0 || order >= n)
        throw SolverError("fd_weights: need more than " + std::to_string(order) +
                          " nodes for derivative order " + std::to_string(order));
    // Row k demands exactness on (x - x0)^k.
    Eigen::MatrixXd V(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        double pw = 1.0;
        for (int k = 0; k < n; ++k) {
            V(k, i) = pw;
            pw *= xs(i) - x0;
        }
    }
    double fact = 1.0;
    for (int k = 2; k <= order; ++k) fact *= k;
    rhs(order) = fact;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    if (!lu.isInvertible())
        throw SolverError("fd_weights: coincident nodes make the stencil singular");
    return lu.solve(rhs);
}

Eigen::Vector3d central_first(double A, double B) {
    return {-B / (A * (A + B)), (B - A) / (A * B), A / (B * (A + B))};
}

Eigen::Vector3d onesided_first_top(double A, double B) {
    return {(2.0 * A + B) / (A * (A + B)), -(A + B) / (A * B), A / (B * (A + B))};
}

} // namespace waves
