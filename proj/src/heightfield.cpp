#include "waves/heightfield.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include "waves/errors.hpp"
#include "waves/io.hpp"
#include "waves/log.hpp"
#include "waves/rootfind.hpp"
#include "waves/spline.hpp"
#include "waves/streamflow.hpp"

namespace waves {

namespace {

const double kPi = 3.14159265358979323846;

int uidx(int i, int j, int M) { return (j - 1) * (M + 1) + i; }

[[noreturn]] void breach(const std::string& what, double value, int i, const std::string& where) {
    std::ostringstream os;
    os << "stagnation breach: " << what << " = " << value << " at q index " << i
       << ", " << where;
    throw StagnationError(os.str());
}

/// Everything the residual and the Jacobian share: node derivatives and the
/// two flux families. Construction performs the h_p > 0 checks.
struct Tables {
    int M = 0, Np = 0;
    double dq = 0.0, lam = 0.0;
    Eigen::MatrixXd hq;  // (M+1) x (Np+1), node h_q; 0 at i = 0 and i = M
    Eigen::MatrixXd hpc; // (M+1) x (Np+1), central h_p, valid j = 1..Np-1
    Eigen::VectorXd hps; // M+1, one-sided surface h_p
    Eigen::MatrixXd g;   // (M+1) x Np, face secants between levels jf, jf+1
    Eigen::MatrixXd u;   // (M+1) x Np, face-averaged h_q
    Eigen::MatrixXd Phi; // (M+1) x Np, p-flux
    Eigen::MatrixXd t;   // M x (Np+1), face h_q between columns ifc, ifc+1
    Eigen::MatrixXd m;   // M x (Np+1), face-averaged h_p
    Eigen::MatrixXd Psi; // M x (Np+1), q-flux, valid j = 1..Np-1
};

Tables build_tables(const HeightField& f) {
    const StripGrid& grid = f.grid();
    const VorticityModel& model = f.model();
    const int M = grid.M(), Np = grid.Np;
    const Eigen::VectorXd& p = grid.p;

    Tables tb;
    tb.M = M;
    tb.Np = Np;
    tb.dq = grid.dq();
    tb.lam = f.lambda();
    if (!(tb.lam > 0.0) || !std::isfinite(tb.lam))
        throw SolverError("wavenumber must be positive and finite, got lambda = " +
                          io::fmt17(tb.lam));
    const double lam2 = tb.lam * tb.lam;

    tb.hq.setZero(M + 1, Np + 1);
    for (int j = 0; j <= Np; ++j)
        for (int i = 1; i < M; ++i)
            tb.hq(i, j) = (f.h(i + 1, j) - f.h(i - 1, j)) / (2.0 * tb.dq);

    tb.hpc.setZero(M + 1, Np + 1);
    for (int j = 1; j < Np; ++j) {
        const Eigen::Vector3d st = central_first(p(j) - p(j - 1), p(j + 1) - p(j));
        for (int i = 0; i <= M; ++i) {
            const double v = st(0) * f.h(i, j - 1) + st(1) * f.h(i, j) + st(2) * f.h(i, j + 1);
            if (!(v > 0.0))
                breach("central h_p", v, i, "p level " + std::to_string(j));
            tb.hpc(i, j) = v;
        }
    }

    tb.hps.resize(M + 1);
    {
        const Eigen::Vector3d st =
            onesided_first_top(p(Np) - p(Np - 1), p(Np - 1) - p(Np - 2));
        for (int i = 0; i <= M; ++i) {
            const double v =
                st(0) * f.h(i, Np) + st(1) * f.h(i, Np - 1) + st(2) * f.h(i, Np - 2);
            if (!(v > 0.0))
                breach("surface h_p", v, i, "p level " + std::to_string(Np));
            tb.hps(i) = v;
        }
    }

    tb.g.resize(M + 1, Np);
    tb.u.resize(M + 1, Np);
    tb.Phi.resize(M + 1, Np);
    for (int jf = 0; jf < Np; ++jf) {
        const double dpj = p(jf + 1) - p(jf);
        const double Wmid = model.Omega(0.5 * (p(jf) + p(jf + 1)));
        for (int i = 0; i <= M; ++i) {
            const double gv = (f.h(i, jf + 1) - f.h(i, jf)) / dpj;
            if (!(gv > 0.0))
                breach("face h_p", gv, i,
                       "p interval " + std::to_string(jf) + ".." + std::to_string(jf + 1));
            const double uv = 0.5 * (tb.hq(i, jf) + tb.hq(i, jf + 1));
            tb.g(i, jf) = gv;
            tb.u(i, jf) = uv;
            tb.Phi(i, jf) = (1.0 + lam2 * uv * uv) / (2.0 * gv * gv) + Wmid;
        }
    }

    tb.t.setZero(M, Np + 1);
    tb.m.setZero(M, Np + 1);
    tb.Psi.setZero(M, Np + 1);
    for (int j = 1; j < Np; ++j)
        for (int ifc = 0; ifc < M; ++ifc) {
            const double mv = 0.5 * (tb.hpc(ifc, j) + tb.hpc(ifc + 1, j));
            const double tv = (f.h(ifc + 1, j) - f.h(ifc, j)) / tb.dq;
            tb.t(ifc, j) = tv;
            tb.m(ifc, j) = mv;
            tb.Psi(ifc, j) = tv / mv;
        }

    return tb;
}

double half_cell(const Eigen::VectorXd& p, int j) { return 0.5 * (p(j + 1) - p(j - 1)); }

} // namespace

HeightField::HeightField(StripGrid grid, VorticityModel model, double r, double lambda)
    : grid_(std::move(grid)), model_(std::move(model)), r_(r), lambda_(lambda) {
    if (!std::isfinite(r_) || !(r_ > 0.0))
        throw SolverError("Bernoulli constant must be positive and finite, got r = " +
                          io::fmt17(r_));
    set_lambda(lambda);
    h_.setZero(grid_.M() + 1, grid_.Np + 1);
}

void HeightField::set_lambda(double v) {
    if (!std::isfinite(v) || !(v > 0.0))
        throw SolverError("wavenumber must be positive and finite, got lambda = " +
                          io::fmt17(v));
    lambda_ = v;
}

double HeightField::wavelength() const { return 2.0 * kPi / lambda_; }

double HeightField::h_full(int i, int j) const {
    const int Nq = grid_.Nq;
    int k = i % Nq;
    if (k < 0) k += Nq;
    if (k > grid_.M()) k = Nq - k;
    return h_(k, j);
}

Eigen::MatrixXd HeightField::full_data() const {
    const int Nq = grid_.Nq, Np = grid_.Np;
    Eigen::MatrixXd out(Nq, Np + 1);
    for (int i = 0; i < Nq; ++i)
        for (int j = 0; j <= Np; ++j) out(i, j) = h_full(i, j);
    return out;
}

double HeightField::amplitude() const { return h_(0, grid_.Np) - h_(grid_.M(), grid_.Np); }

double HeightField::max_surface() const { return h_.col(grid_.Np).maxCoeff(); }

double HeightField::min_surface() const { return h_.col(grid_.Np).minCoeff(); }

int HeightField::unknowns() const { return grid_.Np * (grid_.M() + 1); }

Eigen::VectorXd HeightField::pack() const {
    const int M = grid_.M(), Np = grid_.Np;
    Eigen::VectorXd x(unknowns());
    for (int j = 1; j <= Np; ++j)
        for (int i = 0; i <= M; ++i) x(uidx(i, j, M)) = h_(i, j);
    return x;
}

void HeightField::unpack(const Eigen::VectorXd& x) {
    const int M = grid_.M(), Np = grid_.Np;
    if (x.size() != unknowns())
        throw SolverError("unknown vector has size " + std::to_string(x.size()) +
                          ", expected " + std::to_string(unknowns()));
    for (int j = 1; j <= Np; ++j)
        for (int i = 0; i <= M; ++i) h_(i, j) = x(uidx(i, j, M));
}

Eigen::VectorXd residual_vector(const HeightField& f) {
    const Tables tb = build_tables(f);
    const int M = tb.M, Np = tb.Np;
    const Eigen::VectorXd& p = f.grid().p;
    const double lam2 = tb.lam * tb.lam;

    // Interior rows are kept in finite-volume form (flux difference over the
    // cell, not divided by the cell width): dividing by the thin stretched
    // cells near p=1 would amplify rounding noise in the flux differences
    // past the convergence tolerances. Same zero set, better conditioning.
    Eigen::VectorXd F(f.unknowns());
    for (int j = 1; j < Np; ++j) {
        const double dpc = half_cell(p, j);
        for (int i = 0; i <= M; ++i) {
            const double dphi = tb.Phi(i, j) - tb.Phi(i, j - 1);
            double divq;
            if (i == 0)
                divq = 2.0 * tb.Psi(0, j) / tb.dq;
            else if (i == M)
                divq = -2.0 * tb.Psi(M - 1, j) / tb.dq;
            else
                divq = (tb.Psi(i, j) - tb.Psi(i - 1, j)) / tb.dq;
            F(uidx(i, j, M)) = dphi - lam2 * dpc * divq;
        }
    }
    for (int i = 0; i <= M; ++i) {
        const double w = tb.hps(i), v = tb.hq(i, Np);
        F(uidx(i, Np, M)) =
            (1.0 + lam2 * v * v) / (2.0 * w * w) + f.h(i, Np) - f.r();
    }
    return F;
}

double residual_norm(const HeightField& f) {
    return residual_vector(f).lpNorm<Eigen::Infinity>();
}

ResidualVector residual(const HeightField& f, std::optional<double> pin) {
    const Eigen::VectorXd F = residual_vector(f);
    const int M = f.grid().M(), Np = f.grid().Np;
    ResidualVector out;
    out.interior.resize(M + 1, Np - 1);
    for (int j = 1; j < Np; ++j)
        for (int i = 0; i <= M; ++i) out.interior(i, j - 1) = F(uidx(i, j, M));
    out.surface.resize(M + 1);
    for (int i = 0; i <= M; ++i) out.surface(i) = F(uidx(i, Np, M));
    out.constraint = pin ? f.amplitude() - *pin : 0.0;
    return out;
}

Eigen::SparseMatrix<double> jacobian(const HeightField& f) {
    const Tables tb = build_tables(f);
    const int M = tb.M, Np = tb.Np;
    const Eigen::VectorXd& p = f.grid().p;
    const double lam = tb.lam, lam2 = lam * lam, dq = tb.dq;
    const int Nh = f.unknowns();
    const int lamcol = Nh;

    std::vector<Eigen::Triplet<double>> T;
    T.reserve(static_cast<size_t>(Nh) * 16);
    auto add = [&](int row, int col, double v) { T.emplace_back(row, col, v); };

    // Dependencies of node h_q(i,j); zero (and unknown-free) at i = 0, M and
    // on the fixed bottom row.
    auto add_hq = [&](int row, int i, int j, double coef) {
        if (i < 1 || i > M - 1 || j < 1) return;
        add(row, uidx(i + 1, j, M), coef / (2.0 * dq));
        add(row, uidx(i - 1, j, M), -coef / (2.0 * dq));
    };

    std::vector<Eigen::Vector3d> cst(Np);
    for (int j = 1; j < Np; ++j)
        cst[j] = central_first(p(j) - p(j - 1), p(j + 1) - p(j));
    auto add_hpc = [&](int row, int i, int j, double coef) {
        const Eigen::Vector3d& st = cst[j];
        if (j - 1 >= 1) add(row, uidx(i, j - 1, M), st(0) * coef);
        add(row, uidx(i, j, M), st(1) * coef);
        add(row, uidx(i, j + 1, M), st(2) * coef);
    };

    const Eigen::Vector3d stop =
        onesided_first_top(p(Np) - p(Np - 1), p(Np - 1) - p(Np - 2));
    auto add_hps = [&](int row, int i, double coef) {
        add(row, uidx(i, Np, M), stop(0) * coef);
        add(row, uidx(i, Np - 1, M), stop(1) * coef);
        add(row, uidx(i, Np - 2, M), stop(2) * coef);
    };

    // p-flux faces: face jf sits between levels jf and jf+1 and feeds the
    // divergence rows at both levels (where those are interior rows).
    for (int jf = 0; jf < Np; ++jf) {
        const double dpj = p(jf + 1) - p(jf);
        for (int i = 0; i <= M; ++i) {
            const double gv = tb.g(i, jf), uv = tb.u(i, jf);
            const double dPhidg = -(1.0 + lam2 * uv * uv) / (gv * gv * gv);
            const double dPhidu = lam2 * uv / (gv * gv);
            const double dPhidlam = lam * uv * uv / (gv * gv);
            for (int pass = 0; pass < 2; ++pass) {
                const int j = jf + pass;
                if (j < 1 || j > Np - 1) continue;
                const double wc = pass == 0 ? 1.0 : -1.0;
                const int row = uidx(i, j, M);
                add(row, uidx(i, jf + 1, M), wc * dPhidg / dpj);
                if (jf >= 1) add(row, uidx(i, jf, M), -wc * dPhidg / dpj);
                add_hq(row, i, jf, 0.5 * wc * dPhidu);
                add_hq(row, i, jf + 1, 0.5 * wc * dPhidu);
                add(row, lamcol, wc * dPhidlam);
            }
        }
    }

    // q-flux faces: face ifc sits between columns ifc and ifc+1. The edge
    // rows i = 0 and i = M see the mirror face with opposite sign, hence the
    // doubled weights.
    for (int j = 1; j < Np; ++j) {
        const double dpc = half_cell(p, j);
        for (int ifc = 0; ifc < M; ++ifc) {
            const double mv = tb.m(ifc, j), tv = tb.t(ifc, j), Psiv = tb.Psi(ifc, j);
            const double dPsidm = -tv / (mv * mv);
            struct Use {
                int i;
                double wq;
            };
            const Use uses[2] = {{ifc, dpc * (ifc == 0 ? 2.0 : 1.0) / dq},
                                 {ifc + 1, dpc * (ifc + 1 == M ? -2.0 : -1.0) / dq}};
            for (const Use& us : uses) {
                const int row = uidx(us.i, j, M);
                const double coef = -lam2 * us.wq;
                add(row, uidx(ifc + 1, j, M), coef / (mv * dq));
                add(row, uidx(ifc, j, M), -coef / (mv * dq));
                add_hpc(row, ifc, j, 0.5 * coef * dPsidm);
                add_hpc(row, ifc + 1, j, 0.5 * coef * dPsidm);
                add(row, lamcol, -2.0 * lam * us.wq * Psiv);
            }
        }
    }

    for (int i = 0; i <= M; ++i) {
        const int row = uidx(i, Np, M);
        const double w = tb.hps(i), v = tb.hq(i, Np);
        add(row, uidx(i, Np, M), 1.0);
        add_hps(row, i, -(1.0 + lam2 * v * v) / (w * w * w));
        add_hq(row, i, Np, lam2 * v / (w * w));
        add(row, lamcol, lam * v * v / (w * w));
    }

    Eigen::SparseMatrix<double> J(Nh, Nh + 1);
    J.setFromTriplets(T.begin(), T.end());
    return J;
}

LinearConstraint amplitude_pin(const HeightField& f, double a) {
    const int M = f.grid().M(), Np = f.grid().Np;
    LinearConstraint c;
    c.coeffs = Eigen::VectorXd::Zero(f.unknowns() + 1);
    c.coeffs(uidx(0, Np, M)) = 1.0;
    c.coeffs(uidx(M, Np, M)) = -1.0;
    c.offset = a;
    return c;
}

NewtonReport newton_core(HeightField& field, const LinearConstraint& constraint,
                         const NewtonOptions& opt) {
    const int Nh = field.unknowns();
    if (constraint.coeffs.size() != Nh + 1)
        throw SolverError("constraint row has size " +
                          std::to_string(constraint.coeffs.size()) + ", expected " +
                          std::to_string(Nh + 1));

    Eigen::VectorXd x = field.pack();
    double lam = field.lambda();
    auto cvalue = [&](const Eigen::VectorXd& xx, double ll) {
        return constraint.coeffs.head(Nh).dot(xx) + constraint.coeffs(Nh) * ll -
               constraint.offset;
    };

    NewtonReport rep;
    Eigen::VectorXd F = residual_vector(field); // initial point must be admissible
    double norm = std::max(F.lpNorm<Eigen::Infinity>(), std::fabs(cvalue(x, lam)));
    rep.residual = norm;
    if (norm <= opt.accept) {
        rep.converged = true;
        rep.message = "initial point already converged";
        return rep;
    }

    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        Eigen::SparseMatrix<double> J = jacobian(field);
        Eigen::SparseMatrix<double> A(Nh + 1, Nh + 1);
        {
            std::vector<Eigen::Triplet<double>> T;
            T.reserve(J.nonZeros() + Nh + 1);
            for (int k = 0; k < J.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(J, k); it; ++it)
                    T.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                   it.value());
            for (int c = 0; c <= Nh; ++c)
                if (constraint.coeffs(c) != 0.0)
                    T.emplace_back(Nh, c, constraint.coeffs(c));
            A.setFromTriplets(T.begin(), T.end());
        }
        Eigen::VectorXd rhs(Nh + 1);
        rhs.head(Nh) = -F;
        rhs(Nh) = -cvalue(x, lam);

        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success) {
            rep.iterations = iter - 1;
            rep.residual = norm;
            rep.message = "bordered Newton system is singular";
            return rep;
        }
        const Eigen::VectorXd dz = lu.solve(rhs);

        double alpha = 1.0;
        bool accepted = false;
        bool saw_breach = false;
        std::string why;
        Eigen::VectorXd Ft;
        for (int bt = 0; bt <= opt.max_backtracks; ++bt, alpha *= 0.5) {
            const Eigen::VectorXd xt = x + alpha * dz.head(Nh);
            const double lamt = lam + alpha * dz(Nh);
            if (!(lamt > 0.0) || !std::isfinite(lamt)) {
                why = "lambda left (0, inf)";
                continue;
            }
            field.unpack(xt);
            field.set_lambda(lamt);
            double normt;
            try {
                Ft = residual_vector(field);
                normt = std::max(Ft.lpNorm<Eigen::Infinity>(),
                                 std::fabs(cvalue(xt, lamt)));
            } catch (const StagnationError& e) {
                saw_breach = true;
                why = e.what();
                continue;
            } catch (const SolverError& e) {
                why = e.what();
                continue;
            }
            if (!std::isfinite(normt)) {
                why = "residual became non-finite";
                continue;
            }
            if (normt <= (1.0 - 1e-4 * alpha) * norm || normt <= opt.tol) {
                x = xt;
                lam = lamt;
                F = Ft;
                norm = normt;
                accepted = true;
                break;
            }
            why = "no residual decrease";
        }
        if (!accepted) {
            field.unpack(x);
            field.set_lambda(lam);
            rep.iterations = iter - 1;
            rep.residual = norm;
            rep.converged = norm <= opt.accept;
            rep.stagnation = saw_breach;
            rep.message = "line search stalled: " + why;
            return rep;
        }
        rep.iterations = iter;
        if (norm <= opt.tol) break;
    }

    field.unpack(x);
    field.set_lambda(lam);
    rep.residual = norm;
    rep.converged = norm <= opt.accept;
    if (!rep.converged)
        rep.message = "no convergence after " + std::to_string(rep.iterations) +
                      " iterations";
    return rep;
}

HeightField newton_solve(const HeightField& initial, double pin,
                         const NewtonOptions& opt) {
    if (!(pin >= 0.0) || !std::isfinite(pin))
        throw SolverError("amplitude pin must be nonnegative and finite, got " +
                          io::fmt17(pin));
    HeightField f = initial;
    const NewtonReport rep = newton_core(f, amplitude_pin(f, pin), opt);
    if (!rep.converged) {
        if (rep.stagnation)
            throw SolverError(
                "approach to interior stagnation: damping exhausted on h_p > 0 (" +
                rep.message + "), residual max-norm " + io::fmt17(rep.residual));
        throw SolverError("newton_solve failed after " + std::to_string(rep.iterations) +
                          " iterations: residual max-norm " + io::fmt17(rep.residual) +
                          (rep.message.empty() ? "" : " (" + rep.message + ")"));
    }
    return f;
}

Eigen::VectorXd discrete_stream_column(const StripGrid& grid,
                                       const VorticityModel& model, double r,
                                       double s_init) {
    const int Np = grid.Np;
    const Eigen::VectorXd& p = grid.p;
    const StreamSolution ss = stream_solution(model, s_init);

    Eigen::VectorXd y(Np + 1);
    y(0) = 0.0;
    for (int j = 1; j <= Np; ++j) y(j) = ss.height(p(j));

    const Eigen::Vector3d stop =
        onesided_first_top(p(Np) - p(Np - 1), p(Np - 1) - p(Np - 2));

    // residual of the q-independent discrete system; false on h_p breach
    auto eval = [&](const Eigen::VectorXd& yy, Eigen::VectorXd& Fc) -> bool {
        Eigen::VectorXd Phi(Np);
        for (int jf = 0; jf < Np; ++jf) {
            const double gv = (yy(jf + 1) - yy(jf)) / (p(jf + 1) - p(jf));
            if (!(gv > 0.0)) return false;
            Phi(jf) = 0.5 / (gv * gv) + model.Omega(0.5 * (p(jf) + p(jf + 1)));
        }
        const double w = stop(0) * yy(Np) + stop(1) * yy(Np - 1) + stop(2) * yy(Np - 2);
        if (!(w > 0.0)) return false;
        Fc.resize(Np);
        for (int j = 1; j < Np; ++j) Fc(j - 1) = Phi(j) - Phi(j - 1);
        Fc(Np - 1) = 0.5 / (w * w) + yy(Np) - r;
        return true;
    };

    Eigen::VectorXd Fc;
    if (!eval(y, Fc))
        throw SolverError("laminar column seed violates h_p > 0");
    double norm = Fc.lpNorm<Eigen::Infinity>();

    for (int iter = 0; iter < 50 && norm > 1e-13; ++iter) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(Np, Np);
        // face jf couples unknowns y(jf), y(jf+1) -> columns jf-1, jf
        for (int jf = 0; jf < Np; ++jf) {
            const double dpj = p(jf + 1) - p(jf);
            const double gv = (y(jf + 1) - y(jf)) / dpj;
            const double dPhidg = -1.0 / (gv * gv * gv);
            for (int pass = 0; pass < 2; ++pass) {
                const int j = jf + pass;
                if (j < 1 || j > Np - 1) continue;
                const double wc = pass == 0 ? 1.0 : -1.0;
                J(j - 1, jf) += wc * dPhidg / dpj; // d/dy(jf+1)
                if (jf >= 1) J(j - 1, jf - 1) -= wc * dPhidg / dpj;
            }
        }
        const double w = stop(0) * y(Np) + stop(1) * y(Np - 1) + stop(2) * y(Np - 2);
        J(Np - 1, Np - 1) += 1.0 - stop(0) / (w * w * w);
        J(Np - 1, Np - 2) -= stop(1) / (w * w * w);
        J(Np - 1, Np - 3) -= stop(2) / (w * w * w);

        const Eigen::VectorXd dy = Eigen::PartialPivLU<Eigen::MatrixXd>(J).solve(-Fc);
        double alpha = 1.0;
        bool ok = false;
        for (int bt = 0; bt < 40; ++bt, alpha *= 0.5) {
            Eigen::VectorXd yt = y;
            yt.tail(Np) += alpha * dy;
            Eigen::VectorXd Ft;
            if (!eval(yt, Ft)) continue;
            const double nt = Ft.lpNorm<Eigen::Infinity>();
            if (nt <= (1.0 - 1e-4 * alpha) * norm || nt < 1e-13) {
                y = yt;
                Fc = Ft;
                norm = nt;
                ok = true;
                break;
            }
        }
        if (!ok) break;
    }
    if (norm > 1e-11)
        throw SolverError("laminar column Newton stalled at residual " + io::fmt17(norm));
    return y;
}

GridSeed grid_dispersion(const StripGrid& grid, const VorticityModel& model, double r,
                         double s_init) {
    GridSeed out;
    out.column = discrete_stream_column(grid, model, r, s_init);
    const int Np = grid.Np;
    const Eigen::VectorXd& p = grid.p;
    const Eigen::VectorXd& y = out.column;

    // coefficient per face: 1 / (dp * g^3), with g the face secant
    Eigen::VectorXd cA(Np);
    for (int jf = 0; jf < Np; ++jf) {
        const double dpj = p(jf + 1) - p(jf);
        const double gv = (y(jf + 1) - y(jf)) / dpj;
        cA(jf) = 1.0 / (dpj * gv * gv * gv);
    }
    Eigen::VectorXd mc(Np);
    for (int j = 1; j < Np; ++j) {
        const Eigen::Vector3d st = central_first(p(j) - p(j - 1), p(j + 1) - p(j));
        mc(j) = st(0) * y(j - 1) + st(1) * y(j) + st(2) * y(j + 1);
    }
    const Eigen::Vector3d stop =
        onesided_first_top(p(Np) - p(Np - 1), p(Np - 1) - p(Np - 2));
    const double w = stop(0) * y(Np) + stop(1) * y(Np - 1) + stop(2) * y(Np - 2);
    const double dq = grid.dq();
    const double cq = (2.0 - 2.0 * std::cos(dq)) / (dq * dq);

    // Surface residual of the cos(q) linearization as a function of lambda;
    // phi is built by the interior recurrence from phi(0) = 0. Rescaling by
    // positive factors keeps the growth in range without touching the sign.
    auto surface_residual = [&](double lam, Eigen::VectorXd* store) -> double {
        const double lam2 = lam * lam;
        Eigen::VectorXd phi;
        if (!store) store = &phi;
        store->resize(Np + 1);
        (*store)(0) = 0.0;
        (*store)(1) = p(1) - p(0);
        for (int j = 1; j < Np; ++j) {
            double next = (*store)(j) + (cA(j - 1) * ((*store)(j) - (*store)(j - 1)) +
                                         half_cell(p, j) * lam2 * cq * (*store)(j) / mc(j)) /
                                            cA(j);
            if (std::fabs(next) > 1e100) {
                store->head(j + 1) *= 1e-100;
                next *= 1e-100;
            }
            (*store)(j + 1) = next;
        }
        const double num = stop(0) * (*store)(Np) + stop(1) * (*store)(Np - 1) +
                           stop(2) * (*store)(Np - 2);
        return (*store)(Np)-num / (w * w * w);
    };

    auto res = [&](double lam) { return surface_residual(lam, nullptr); };

    double lo = 0.0, hi = 0.0;
    double from = 1e-6;
    Eigen::VectorXd phi;
    for (int attempt = 0; attempt < 4; ++attempt) {
        if (!roots::scan_bracket(res, from, 100.0, 64, true, lo, hi))
            throw RegimeError(
                "no bifurcation point on the grid: the discrete surface residual has no "
                "sign change on lambda in (" + io::fmt17(from) + ", 100)");
        roots::Options ro;
        ro.x_tol = 1e-15;
        out.lambda0 = roots::solve_bracketed(res, lo, hi, ro);
        surface_residual(out.lambda0, &phi);
        bool ground = true;
        for (int j = 1; j <= Np; ++j)
            if (!(phi(j) > 0.0)) ground = false;
        if (ground) break;
        logging::debug("grid dispersion: skipping sign change at lambda = " +
                       io::fmt17(out.lambda0) + " (mode changes sign)");
        from = hi;
        if (attempt == 3)
            throw SolverError("grid dispersion found no positive kernel mode");
    }

    // Normalize so a predictor column + a*phi0*cos(q) has crest-to-trough
    // amplitude exactly a.
    out.phi0 = phi * (0.5 / phi(Np));
    return out;
}

HeightField stream_field(const StripGrid& grid, const VorticityModel& model, double r,
                         const Eigen::VectorXd& column, double lambda) {
    if (column.size() != grid.Np + 1)
        throw SolverError("laminar column has size " + std::to_string(column.size()) +
                          ", expected " + std::to_string(grid.Np + 1));
    HeightField f(grid, model, r, lambda);
    for (int i = 0; i <= grid.M(); ++i)
        for (int j = 0; j <= grid.Np; ++j) f.h(i, j) = column(j);
    return f;
}

namespace {

// End slopes for the p-direction splines from 4-point one-sided stencils
// (3rd order), falling back to the secant on tiny grids.
void end_slopes(const Eigen::VectorXd& x, const Eigen::VectorXd& v, double& sl,
                double& sr) {
    const int n = static_cast<int>(x.size());
    if (n < 4) {
        sl = (v(1) - v(0)) / (x(1) - x(0));
        sr = (v(n - 1) - v(n - 2)) / (x(n - 1) - x(n - 2));
        return;
    }
    const Eigen::VectorXd wl = fd_weights(x.head(4), x(0), 1);
    const Eigen::VectorXd wr = fd_weights(x.tail(4), x(n - 1), 1);
    sl = wl.dot(v.head(4));
    sr = wr.dot(v.tail(4));
}

} // namespace

HeightField resample(const HeightField& src, const StripGrid& target) {
    const StripGrid& g0 = src.grid();
    const int M0 = g0.M(), Np0 = g0.Np;
    const int M1 = target.M(), Np1 = target.Np;

    // p pass: each source column onto the target levels
    Eigen::MatrixXd tmp(M0 + 1, Np1 + 1);
    for (int i = 0; i <= M0; ++i) {
        Eigen::VectorXd col(Np0 + 1);
        for (int j = 0; j <= Np0; ++j) col(j) = src.h(i, j);
        double sl, sr;
        end_slopes(g0.p, col, sl, sr);
        const CubicSpline sp = CubicSpline::clamped(g0.p, col, sl, sr);
        tmp(i, 0) = 0.0;
        for (int j = 1; j <= Np1; ++j) tmp(i, j) = sp(target.p(j));
    }

    HeightField out(target, src.model(), src.r(), src.lambda());
    if (M1 == M0) {
        for (int i = 0; i <= M1; ++i)
            for (int j = 0; j <= Np1; ++j) out.h(i, j) = tmp(i, j);
        return out;
    }

    // q pass: evenness pins zero slope at both ends of the half period
    for (int j = 0; j <= Np1; ++j) {
        const Eigen::VectorXd row = tmp.col(j);
        const CubicSpline sq = CubicSpline::clamped(g0.q, row, 0.0, 0.0);
        for (int i = 0; i <= M1; ++i) out.h(i, j) = sq(target.q(i));
    }
    return out;
}

void save_field(const HeightField& f, double residual_norm_value,
                const std::string& csv_path, const std::string& json_path) {
    const StripGrid& grid = f.grid();
    const int Nq = grid.Nq, Np = grid.Np, M = grid.M();

    std::ostringstream csv;
    csv << "q,p,h\n";
    for (int i = 0; i < Nq; ++i) {
        const int col = i <= M ? i : Nq - i;
        const double qi = i <= M ? grid.q(i) : 2.0 * kPi - grid.q(Nq - i);
        for (int j = 0; j <= Np; ++j)
            csv << io::fmt17(qi) << ',' << io::fmt17(grid.p(j)) << ','
                << io::fmt17(f.h(col, j)) << '\n';
    }
    io::atomic_write(csv_path, csv.str());

    io::JsonWriter jw;
    jw.integer("Nq", Nq);
    jw.integer("Np", Np);
    jw.number("lambda", f.lambda());
    jw.number("r", f.r());
    jw.number("amplitude", f.amplitude());
    jw.number("residual_norm", residual_norm_value);
    jw.boolean("stretched", grid.clustered);
    jw.raw("omega_spec", f.model().spec_json());
    io::atomic_write(json_path, jw.str() + "\n");
}

LoadedField load_field(const std::string& csv_path, const std::string& json_path) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(json_path + ": bad JSON sidecar: " + e.what());
    }
    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!meta.contains(key))
            throw ParseError(json_path + ": sidecar lacks required key '" +
                             std::string(key) + "'");
        return meta[key];
    };
    const int Nq = need("Nq").get<int>();
    const int Np = need("Np").get<int>();
    const double lambda = need("lambda").get<double>();
    const double r = need("r").get<double>();
    const double amplitude = need("amplitude").get<double>();
    const double rnorm = need("residual_norm").get<double>();
    const bool stretched = need("stretched").get<bool>();
    const VorticityModel model = VorticityModel::from_spec_json(need("omega_spec").dump());

    const StripGrid grid =
        stretched ? StripGrid::stretched(Nq, Np) : StripGrid::uniform(Nq, Np);
    HeightField f(grid, model, r, lambda);
    const int M = grid.M();

    std::istringstream in(io::read_file(csv_path));
    std::string line;
    int lineno = 0;
    long row = 0;
    const long rows_expected = static_cast<long>(Nq) * (Np + 1);
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line != "q,p,h")
                throw ParseError(csv_path + ":1: expected header 'q,p,h', got '" + line +
                                 "'");
            continue;
        }
        if (row >= rows_expected)
            throw ParseError(csv_path + ":" + std::to_string(lineno) +
                             ": more data rows than the sidecar grid admits");
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw ParseError(csv_path + ":" + std::to_string(lineno) +
                             ": expected 'q,p,h', got '" + line + "'");
        const std::string where = csv_path + ":" + std::to_string(lineno);
        const double qv = io::parse_double(line.substr(0, c1), where + " column q");
        const double pv = io::parse_double(line.substr(c1 + 1, c2 - c1 - 1), where + " column p");
        const double hv = io::parse_double(line.substr(c2 + 1), where + " column h");

        const int i = static_cast<int>(row / (Np + 1));
        const int j = static_cast<int>(row % (Np + 1));
        const double qexp = i <= M ? grid.q(i) : 2.0 * kPi - grid.q(Nq - i);
        if (std::fabs(qv - qexp) > 1e-9 || std::fabs(pv - grid.p(j)) > 1e-9)
            throw ParseError(where + ": grid coordinates do not match the sidecar grid");
        if (!std::isfinite(hv))
            throw ParseError(where + ": non-finite height value");
        const int col = i <= M ? i : Nq - i;
        if (i <= M) {
            f.h(col, j) = hv;
        } else if (std::fabs(f.h(col, j) - hv) > 1e-12 * (1.0 + std::fabs(hv))) {
            throw ParseError(where + ": mirror column breaks evenness");
        }
        ++row;
    }
    if (row != rows_expected)
        throw ParseError(csv_path + ": truncated field: expected " +
                         std::to_string(rows_expected) + " data rows, got " +
                         std::to_string(row));
    if (std::fabs(f.amplitude() - amplitude) > 1e-10 * (1.0 + std::fabs(amplitude)))
        throw ParseError(json_path + ": sidecar amplitude " + io::fmt17(amplitude) +
                         " does not match the stored field (" +
                         io::fmt17(f.amplitude()) + ")");

    LoadedField out{std::move(f), rnorm, amplitude};
    return out;
}

} // namespace waves
