#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "waves/grid.hpp"
#include "waves/vorticity.hpp"

namespace waves {

/// Discrete height function h(q,p) on the strip, with its wavenumber lambda
/// and Bernoulli constant r. The solution class is even and 2pi-periodic in
/// q, so storage covers the half period q in [0,pi] (columns 0..M of the
/// grid); full-period views reflect it. The bottom row h(q,0)=0 is fixed and
/// never part of the unknown vector.
class HeightField {
  public:
    HeightField(StripGrid grid, VorticityModel model, double r, double lambda);

    const StripGrid& grid() const { return grid_; }
    const VorticityModel& model() const { return model_; }
    double r() const { return r_; }
    double lambda() const { return lambda_; }
    void set_lambda(double v);
    /// Physical wavelength Lambda = 2*pi / lambda.
    double wavelength() const;

    /// Half-period node access, i in [0, M], j in [0, Np].
    double h(int i, int j) const { return h_(i, j); }
    double& h(int i, int j) { return h_(i, j); }

    /// Full-period access, i in [0, Nq); columns past M mirror by evenness.
    double h_full(int i, int j) const;
    /// Full-period array, Nq x (Np+1) with q_i = 2*pi*i/Nq.
    Eigen::MatrixXd full_data() const;

    /// Crest-to-trough surface height a = h(0,1) - h(pi,1).
    double amplitude() const;
    double max_surface() const;
    double min_surface() const;

    /// Number of height unknowns: Np levels (bottom eliminated) by M+1 columns.
    int unknowns() const;
    /// Unknown vector x with x[(j-1)*(M+1)+i] = h(i,j), j = 1..Np.
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& x);

  private:
    StripGrid grid_;
    VorticityModel model_;
    double r_;
    double lambda_;
    Eigen::MatrixXd h_; // (M+1) x (Np+1)
};

/// Residuals of the height system split by role. interior(i,j-1) holds the
/// flux-divergence residual at column i, level j (j = 1..Np-1); surface(i)
/// holds the Bernoulli residual at p=1. constraint is the amplitude-pin
/// residual a(field) - pin when a pin target is given, else 0.
struct ResidualVector {
    Eigen::MatrixXd interior;
    Eigen::VectorXd surface;
    double constraint = 0.0;
};

ResidualVector residual(const HeightField& field,
                        std::optional<double> pin = std::nullopt);

/// Stacked residual in unknown ordering (interior rows then surface row per
/// level block), without the constraint entry.
Eigen::VectorXd residual_vector(const HeightField& field);

/// Max-norm of residual_vector.
double residual_norm(const HeightField& field);

/// Analytic Jacobian of residual_vector with respect to (h unknowns, lambda):
/// size Nh x (Nh+1), last column is the lambda derivative.
Eigen::SparseMatrix<double> jacobian(const HeightField& field);

/// Linear closure row for the bordered Newton system: value(x, lambda) =
/// coeffs . (x, lambda) - offset.
struct LinearConstraint {
    Eigen::VectorXd coeffs;
    double offset = 0.0;
};

/// Pin h(0,1) - h(pi,1) = a.
LinearConstraint amplitude_pin(const HeightField& field, double a);

struct NewtonOptions {
    int max_iter = 50;
    double tol = 1e-12;    // stop iterating below this residual max-norm
    double accept = 1e-10; // report success below this
    int max_backtracks = 28;
};

struct NewtonReport {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;  // final max-norm including the constraint row
    bool stagnation = false; // line search died on stagnation breaches
    std::string message;
};

/// Damped Newton on the bordered system (residual rows + one linear
/// constraint), updating field in place. Numerical failure is reported, not
/// thrown; the field holds the last accepted iterate.
NewtonReport newton_core(HeightField& field, const LinearConstraint& constraint,
                         const NewtonOptions& opt = {});

/// Solve with the amplitude pin a; throws SolverError on failure (with an
/// "approach to interior stagnation" message when damping died on h_p > 0).
HeightField newton_solve(const HeightField& initial, double pin,
                         const NewtonOptions& opt = {});

/// Laminar column on the grid's p-levels: solves the one-dimensional discrete
/// height system (q-independent) to machine accuracy. Returns y(0..Np) with
/// y(0) = 0. s_init seeds Newton with the continuum stream H(p; s_init).
Eigen::VectorXd discrete_stream_column(const StripGrid& grid,
                                       const VorticityModel& model, double r,
                                       double s_init);

/// Bifurcation data of the discrete operator at the laminar column: the
/// smallest wavenumber lambda0 where the linearization gains the kernel mode
/// phi0(p) cos(q), plus the column itself. phi0 is normalized so the
/// predictor column + a*phi0*cos(q) has crest-to-trough amplitude exactly a.
struct GridSeed {
    double lambda0 = 0.0;
    Eigen::VectorXd phi0;   // Np+1 values, phi0(0) = 0
    Eigen::VectorXd column; // Np+1 values, column(0) = 0
};

GridSeed grid_dispersion(const StripGrid& grid, const VorticityModel& model,
                         double r, double s_init);

/// q-independent field built from a laminar column.
HeightField stream_field(const StripGrid& grid, const VorticityModel& model,
                         double r, const Eigen::VectorXd& column, double lambda);

/// Cubic-spline transfer onto another grid (p first, then q when the column
/// count changes). The result generally needs a Newton polish.
HeightField resample(const HeightField& field, const StripGrid& target);

/// Dump as CSV ("q,p,h", full period, 17 significant digits) plus a JSON
/// sidecar carrying grid sizes, lambda, r, amplitude, the supplied residual
/// norm, and the vorticity spec needed to rebuild the model. Writes are
/// atomic (tmp + rename).
void save_field(const HeightField& field, double residual_norm_value,
                const std::string& csv_path, const std::string& json_path);

struct LoadedField {
    HeightField field;
    double residual_norm = 0.0;
    double amplitude = 0.0;
};

/// Inverse of save_field; validates shape, evenness and the sidecar
/// amplitude, and round-trips bit-exactly through the 17-digit format.
LoadedField load_field(const std::string& csv_path, const std::string& json_path);

} // namespace waves
