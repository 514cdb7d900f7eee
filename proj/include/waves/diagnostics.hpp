#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "waves/heightfield.hpp"
#include "waves/streamflow.hpp"

namespace waves {

/// Physical-variable view of a converged height field, sampled on the image
/// of the strip grid. x runs over the half period [0, Lambda/2] with the
/// crest at x = 0; row i, column j sits at (x_i, y_samples(i,j)).
struct WaveField {
    double r = 0.0;
    double lambda = 0.0;
    Eigen::VectorXd x_grid;   // M+1 abscissae, x = q/lambda
    Eigen::VectorXd p_levels; // Np+1 stream-function levels
    Eigen::MatrixXd y_samples;
    Eigen::VectorXd eta;      // surface profile, y_samples column Np
    Eigen::MatrixXd psi_x;    // -lambda h_q / h_p
    Eigen::MatrixXd psi_y;    // 1 / h_p
    Eigen::MatrixXd F;        // flow force function, anchored F(x,0) = 0
    Eigen::VectorXd G;        // horizontal integral on the surface line
    Eigen::VectorXd G_trough; // same, along the trough vertical line
    double flow_force = 0.0;  // mean surface value of F
    double flowforce_spread = 0.0; // (max - min) / |mean| of surface F
    Eigen::VectorXd eta_slope;
    double max_slope = 0.0;
    double max_eta = 0.0;
    double min_eta = 0.0;

    double wavelength() const { return 2.0 * 3.14159265358979323846 / lambda; }
};

/// Sample the velocity field, surface profile and the two conserved
/// integrals from a height field. Throws StagnationError when any grid cell
/// has h_p below 1e-12 (the hodograph map degenerates there).
WaveField reconstruct(const HeightField& field, const VorticityModel& model);

struct BernoulliRecord {
    double residual = 0.0;  // max over the surface of |0.5|grad psi|^2 + eta - r|
    double threshold = 0.0; // 1e-8 * r
    bool pass = false;
};

BernoulliRecord check_bernoulli(const WaveField& wf);

/// One verified inequality: a signed margin (distance to violation, positive
/// means satisfied) and the pass flag with its evaluation slack baked in.
/// Records whose inequality carries an explicit constructive constant report
/// it through constant/has_constant.
struct BoundRecord {
    std::string name;
    std::string paper_anchor;
    double margin = 0.0;
    bool pass = false;
    double constant = std::numeric_limits<double>::quiet_NaN();
    bool has_constant = false;
};

/// Evaluate every bound that applies to the model's vorticity class: crest
/// elevation above the subcritical conjugate depth, the pointwise head bound
/// on psi_y^2, bottom-velocity windows, the surface speed floor and the
/// monotone speed/elevation coupling, plus the irrotational-only extras.
std::vector<BoundRecord> check_bounds(const WaveField& wf, const FlowRegime& regime,
                                      const VorticityModel& model);

struct CrestAngle {
    double degrees = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;
};

/// Included crest angle implied by a least-squares fit of eta(0) - eta(x)
/// against |x| over the window [2 dx, 0.1 Lambda]. Meaningful only close to
/// stagnation; undefined when the window holds fewer than 6 samples.
CrestAngle crest_angle(const WaveField& wf);

struct WaveDiagnostics {
    BernoulliRecord bernoulli;
    double flowforce_spread = 0.0;
    double g_surface_max = 0.0;
    double g_trough_max = 0.0;
    std::vector<BoundRecord> bounds;
    CrestAngle crest_angle;
    double flow_force = 0.0;
    double max_eta = 0.0;
    double min_eta = 0.0;
    double max_slope = 0.0;
    bool bounds_pass = false; // every bound record passes
    bool pass = false;        // bounds_pass and the Bernoulli check
};

WaveDiagnostics run_diagnostics(const HeightField& field, const VorticityModel& model,
                                const FlowRegime& regime);

/// Single-line JSON report: bernoulli_residual, flowforce_spread,
/// G_surface_max, bounds (name, paper_anchor, margin, pass), crest_angle,
/// then supplementary fields. crest_angle is null when undefined.
std::string diagnostics_json(const WaveDiagnostics& d);

/// Full-period sample table "x,y,psi_x,psi_y" (psi_x flips sign across the
/// crest) and surface table "x,eta", both closing the period at x = Lambda.
void export_field_csv(const WaveField& wf, const std::string& path);
void export_surface_csv(const WaveField& wf, const std::string& path);

} // namespace waves
