#pragma once

#include <string>

#include "waves/vorticity.hpp"

namespace waves {

/// Laminar flow with bottom slip parameter s. The strip height profile is
/// H(p) = int_0^p (s^2 - 2 Omega(t))^{-1/2} dt, the depth is d(s) = H(1) and
/// the head is R(s) = s^2/2 - Omega(1) + d(s). Admissible parameters satisfy
/// s^2 > max 2 Omega, so the integrand stays real.
class StreamSolution {
  public:
    StreamSolution(VorticityModel model, double s);

    double s() const { return s_; }
    double depth() const { return depth_; }
    double bernoulli() const;

    double height(double p) const; // H(p), p in [0,1]
    double slope(double p) const;  // H'(p) = (s^2 - 2 Omega(p))^{-1/2}

    const VorticityModel& model() const { return model_; }

  private:
    VorticityModel model_;
    double s_ = 0.0;
    double depth_ = 0.0;
};

StreamSolution stream_solution(const VorticityModel& model, double s);

double stream_depth(const VorticityModel& model, double s);
double stream_bernoulli(const VorticityModel& model, double s);

/// Critical constants of the laminar family. d0 and R0 are the limits of
/// depth and head as s decreases to s0 and may be +inf.
struct CriticalParams {
    double s0 = 0.0;
    double sc = 0.0;
    double Rc = 0.0;
    double R0 = 0.0;
    double d0 = 0.0;
};

CriticalParams critical_parameters(const VorticityModel& model);

/// Full regime record for a given head r in the admissible window
/// (Rc, d0): the two conjugate roots of R(s) = r and their depths.
struct FlowRegime {
    double r = 0.0;
    double s0 = 0.0;
    double sc = 0.0;
    double Rc = 0.0;
    double R0 = 0.0;
    double d0 = 0.0;
    double s_minus = 0.0; // root in (s0, sc), the thick slow stream
    double s_plus = 0.0;  // root beyond sc, the thin fast stream
    double d_plus = 0.0;  // depth of the s_minus stream
    double d_minus = 0.0; // depth of the s_plus stream
};

/// Throws RegimeError unless Rc < r < d0.
FlowRegime conjugate_streams(const VorticityModel& model, double r);
FlowRegime conjugate_streams(const VorticityModel& model, const CriticalParams& crit,
                             double r);

/// Inverse of the depth map on (s0, inf): the s with d(s) = depth.
/// Requires 0 < depth < d0.
double depth_to_s(const VorticityModel& model, const CriticalParams& crit, double depth);

std::string stream_json(const StreamSolution& sol);
std::string regime_json(const VorticityModel& model, const FlowRegime& regime);

} // namespace waves
