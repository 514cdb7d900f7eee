#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "waves/diagnostics.hpp"
#include "waves/dispersion.hpp"
#include "waves/heightfield.hpp"
#include "waves/streamflow.hpp"

namespace waves {

/// Step policy and halt thresholds for branch continuation. Arclength steps
/// are measured in the weighted norm of (h unknowns, lambda) where surface
/// nodes count four times and lambda is scaled by the physical wavelength.
struct ContinuationPolicy {
    double gap_min = 0.0;    // halt when r - max_eta drops below; 0 means 1e-3*r
    double lambda_min = 1e-2;
    double slope_max = 5.0;
    double ds0 = 0.0;        // first arclength step; 0 means auto from onset
    double ds_min = 0.0;     // 0 means ds0 / 256
    double ds_max = 0.0;     // 0 means ds0 * 32
    int max_steps = 2000;    // accepted-point budget (interrupt hook)
    int grow_iters = 3;      // double the step when Newton took <= this
    int shrink_iters = 8;    // halve the step when Newton took >= this
    NewtonOptions newton;

    double gap_floor(double r) const { return gap_min > 0.0 ? gap_min : 1e-3 * r; }
};

/// One accepted point on the branch. t is the cumulative weighted arclength
/// from onset; the scalars duplicate what the log line needs so readers never
/// reconstruct fields.
struct BranchPoint {
    double t = 0.0;
    HeightField field;
    double Lambda = 0.0;         // physical wavelength 2*pi/lambda
    double max_eta = 0.0;
    double min_eta = 0.0;
    double stagnation_gap = 0.0; // r - max_eta
    double max_slope = 0.0;
    double residual_norm = 0.0;
    double flow_force = 0.0;
    double flowforce_spread = 0.0;
    bool diagnostics_pass = false;
    WaveDiagnostics diagnostics;
};

enum class BranchLabel { ExtremeStokes, Solitary, ExtremeSolitary, Breaking, Undecided };

std::string branch_label_name(BranchLabel label);

/// Endpoint classification with the trend evidence it was read from.
struct BranchOutcome {
    BranchLabel label = BranchLabel::Undecided;
    bool slope_warning = false; // slope trigger suppressed under omega >= 0
    std::string reason;
    std::vector<double> gap_seq;
    std::vector<double> Lambda_seq;
    std::vector<double> slope_seq;
};

/// Serializable loop state; together with the last two checkpointed fields it
/// restarts the branch deterministically.
struct BranchState {
    int index = 0;        // accepted points so far, the onset point included
    double t = 0.0;       // arclength of the latest accepted point
    double ds = 0.0;      // current step (0 until the second point exists)
    double ds0 = 0.0;     // resolved reference step, fixes the step bounds
    double Lambda0 = 0.0; // onset wavelength, for the soft floor check
    int failures = 0;     // consecutive corrector failures
    bool have_prev = false;
    std::string halt_reason; // empty while the branch is running
};

std::string branch_state_json(const BranchState& st);
BranchState parse_branch_state(const std::string& text);

/// Callbacks fired inside the continuation loop. on_accept sees every
/// accepted point as it lands (prev is null at the onset point) and is the
/// checkpoint hook; on_event gets one-line notes (step halving, regridding,
/// soft-check flags).
struct BranchSink {
    std::function<void(const BranchPoint& cur, const HeightField* prev,
                       const BranchState& st)> on_accept;
    std::function<void(const std::string& note)> on_event;
};

/// Pick the p-grid for a branch at this Bernoulli constant: clustered toward
/// the surface when the onset already sits near stagnation, uniform otherwise.
StripGrid branch_grid(const FlowRegime& regime, int Nq, int Np);

/// Converge the onset wave: laminar column plus a0 * phi0 * cos q at the
/// discrete bifurcation wavenumber, amplitude pinned to a0. Retries at a0/2
/// up to 8 halvings before giving up. The continuum seed supplies the stream
/// and a cross-check on the grid's bifurcation point.
BranchPoint start_branch(const FlowRegime& regime, const BifurcationSeed& seed,
                         double a0, const StripGrid& grid,
                         const NewtonOptions& opt = {});

struct BranchRun {
    std::vector<BranchPoint> points; // accepted points in order
    BranchState state;               // final loop state, halt_reason set
};

/// Predictor-corrector continuation from an onset point until a halt
/// threshold trips. The start point is the first entry of the result.
BranchRun continue_branch(const BranchPoint& start, const FlowRegime& regime,
                          const ContinuationPolicy& policy,
                          const BranchSink& sink = {});

/// Same loop, restarted from checkpointed fields and state. The result holds
/// only points accepted after the restart.
BranchRun resume_branch(std::optional<HeightField> prev, const HeightField& cur,
                        const BranchState& st, const FlowRegime& regime,
                        const ContinuationPolicy& policy,
                        const BranchSink& sink = {});

/// Decision table over the trend sequences of a finished branch. Fewer than
/// 10 points is Undecided. slope_ceiling is the policy's slope_max.
BranchOutcome classify_branch(const std::vector<BranchPoint>& points,
                              double slope_ceiling = 5.0);

/// The same table on bare sequences (synthetic-trend tests, log replay).
BranchOutcome classify_sequences(double r, bool omega_nonnegative,
                                 const std::vector<double>& gaps,
                                 const std::vector<double>& Lambdas,
                                 const std::vector<double>& slopes,
                                 double slope_ceiling = 5.0);

/// One branch-log line (JSONL), trailing newline included.
std::string branch_log_line(const BranchPoint& pt, double r);

std::string outcome_json(const BranchOutcome& outcome,
                         const std::string& halt_reason, double r);

} // namespace waves
