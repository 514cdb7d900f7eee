#include "waves/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "waves/errors.hpp"
#include "waves/io.hpp"
#include "waves/log.hpp"

namespace waves {

namespace {

// Weights of the arclength metric on (h unknowns, lambda): surface nodes
// carry 4x the interior weight and the lambda slot is scaled by the physical
// wavelength squared, so a wavelength change of one part in Lambda costs as
// much as a unit height move. Unweighted norms stall near stagnation because
// the surface nodes, where all the action is, are a vanishing fraction of the
// unknowns.
Eigen::VectorXd metric_weights(const HeightField& f) {
    const int nh = f.unknowns();
    const int m1 = f.grid().M() + 1;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(nh + 1);
    w.segment((f.grid().Np - 1) * m1, m1).setConstant(4.0);
    w(nh) = f.wavelength() * f.wavelength();
    return w;
}

double wdot(const Eigen::VectorXd& w, const Eigen::VectorXd& a,
            const Eigen::VectorXd& b) {
    return (w.array() * a.array() * b.array()).sum();
}

Eigen::VectorXd pack_full(const HeightField& f) {
    const int nh = f.unknowns();
    Eigen::VectorXd u(nh + 1);
    u.head(nh) = f.pack();
    u(nh) = f.lambda();
    return u;
}

// Same stencil as the diagnostics surface slope: centered in q, exact zeros
// at the crest and trough columns by evenness.
double surface_slope_max(const HeightField& f) {
    const StripGrid& g = f.grid();
    double worst = 0.0;
    for (int i = 1; i < g.M(); ++i) {
        const double hq = (f.h(i + 1, g.Np) - f.h(i - 1, g.Np)) / (2.0 * g.dq());
        worst = std::max(worst, std::abs(f.lambda() * hq));
    }
    return worst;
}

BranchPoint make_point(double t, const HeightField& field, const WaveDiagnostics& d) {
    return BranchPoint{
        .t = t,
        .field = field,
        .Lambda = field.wavelength(),
        .max_eta = d.max_eta,
        .min_eta = d.min_eta,
        .stagnation_gap = field.r() - d.max_eta,
        .max_slope = d.max_slope,
        .residual_norm = residual_norm(field),
        .flow_force = d.flow_force,
        .flowforce_spread = d.flowforce_spread,
        .diagnostics_pass = d.pass,
        .diagnostics = d,
    };
}

BranchRun run_loop(std::optional<HeightField> prev_in, HeightField cur_in,
                   BranchState st, const FlowRegime& regime,
                   const ContinuationPolicy& policy, const BranchSink& sink) {
    BranchRun out;
    std::optional<HeightField> prev = std::move(prev_in);
    HeightField cur = std::move(cur_in);
    const VorticityModel model = cur.model();
    const double r = regime.r;

    auto note = [&](const std::string& s) {
        logging::info(s);
        if (sink.on_event) sink.on_event(s);
    };
    auto ds_lo = [&]() {
        return policy.ds_min > 0.0 ? policy.ds_min : st.ds0 / 256.0;
    };
    auto ds_hi = [&]() {
        return policy.ds_max > 0.0 ? policy.ds_max : st.ds0 * 32.0;
    };

    // Runs Newton under the given closure row, then the full diagnostics
    // gate. A rejected point is a corrector failure, whatever the cause.
    auto try_correct = [&](HeightField& work, const LinearConstraint& con,
                           int* iters) -> std::optional<WaveDiagnostics> {
        const NewtonReport rep = newton_core(work, con, policy.newton);
        if (iters) *iters = rep.iterations;
        if (!rep.converged) {
            note("corrector failed: " + rep.message);
            return std::nullopt;
        }
        if (!(work.amplitude() > 0.0)) {
            note("corrector left the positive-amplitude cone; point rejected");
            return std::nullopt;
        }
        try {
            WaveDiagnostics d = run_diagnostics(work, model, regime);
            if (!d.pass) {
                note("diagnostics gate rejected the corrected point (bernoulli "
                     "residual " + io::fmt17(d.bernoulli.residual) + ", bounds " +
                     (d.bounds_pass ? "pass" : "fail") + ")");
                return std::nullopt;
            }
            return d;
        } catch (const StagnationError& e) {
            note(std::string("diagnostics hit a stagnation cell: ") + e.what());
            return std::nullopt;
        }
    };

    auto accept = [&](HeightField&& work, const WaveDiagnostics& d, double dist,
                      int iters) {
        const double eta_before = cur.max_surface();
        if (work.max_surface() < eta_before - 1e-8)
            note("max_eta decreased by " +
                 io::fmt17(eta_before - work.max_surface()) +
                 " across the step (soft check, not fatal)");
        if (st.Lambda0 > 0.0 && work.wavelength() < 0.5 * st.Lambda0)
            note("wavelength fell below half its onset value; classification "
                 "needs review");
        prev = std::move(cur);
        cur = std::move(work);
        st.t += dist;
        st.index += 1;
        st.have_prev = true;
        st.failures = 0;
        if (st.ds > 0.0) {
            if (iters <= policy.grow_iters)
                st.ds = std::min(2.0 * st.ds, ds_hi());
            else if (iters >= policy.shrink_iters)
                st.ds = std::max(0.5 * st.ds, ds_lo());
        }
        BranchPoint pt = make_point(st.t, cur, d);
        out.points.push_back(pt);
        if (sink.on_accept) sink.on_accept(pt, prev ? &*prev : nullptr, st);
    };

    while (st.halt_reason.empty()) {
        const double gap = r - cur.max_surface();
        if (gap < policy.gap_floor(r)) {
            st.halt_reason = "stagnation_gap";
        } else if (cur.lambda() < policy.lambda_min) {
            st.halt_reason = "lambda_min";
        } else if (surface_slope_max(cur) > policy.slope_max) {
            st.halt_reason = "slope_max";
        } else if (st.index >= policy.max_steps) {
            st.halt_reason = "max_steps";
        }
        if (!st.halt_reason.empty()) break;

        // Move to the surface-clustered p-grid once the crest closes in on
        // the stagnation level; both stored points are re-converged there at
        // pinned amplitude so the secant stays consistent.
        if (!cur.grid().clustered && gap < 0.2 * r) {
            note("crest gap " + io::fmt17(gap) +
                 " fell below 0.2*r; regridding to the surface-clustered p-grid");
            const StripGrid fine = StripGrid::stretched(cur.grid().Nq, cur.grid().Np);
            try {
                HeightField cur2 =
                    newton_solve(resample(cur, fine), cur.amplitude(), policy.newton);
                if (prev)
                    prev = newton_solve(resample(*prev, fine), prev->amplitude(),
                                        policy.newton);
                cur = std::move(cur2);
            } catch (const SolverError& e) {
                note(std::string("regrid failed: ") + e.what());
                st.halt_reason = "regrid_failure";
                break;
            }
        }

        const Eigen::VectorXd w = metric_weights(cur);
        const Eigen::VectorXd u_cur = pack_full(cur);

        if (!st.have_prev) {
            // First step off the onset point: natural continuation toward
            // twice the amplitude, halving the increment until Newton holds.
            const double a_cur = cur.amplitude();
            double inc = a_cur;
            bool accepted = false;
            while (inc >= 1e-6 * a_cur) {
                HeightField work = cur;
                int iters = 0;
                auto d = try_correct(work, amplitude_pin(work, a_cur + inc), &iters);
                if (d) {
                    const Eigen::VectorXd delta = pack_full(work) - u_cur;
                    const double dist = std::sqrt(wdot(w, delta, delta));
                    accept(std::move(work), *d, dist, iters);
                    if (st.ds0 <= 0.0)
                        st.ds0 = policy.ds0 > 0.0 ? policy.ds0 : 2.0 * dist;
                    if (st.ds <= 0.0) st.ds = st.ds0;
                    accepted = true;
                    break;
                }
                inc *= 0.5;
                note("first step retried with amplitude increment " + io::fmt17(inc));
            }
            if (!accepted) {
                note("first step off the onset point failed down to a relative "
                     "increment of 1e-6");
                st.halt_reason = "corrector_failure";
            }
            continue;
        }

        // Secant tangent in the weighted metric, predictor one step along it.
        Eigen::VectorXd tau = u_cur - pack_full(*prev);
        const double tn = std::sqrt(wdot(w, tau, tau));
        if (!(tn > 0.0)) {
            note("consecutive branch points coincide; no tangent direction");
            st.halt_reason = "corrector_failure";
            break;
        }
        tau /= tn;
        const Eigen::VectorXd u_pred = u_cur + st.ds * tau;
        const int nh = cur.unknowns();

        std::optional<WaveDiagnostics> d;
        HeightField work = cur;
        int iters = 0;
        if (u_pred(nh) > 0.0) {
            work.unpack(u_pred.head(nh));
            work.set_lambda(u_pred(nh));
            LinearConstraint con;
            if (st.failures < 2) {
                con.coeffs = (w.array() * tau.array()).matrix();
                con.offset = con.coeffs.dot(u_pred);
            } else {
                const int s0 = (cur.grid().Np - 1) * (cur.grid().M() + 1);
                double a_pred = u_pred(s0) - u_pred(s0 + cur.grid().M());
                if (!(a_pred > 0.0)) a_pred = cur.amplitude();
                con = amplitude_pin(work, a_pred);
            }
            d = try_correct(work, con, &iters);
        } else {
            note("predictor pushed lambda nonpositive; step rejected");
        }

        if (d) {
            const Eigen::VectorXd delta = pack_full(work) - u_cur;
            const double dist = std::sqrt(wdot(w, delta, delta));
            accept(std::move(work), *d, dist, iters);
            continue;
        }
        st.failures += 1;
        if (st.failures == 2)
            note("arclength corrector failed twice; switching to the "
                 "amplitude-pinned fallback");
        if (st.ds > ds_lo() * (1.0 + 1e-12)) {
            st.ds = std::max(0.5 * st.ds, ds_lo());
            note("arclength step halved to " + io::fmt17(st.ds));
        } else if (st.failures >= 3) {
            note("three consecutive corrector failures at the minimum step");
            st.halt_reason = "corrector_failure";
        }
    }

    out.state = st;
    return out;
}

} // namespace

std::string branch_label_name(BranchLabel label) {
    switch (label) {
        case BranchLabel::ExtremeStokes: return "ExtremeStokes";
        case BranchLabel::Solitary: return "Solitary";
        case BranchLabel::ExtremeSolitary: return "ExtremeSolitary";
        case BranchLabel::Breaking: return "Breaking";
        case BranchLabel::Undecided: break;
    }
    return "Undecided";
}

StripGrid branch_grid(const FlowRegime& regime, int Nq, int Np) {
    return regime.r - regime.d_plus < 0.2 * regime.r ? StripGrid::stretched(Nq, Np)
                                                     : StripGrid::uniform(Nq, Np);
}

BranchPoint start_branch(const FlowRegime& regime, const BifurcationSeed& seed,
                         double a0, const StripGrid& grid,
                         const NewtonOptions& opt) {
    const double cap = 0.05 * (regime.r - regime.d_plus);
    if (!(a0 > 0.0))
        throw ParseError("onset amplitude a0 must be positive, got " + io::fmt17(a0) +
                         " (a0 = 0 is the stream itself)");
    if (!(a0 <= cap))
        throw ParseError("onset amplitude a0 = " + io::fmt17(a0) +
                         " exceeds the small-amplitude cap 0.05*(r - d_plus) = " +
                         io::fmt17(cap));

    const VorticityModel& model = seed.stream().model();
    const GridSeed gs = grid_dispersion(grid, model, regime.r, regime.s_minus);
    const double rel = std::abs(gs.lambda0 - seed.lambda0()) / seed.lambda0();
    logging::debug("grid bifurcation wavenumber " + io::fmt17(gs.lambda0) +
                   ", continuum " + io::fmt17(seed.lambda0()) + ", rel gap " +
                   io::fmt17(rel));
    if (rel > 0.05)
        logging::info("grid bifurcation point is " + io::fmt17(rel) +
                      " away from the continuum value; consider more p levels");

    std::string last_error = "onset Newton never ran";
    for (int k = 0; k <= 8; ++k) {
        const double a = std::ldexp(a0, -k);
        HeightField init = stream_field(grid, model, regime.r, gs.column, gs.lambda0);
        for (int j = 1; j <= grid.Np; ++j)
            for (int i = 0; i <= grid.M(); ++i)
                init.h(i, j) += a * gs.phi0(j) * std::cos(grid.q(i));
        try {
            HeightField wave = newton_solve(init, a, opt);
            if (!(wave.h(0, grid.Np) - gs.column(grid.Np) > 0.0))
                throw SolverError("onset wave lost its positive crest elevation");
            const WaveDiagnostics d = run_diagnostics(wave, model, regime);
            if (k > 0)
                logging::info("onset converged after " + std::to_string(k) +
                              " amplitude halvings, a = " + io::fmt17(a));
            return make_point(0.0, wave, d);
        } catch (const SolverError& e) {
            last_error = e.what();
            logging::debug("onset attempt at a = " + io::fmt17(a) +
                           " failed: " + last_error);
        }
    }
    throw SolverError("onset Newton failed from a0 = " + io::fmt17(a0) + " down to " +
                      io::fmt17(std::ldexp(a0, -8)) + ": " + last_error);
}

BranchRun continue_branch(const BranchPoint& start, const FlowRegime& regime,
                          const ContinuationPolicy& policy, const BranchSink& sink) {
    BranchState st;
    st.index = 1;
    st.t = start.t;
    st.ds = 0.0;
    st.ds0 = policy.ds0;
    st.Lambda0 = start.Lambda;
    if (sink.on_accept) sink.on_accept(start, nullptr, st);
    BranchRun out = run_loop(std::nullopt, start.field, st, regime, policy, sink);
    out.points.insert(out.points.begin(), start);
    return out;
}

BranchRun resume_branch(std::optional<HeightField> prev, const HeightField& cur,
                        const BranchState& st, const FlowRegime& regime,
                        const ContinuationPolicy& policy, const BranchSink& sink) {
    if (!st.halt_reason.empty())
        throw ParseError("branch state is already halted (" + st.halt_reason +
                         "); nothing to resume");
    if (st.index < 1)
        throw ParseError("branch state has no accepted points");
    if (st.have_prev != prev.has_value())
        throw ParseError(std::string("branch state ") +
                         (st.have_prev ? "expects" : "does not expect") +
                         " a previous checkpoint");
    if (cur.r() != regime.r)
        throw ParseError("checkpoint r = " + io::fmt17(cur.r()) +
                         " does not match the regime r = " + io::fmt17(regime.r));
    if (prev && (prev->grid().Nq != cur.grid().Nq || prev->grid().Np != cur.grid().Np ||
                 prev->grid().clustered != cur.grid().clustered))
        throw ParseError("checkpointed fields sit on different grids");
    return run_loop(std::move(prev), cur, st, regime, policy, sink);
}

BranchOutcome classify_sequences(double r, bool omega_nonnegative,
                                 const std::vector<double>& gaps,
                                 const std::vector<double>& Lambdas,
                                 const std::vector<double>& slopes,
                                 double slope_ceiling) {
    BranchOutcome o;
    o.gap_seq = gaps;
    o.Lambda_seq = Lambdas;
    o.slope_seq = slopes;
    const size_t n = gaps.size();
    if (n < 10 || Lambdas.size() != n || slopes.size() != n) {
        o.label = BranchLabel::Undecided;
        o.reason = n < 10 ? "fewer than 10 accepted points"
                          : "trend sequences have mismatched lengths";
        return o;
    }
    const bool gap_to_zero =
        gaps.back() <= 0.01 * r && gaps.back() <= 0.5 * gaps.front();
    const bool lambda_unbounded = Lambdas.back() >= 10.0 * Lambdas.front();
    const bool gap_bounded = gaps.back() >= 0.05 * r;
    const bool slope_blowup =
        *std::max_element(slopes.begin(), slopes.end()) >= slope_ceiling;

    if (gap_to_zero && lambda_unbounded) {
        o.label = BranchLabel::ExtremeSolitary;
        o.reason = "stagnation gap collapsed while the wavelength grew beyond "
                   "ten times its onset value";
    } else if (gap_to_zero) {
        o.label = BranchLabel::ExtremeStokes;
        o.reason = "stagnation gap collapsed toward zero with the wavelength "
                   "bounded";
    } else if (slope_blowup && gap_bounded) {
        if (omega_nonnegative) {
            o.label = BranchLabel::ExtremeStokes;
            o.slope_warning = true;
            o.reason = "surface slope crossed the ceiling, but breaking is "
                       "impossible under nonnegative vorticity; read as corner "
                       "formation at the crest";
        } else {
            o.label = BranchLabel::Breaking;
            o.reason = "surface slope crossed the ceiling while the stagnation "
                       "gap stayed bounded away from zero";
        }
    } else if (lambda_unbounded && gap_bounded) {
        o.label = BranchLabel::Solitary;
        o.reason = "wavelength grew beyond ten times its onset value while the "
                   "stagnation gap stayed bounded away from zero";
    } else {
        o.label = BranchLabel::Undecided;
        o.reason = "no decisive trend in stagnation gap, wavelength, or slope";
    }
    return o;
}

BranchOutcome classify_branch(const std::vector<BranchPoint>& points,
                              double slope_ceiling) {
    if (points.empty()) {
        BranchOutcome o;
        o.reason = "no accepted points";
        return o;
    }
    std::vector<double> gaps, Lambdas, slopes;
    gaps.reserve(points.size());
    Lambdas.reserve(points.size());
    slopes.reserve(points.size());
    for (const BranchPoint& pt : points) {
        gaps.push_back(pt.stagnation_gap);
        Lambdas.push_back(pt.Lambda);
        slopes.push_back(pt.max_slope);
    }
    const bool nonneg =
        points.front().field.model().omega_class() != OmegaClass::General;
    return classify_sequences(points.front().field.r(), nonneg, gaps, Lambdas,
                              slopes, slope_ceiling);
}

std::string branch_log_line(const BranchPoint& pt, double r) {
    io::JsonWriter w;
    w.number("t", pt.t)
        .number("lambda", pt.field.lambda())
        .number("Lambda", pt.Lambda)
        .number("max_eta", pt.max_eta)
        .number("min_eta", pt.min_eta)
        .number("stagnation_gap", pt.stagnation_gap)
        .number("max_slope", pt.max_slope)
        .number("residual_norm", pt.residual_norm)
        .boolean("diagnostics_pass", pt.diagnostics_pass)
        .number("r", r)
        .number("flow_force", pt.flow_force)
        .number("flowforce_spread", pt.flowforce_spread);
    return w.str() + "\n";
}

std::string outcome_json(const BranchOutcome& outcome,
                         const std::string& halt_reason, double r) {
    io::JsonWriter w;
    w.text("label", branch_label_name(outcome.label))
        .boolean("slope_warning", outcome.slope_warning)
        .text("reason", outcome.reason)
        .text("halt_reason", halt_reason)
        .number("r", r)
        .integer("points", static_cast<long long>(outcome.gap_seq.size()));
    if (!outcome.gap_seq.empty()) {
        w.number("gap_first", outcome.gap_seq.front())
            .number("gap_last", outcome.gap_seq.back())
            .number("Lambda_first", outcome.Lambda_seq.front())
            .number("Lambda_last", outcome.Lambda_seq.back())
            .number("slope_peak", *std::max_element(outcome.slope_seq.begin(),
                                                    outcome.slope_seq.end()));
    }
    w.raw("stagnation_gap_seq", io::json_number_array(outcome.gap_seq))
        .raw("Lambda_seq", io::json_number_array(outcome.Lambda_seq))
        .raw("max_slope_seq", io::json_number_array(outcome.slope_seq));
    return w.str();
}

std::string branch_state_json(const BranchState& st) {
    io::JsonWriter w;
    w.integer("index", st.index)
        .number("t", st.t)
        .number("ds", st.ds)
        .number("ds0", st.ds0)
        .number("Lambda0", st.Lambda0)
        .integer("failures", st.failures)
        .boolean("have_prev", st.have_prev)
        .text("halt_reason", st.halt_reason);
    return w.str();
}

BranchState parse_branch_state(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("branch state: ") + e.what());
    }
    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key))
            throw ParseError(std::string("branch state: missing field '") + key + "'");
        return j.at(key);
    };
    BranchState st;
    try {
        st.index = need("index").get<int>();
        st.t = need("t").get<double>();
        st.ds = need("ds").get<double>();
        st.ds0 = need("ds0").get<double>();
        st.Lambda0 = need("Lambda0").get<double>();
        st.failures = need("failures").get<int>();
        st.have_prev = need("have_prev").get<bool>();
        st.halt_reason = need("halt_reason").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("branch state: ") + e.what());
    }
    return st;
}

} // namespace waves
