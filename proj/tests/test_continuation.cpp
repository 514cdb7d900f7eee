#include <doctest.h>

#include <waves/continuation.hpp>
#include <waves/errors.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace {

std::vector<double> geometric(double first, double last, int n) {
    std::vector<double> v(n);
    const double q = std::pow(last / first, 1.0 / (n - 1));
    double x = first;
    for (int i = 0; i < n; ++i, x *= q) v[i] = x;
    return v;
}

std::vector<double> constant_seq(double value, int n) {
    return std::vector<double>(n, value);
}

struct MiniBranch {
    waves::FlowRegime regime;
    waves::BranchRun run;
};

MiniBranch mini_branch(double gap_min, int max_steps = 2000) {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto seed = waves::dispersion_eigenvalue(
        waves::stream_solution(model, regime.s_minus));
    const auto grid = waves::StripGrid::stretched(32, 24);
    const auto start = waves::start_branch(regime, seed, 1e-3, grid);

    waves::ContinuationPolicy policy;
    policy.gap_min = gap_min;
    policy.max_steps = max_steps;
    return {regime, waves::continue_branch(start, regime, policy)};
}

} // namespace

TEST_CASE("classification: shrinking gap at steady wavelength is an extreme wave") {
    const int n = 14;
    const auto out = waves::classify_sequences(
        2.0, false, geometric(0.1, 1e-3, n), constant_seq(1.8, n),
        constant_seq(0.4, n));
    CHECK(out.label == waves::BranchLabel::ExtremeStokes);
    CHECK_FALSE(out.slope_warning);
    CHECK(out.gap_seq.size() == n);
}

TEST_CASE("classification: unbounded wavelength with a bounded gap is solitary") {
    const int n = 12;
    const auto out = waves::classify_sequences(
        1.0, false, geometric(0.4, 0.3, n), geometric(2.0, 40.0, n),
        constant_seq(0.3, n));
    CHECK(out.label == waves::BranchLabel::Solitary);
}

TEST_CASE("classification: both trends together read as an extreme solitary wave") {
    const int n = 12;
    const auto out = waves::classify_sequences(
        1.0, false, geometric(0.2, 1e-3, n), geometric(2.0, 40.0, n),
        constant_seq(0.3, n));
    CHECK(out.label == waves::BranchLabel::ExtremeSolitary);
}

TEST_CASE("classification: slope blowup breaks for general vorticity only") {
    const int n = 12;
    const auto gaps = geometric(0.4, 0.2, n);
    const auto lams = constant_seq(2.0, n);
    auto slopes = constant_seq(0.5, n);
    slopes.back() = 6.0;

    const auto general = waves::classify_sequences(1.0, false, gaps, lams, slopes);
    CHECK(general.label == waves::BranchLabel::Breaking);
    CHECK_FALSE(general.slope_warning);

    // Nonnegative vorticity rules breaking out; the trigger downgrades to a
    // warning on the extreme-wave label.
    const auto nonneg = waves::classify_sequences(1.0, true, gaps, lams, slopes);
    CHECK(nonneg.label != waves::BranchLabel::Breaking);
    CHECK(nonneg.slope_warning);
}

TEST_CASE("classification: short or conflicting runs stay undecided") {
    const auto out = waves::classify_sequences(
        2.0, false, geometric(0.1, 1e-3, 9), constant_seq(1.8, 9),
        constant_seq(0.4, 9));
    CHECK(out.label == waves::BranchLabel::Undecided);

    // A gap that neither collapses nor clearly stays bounded.
    const int n = 15;
    const auto mid = waves::classify_sequences(
        2.0, false, geometric(0.1, 0.03, n), constant_seq(1.8, n),
        constant_seq(0.4, n));
    CHECK(mid.label == waves::BranchLabel::Undecided);
}

TEST_CASE("branch label names match the log vocabulary") {
    CHECK(waves::branch_label_name(waves::BranchLabel::ExtremeStokes) ==
          "ExtremeStokes");
    CHECK(waves::branch_label_name(waves::BranchLabel::Solitary) == "Solitary");
    CHECK(waves::branch_label_name(waves::BranchLabel::ExtremeSolitary) ==
          "ExtremeSolitary");
    CHECK(waves::branch_label_name(waves::BranchLabel::Breaking) == "Breaking");
    CHECK(waves::branch_label_name(waves::BranchLabel::Undecided) == "Undecided");
}

TEST_CASE("branch state json round trips bit-exactly") {
    waves::BranchState st;
    st.index = 17;
    st.t = 0.12345678901234567;
    st.ds = 3.0517578125e-05;
    st.ds0 = 9.765625e-04;
    st.Lambda0 = 2.4366456469458967;
    st.failures = 2;
    st.have_prev = true;
    st.halt_reason = "max_steps";

    const auto text = waves::branch_state_json(st);
    const auto back = waves::parse_branch_state(text);
    CHECK(back.index == st.index);
    CHECK(back.t == st.t);
    CHECK(back.ds == st.ds);
    CHECK(back.ds0 == st.ds0);
    CHECK(back.Lambda0 == st.Lambda0);
    CHECK(back.failures == st.failures);
    CHECK(back.have_prev == st.have_prev);
    CHECK(back.halt_reason == st.halt_reason);

    CHECK_THROWS_AS(waves::parse_branch_state("{"), waves::ParseError);
    CHECK_THROWS_AS(waves::parse_branch_state("{\"index\": 1}"), waves::ParseError);
}

TEST_CASE("onset solve validates the requested amplitude") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto seed = waves::dispersion_eigenvalue(
        waves::stream_solution(model, regime.s_minus));
    const auto grid = waves::StripGrid::stretched(32, 24);

    CHECK_THROWS_AS(waves::start_branch(regime, seed, 0.0, grid),
                    waves::ParseError);
    CHECK_THROWS_AS(waves::start_branch(regime, seed, -1e-3, grid),
                    waves::ParseError);
    // Far beyond the onset ceiling 0.05 * (r - d_plus).
    CHECK_THROWS_AS(waves::start_branch(regime, seed, 0.5, grid),
                    waves::ParseError);
}

TEST_CASE("short branch marches toward stagnation and keeps its invariants") {
    const auto mb = mini_branch(0.15);
    const auto& pts = mb.run.points;

    REQUIRE(pts.size() >= 3);
    CHECK(mb.run.state.halt_reason == "stagnation_gap");
    CHECK(mb.run.state.index == static_cast<int>(pts.size()));

    CHECK(pts.front().t == 0.0);
    for (size_t k = 1; k < pts.size(); ++k) {
        CHECK(pts[k].t > pts[k - 1].t);
        CHECK(pts[k].max_eta > pts[k - 1].max_eta);
        CHECK(pts[k].field.amplitude() > 0.0);
    }
    for (const auto& pt : pts) {
        CHECK(pt.diagnostics_pass);
        CHECK(pt.residual_norm < 1e-9);
        CHECK(pt.stagnation_gap == doctest::Approx(1.8 - pt.max_eta).epsilon(1e-12));
        // Near onset the wavelength stays in a modest band.
        CHECK(pt.Lambda > 0.9 * pts.front().Lambda);
        CHECK(pt.Lambda < 2.0 * pts.front().Lambda);
    }
    CHECK(pts.back().stagnation_gap < 0.15);
    CHECK(pts[pts.size() - 2].stagnation_gap >= 0.15);

    // Too short a run stays unlabeled.
    const auto out = waves::classify_branch(pts);
    CHECK(out.label == waves::BranchLabel::Undecided);
}

TEST_CASE("continuation is deterministic and resumable mid-branch") {
    const auto full = mini_branch(0.15);

    // Interrupt after three accepted points, then resume with the same policy.
    const auto cut = mini_branch(0.15, 3);
    REQUIRE(cut.run.points.size() == 3);
    CHECK(cut.run.state.halt_reason == "max_steps");

    waves::ContinuationPolicy policy;
    policy.gap_min = 0.15;
    waves::BranchState st = cut.run.state;
    st.halt_reason.clear();
    const auto rest = waves::resume_branch(
        cut.run.points[1].field, cut.run.points[2].field, st, cut.regime, policy);

    REQUIRE(cut.run.points.size() + rest.points.size() == full.run.points.size());
    CHECK(rest.state.halt_reason == full.run.state.halt_reason);
    for (size_t k = 0; k < rest.points.size(); ++k) {
        const auto& a = rest.points[k];
        const auto& b = full.run.points[3 + k];
        CHECK(a.t == b.t);
        CHECK(a.Lambda == b.Lambda);
        CHECK(a.max_eta == b.max_eta);
        CHECK(a.field.lambda() == b.field.lambda());
    }
}

TEST_CASE("resume rejects inconsistent checkpoints") {
    const auto cut = mini_branch(0.15, 3);
    waves::ContinuationPolicy policy;
    policy.gap_min = 0.15;

    // Halt reason still set.
    CHECK_THROWS_AS(waves::resume_branch(cut.run.points[1].field,
                                         cut.run.points[2].field, cut.run.state,
                                         cut.regime, policy),
                    waves::ParseError);

    // have_prev promised but no previous field handed over.
    waves::BranchState st = cut.run.state;
    st.halt_reason.clear();
    CHECK_THROWS_AS(waves::resume_branch(std::nullopt, cut.run.points[2].field,
                                         st, cut.regime, policy),
                    waves::ParseError);

    // Bernoulli constant mismatch between checkpoint and regime.
    const auto other = waves::conjugate_streams(waves::VorticityModel::zero(), 2.0);
    CHECK_THROWS_AS(waves::resume_branch(cut.run.points[1].field,
                                         cut.run.points[2].field, st, other,
                                         policy),
                    waves::ParseError);
}

TEST_CASE("branch log lines carry the full record in a fixed order") {
    const auto cut = mini_branch(0.15, 2);
    const auto& pt = cut.run.points.back();
    const auto line = waves::branch_log_line(pt, cut.regime.r);

    CHECK(line.back() == '\n');

    const std::vector<std::string> order = {
        "\"t\"", "\"lambda\"", "\"Lambda\"", "\"max_eta\"", "\"min_eta\"",
        "\"stagnation_gap\"", "\"max_slope\"", "\"residual_norm\"",
        "\"diagnostics_pass\"", "\"r\"", "\"flow_force\"", "\"flowforce_spread\""};
    size_t prev = 0;
    for (const auto& key : order) {
        const auto pos = line.find(key);
        REQUIRE(pos != std::string::npos);
        CHECK(pos > prev);
        prev = pos;
    }
}

TEST_CASE("outcome json reports the label and the trend endpoints") {
    const auto out = waves::classify_sequences(
        2.0, false, geometric(0.1, 1e-3, 14), constant_seq(1.8, 14),
        constant_seq(0.4, 14));
    const auto js = waves::outcome_json(out, "stagnation_gap", 2.0);
    CHECK(js.find("\"label\": \"ExtremeStokes\"") != std::string::npos);
    CHECK(js.find("\"halt_reason\": \"stagnation_gap\"") != std::string::npos);
    CHECK(js.find("\"slope_warning\": false") != std::string::npos);
    CHECK(js.find("\"gap_first\"") != std::string::npos);
    CHECK(js.find("\"gap_last\"") != std::string::npos);
    CHECK(js.find("\"reason\"") != std::string::npos);
}
