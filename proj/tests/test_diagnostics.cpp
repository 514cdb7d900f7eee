#include <doctest.h>

#include <waves/diagnostics.hpp>
#include <waves/errors.hpp>
#include <waves/heightfield.hpp>
#include <waves/streamflow.hpp>
#include <waves/vorticity.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const waves::BoundRecord& find_bound(const std::vector<waves::BoundRecord>& v,
                                     const std::string& name) {
    const auto it = std::find_if(v.begin(), v.end(),
                                 [&](const auto& b) { return b.name == name; });
    REQUIRE(it != v.end());
    return *it;
}

bool has_bound(const std::vector<waves::BoundRecord>& v, const std::string& name) {
    return std::any_of(v.begin(), v.end(),
                       [&](const auto& b) { return b.name == name; });
}

waves::HeightField converged_wave(const waves::VorticityModel& model,
                                  const waves::FlowRegime& regime,
                                  const waves::StripGrid& grid, double a) {
    const auto gs = waves::grid_dispersion(grid, model, regime.r, regime.s_minus);
    waves::HeightField init =
        waves::stream_field(grid, model, regime.r, gs.column, gs.lambda0);
    for (int j = 0; j <= grid.Np; ++j)
        for (int i = 0; i <= grid.M(); ++i)
            init.h(i, j) += a * gs.phi0(j) * std::cos(grid.q(i));
    return waves::newton_solve(init, a);
}

} // namespace

TEST_CASE("reconstruction of an exact laminar profile is closed form") {
    // h(q,p) = p / s maps to uniform velocity psi_y = s, psi_x = 0 and a
    // linear-in-y flow force integrand, which the sampler integrates exactly.
    const auto model = waves::VorticityModel::zero();
    const double s = 0.8;
    const double r = 0.5 * s * s + 1.0 / s; // head of this stream
    const double d = 1.0 / s;

    const auto grid = waves::StripGrid::uniform(32, 24);
    waves::HeightField f(grid, model, r, 1.0);
    for (int j = 0; j <= grid.Np; ++j)
        for (int i = 0; i <= grid.M(); ++i) f.h(i, j) = grid.p(j) / s;

    const auto wf = waves::reconstruct(f, model);
    CHECK(wf.max_eta == doctest::Approx(d).epsilon(1e-13));
    CHECK(wf.min_eta == doctest::Approx(d).epsilon(1e-13));
    CHECK(wf.max_slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    for (int i = 0; i <= grid.M(); ++i)
        for (int j = 0; j <= grid.Np; ++j) {
            CHECK(std::abs(wf.psi_x(i, j)) < 1e-12);
            CHECK(wf.psi_y(i, j) == doctest::Approx(s).epsilon(1e-12));
            CHECK(wf.y_samples(i, j) ==
                  doctest::Approx(grid.p(j) / s).epsilon(1e-13));
            // F(y) = (s^2/2 + r) y - y^2/2, exact for the trapezoid rule.
            const double y = grid.p(j) / s;
            CHECK(wf.F(i, j) ==
                  doctest::Approx((0.5 * s * s + r) * y - 0.5 * y * y)
                      .epsilon(1e-12));
        }

    CHECK(wf.flow_force ==
          doctest::Approx((0.5 * s * s + r) * d - 0.5 * d * d).epsilon(1e-13));
    CHECK(wf.flowforce_spread < 1e-13);
    CHECK(wf.G.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(wf.G_trough.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("laminar stream diagnostics: conserved quantities and failing crest bound") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto grid = waves::StripGrid::uniform(32, 24);
    const auto col =
        waves::discrete_stream_column(grid, model, regime.r, regime.s_minus);
    const auto f = waves::stream_field(grid, model, regime.r, col, 1.0);

    const auto d = waves::run_diagnostics(f, model, regime);
    CHECK(d.bernoulli.pass);
    CHECK(d.bernoulli.residual < 1e-10);
    CHECK(d.flowforce_spread < 1e-12);
    CHECK(d.g_surface_max < 1e-12);
    CHECK(d.g_trough_max < 1e-12);

    // A flat stream has its crest exactly at the conjugate depth, so the
    // strict elevation bound cannot pass, and the overall gate fails with it.
    const auto& crest = find_bound(d.bounds, "crest_above_conjugate");
    CHECK_FALSE(crest.pass);
    CHECK(std::abs(crest.margin) < 1e-7);
    CHECK_FALSE(d.bounds_pass);
    CHECK_FALSE(d.pass);

    // The remaining records hold with honest margins.
    CHECK(find_bound(d.bounds, "speed_upper").pass);
    CHECK(find_bound(d.bounds, "bottom_speed_irrotational").pass);
    CHECK(find_bound(d.bounds, "bottom_speed_window").pass);
    CHECK(find_bound(d.bounds, "surface_speed_floor").pass);
    CHECK(find_bound(d.bounds, "surface_speed_coupling").pass);
    CHECK(find_bound(d.bounds, "slope_half_irrotational").pass);
}

TEST_CASE("small irrotational wave passes the full gate") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto grid = waves::StripGrid::stretched(64, 48);
    const auto wave = converged_wave(model, regime, grid, 0.02);

    const auto d = waves::run_diagnostics(wave, model, regime);
    CHECK(d.bernoulli.pass);
    CHECK(d.bernoulli.threshold == doctest::Approx(1.8e-8).epsilon(1e-12));
    CHECK(d.pass);
    CHECK(d.bounds_pass);
    CHECK(d.bounds.size() == 8);
    CHECK(d.flowforce_spread < 1e-5);
    CHECK(d.g_surface_max < 1e-5);
    CHECK(d.max_eta > regime.d_plus);
    CHECK(d.min_eta < regime.d_plus);
    CHECK(d.max_slope > 0.0);
    CHECK(d.max_slope < 0.1);

    // The angle window needs at least 6 samples, which 64 columns cannot
    // provide at this wavelength; with 96 columns the smooth crest reads as
    // nearly flat.
    CHECK_FALSE(d.crest_angle.defined);
    const auto wide = converged_wave(model, regime,
                                     waves::StripGrid::stretched(96, 48), 0.02);
    const auto dw = waves::run_diagnostics(wide, model, regime);
    CHECK(dw.crest_angle.defined);
    CHECK(dw.crest_angle.degrees > 175.0);
    CHECK(dw.crest_angle.degrees <= 180.0);

    // Constants are reported where the inequality carries one.
    const auto& lower = find_bound(d.bounds, "speed_lower_irrotational");
    CHECK(lower.has_constant);
    CHECK(lower.constant ==
          doctest::Approx(std::pow(2.0 * std::pow(1.8, 3.0), -3.0)).epsilon(1e-12));
    const auto& floor = find_bound(d.bounds, "surface_speed_floor");
    CHECK(floor.has_constant);
    CHECK(floor.constant ==
          doctest::Approx(1.0 / (2.0 * std::sqrt(2.0 * 1.8))).epsilon(1e-12));
}

TEST_CASE("vortical wave reports the class-appropriate bounds") {
    const auto model = waves::VorticityModel::constant(0.5);
    const auto crit = waves::critical_parameters(model);
    const auto regime = waves::conjugate_streams(model, crit, crit.Rc + 0.3);
    const auto grid = waves::StripGrid::stretched(48, 36);
    const auto wave = converged_wave(model, regime, grid, 1e-3);

    const auto d = waves::run_diagnostics(wave, model, regime);
    CHECK(d.bernoulli.pass);
    CHECK(d.pass);
    CHECK(d.bounds.size() == 5);
    CHECK(has_bound(d.bounds, "crest_above_conjugate"));
    CHECK(has_bound(d.bounds, "speed_upper"));
    CHECK(has_bound(d.bounds, "bottom_speed_window"));
    CHECK(has_bound(d.bounds, "surface_speed_floor"));
    CHECK(has_bound(d.bounds, "surface_speed_coupling"));
    CHECK_FALSE(has_bound(d.bounds, "speed_lower_irrotational"));
    CHECK_FALSE(has_bound(d.bounds, "bottom_speed_irrotational"));
    CHECK_FALSE(has_bound(d.bounds, "slope_half_irrotational"));

    // For a general-class model the surface floor no longer applies.
    const auto modelg = waves::VorticityModel::linear(-0.4);
    const auto critg = waves::critical_parameters(modelg);
    const auto regimeg = waves::conjugate_streams(modelg, critg, critg.Rc + 0.3);
    const auto gridg = waves::StripGrid::uniform(32, 24);
    const auto colg = waves::discrete_stream_column(gridg, modelg, regimeg.r,
                                                    regimeg.s_minus);
    const auto flatg = waves::stream_field(gridg, modelg, regimeg.r, colg, 1.0);
    const auto dg = waves::run_diagnostics(flatg, modelg, regimeg);
    CHECK_FALSE(has_bound(dg.bounds, "surface_speed_floor"));
    CHECK(has_bound(dg.bounds, "bottom_speed_window"));
    CHECK(has_bound(dg.bounds, "surface_speed_coupling"));
}

TEST_CASE("crest angle fits a synthetic corner flow") {
    waves::WaveField wf;
    const int M = 64;
    const double Lambda = 2.0;
    wf.r = 2.0;
    wf.lambda = 2.0 * M_PI / Lambda;
    wf.x_grid.resize(M + 1);
    wf.eta.resize(M + 1);
    for (int i = 0; i <= M; ++i) {
        const double x = 0.5 * Lambda * i / M;
        wf.x_grid(i) = x;
        // Corner with the faces 30 degrees off the vertical: included 120.
        wf.eta(i) = 1.0 - x / std::sqrt(3.0);
    }

    const auto angle = waves::crest_angle(wf);
    REQUIRE(angle.defined);
    CHECK(angle.degrees == doctest::Approx(120.0).epsilon(1e-9));

    // A flat profile reads as a flat angle.
    wf.eta.setConstant(1.0);
    const auto flat = waves::crest_angle(wf);
    REQUIRE(flat.defined);
    CHECK(flat.degrees == doctest::Approx(180.0).epsilon(1e-12));

    // Too few window samples: undefined.
    waves::WaveField coarse = wf;
    coarse.x_grid.resize(9);
    coarse.eta.resize(9);
    for (int i = 0; i <= 8; ++i) {
        coarse.x_grid(i) = 0.5 * Lambda * i / 8;
        coarse.eta(i) = 1.0 - coarse.x_grid(i) / std::sqrt(3.0);
    }
    CHECK_FALSE(waves::crest_angle(coarse).defined);
}

TEST_CASE("perturbed surface breaks the Bernoulli gate") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto grid = waves::StripGrid::uniform(32, 24);
    auto wave = converged_wave(model, regime, grid, 0.01);

    wave.h(5, grid.Np) += 1e-4;
    const auto d = waves::run_diagnostics(wave, model, regime);
    CHECK_FALSE(d.bernoulli.pass);
    CHECK_FALSE(d.pass);
    CHECK(d.bernoulli.residual > d.bernoulli.threshold);
}

TEST_CASE("stagnating cells are rejected by reconstruction") {
    const auto model = waves::VorticityModel::zero();
    const auto grid = waves::StripGrid::uniform(16, 12);
    waves::HeightField f(grid, model, 1.8, 2.0);
    for (int j = 0; j <= grid.Np; ++j)
        for (int i = 0; i <= grid.M(); ++i) f.h(i, j) = grid.p(j);
    // Flatten a column segment: h no longer increases in p there.
    f.h(3, 5) = f.h(3, 4);
    f.h(3, 6) = f.h(3, 4);
    CHECK_THROWS_AS(waves::reconstruct(f, model), waves::StagnationError);
}

TEST_CASE("diagnostics json names the headline quantities") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto grid = waves::StripGrid::uniform(32, 24);
    const auto wave = converged_wave(model, regime, grid, 0.01);
    const auto d = waves::run_diagnostics(wave, model, regime);
    const auto js = waves::diagnostics_json(d);

    CHECK(js.find("\"bernoulli_residual\"") != std::string::npos);
    CHECK(js.find("\"flowforce_spread\"") != std::string::npos);
    CHECK(js.find("\"G_surface_max\"") != std::string::npos);
    CHECK(js.find("\"bounds\"") != std::string::npos);
    CHECK(js.find("\"crest_angle\"") != std::string::npos);
    CHECK(js.find("\"paper_anchor\"") != std::string::npos);
    CHECK(js.find("\"flow_force\"") != std::string::npos);

    // Undefined angles serialize as null.
    waves::WaveDiagnostics blank;
    const auto js2 = waves::diagnostics_json(blank);
    CHECK(js2.find("\"crest_angle\": null") != std::string::npos);
}

TEST_CASE("field and surface exports write closed full-period tables") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto grid = waves::StripGrid::uniform(16, 12);
    const auto wave = converged_wave(model, regime, grid, 0.01);
    const auto wf = waves::reconstruct(wave, model);

    const std::string fpath = "/tmp/waves_test_export_field.csv";
    const std::string spath = "/tmp/waves_test_export_surface.csv";
    waves::export_field_csv(wf, fpath);
    waves::export_surface_csv(wf, spath);

    std::ifstream fin(fpath);
    std::string line;
    std::getline(fin, line);
    CHECK(line == "x,y,psi_x,psi_y");
    int rows = 0;
    while (std::getline(fin, line)) ++rows;
    CHECK(rows == (grid.Nq + 1) * (grid.Np + 1));

    std::ifstream sin(spath);
    std::getline(sin, line);
    CHECK(line == "x,eta");
    rows = 0;
    std::string first, last;
    while (std::getline(sin, line)) {
        if (rows == 0) first = line;
        last = line;
        ++rows;
    }
    CHECK(rows == grid.Nq + 1);
    CHECK(first.substr(0, 2) == "0,");
    // The closing abscissa is the full wavelength.
    const double Lx = std::stod(last.substr(0, last.find(',')));
    CHECK(Lx == doctest::Approx(wf.wavelength()).epsilon(1e-12));

    std::remove(fpath.c_str());
    std::remove(spath.c_str());
}
