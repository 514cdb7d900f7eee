#include <doctest.h>

#include <waves/dispersion.hpp>
#include <waves/errors.hpp>
#include <waves/streamflow.hpp>
#include <waves/vorticity.hpp>

#include <cmath>

TEST_CASE("irrotational onset wavenumber satisfies the tanh relation") {
    const auto zero = waves::VorticityModel::zero();
    for (double r : {1.7, 1.8, 2.0}) {
        const auto regime = waves::conjugate_streams(zero, r);
        const auto stream = waves::stream_solution(zero, regime.s_minus);
        const auto seed = waves::dispersion_eigenvalue(stream);
        const double lam = seed.lambda0();
        const double s = regime.s_minus;
        CHECK(std::abs(std::tanh(lam / s) - lam * s * s) < 1e-8);
    }

    // Frozen values for the regression guard.
    const auto r18 = waves::conjugate_streams(zero, 1.8);
    const auto seed18 =
        waves::dispersion_eigenvalue(waves::stream_solution(zero, r18.s_minus));
    CHECK(seed18.lambda0() ==
          doctest::Approx(2.5785427519997191).epsilon(1e-10));
    const auto r20 = waves::conjugate_streams(zero, 2.0);
    const auto seed20 =
        waves::dispersion_eigenvalue(waves::stream_solution(zero, r20.s_minus));
    CHECK(seed20.lambda0() ==
          doctest::Approx(3.4396611289435657).epsilon(1e-10));
}

TEST_CASE("shooting residual changes sign across the onset wavenumber") {
    const auto zero = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(zero, 1.8);
    const auto stream = waves::stream_solution(zero, regime.s_minus);
    const auto seed = waves::dispersion_eigenvalue(stream);
    const double lam = seed.lambda0();

    const double below = waves::dispersion_residual(stream, 0.9 * lam);
    const double at = waves::dispersion_residual(stream, lam);
    const double above = waves::dispersion_residual(stream, 1.1 * lam);
    CHECK(below * above < 0.0);
    CHECK(std::abs(at) < 1e-6 * std::max(std::abs(below), std::abs(above)));
}

TEST_CASE("onset mode is normalized and solves the equation") {
    const auto m = waves::VorticityModel::constant(0.5);
    const auto crit = waves::critical_parameters(m);
    const auto regime = waves::conjugate_streams(m, crit, crit.Rc + 0.3);
    const auto stream = waves::stream_solution(m, regime.s_minus);
    const auto seed = waves::dispersion_eigenvalue(stream);

    REQUIRE(seed.p_grid().size() == seed.phi0().size());
    CHECK(seed.phi0()(seed.phi0().size() - 1) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(seed.phi0()(0)) < 1e-15);
    CHECK(seed.phi0_at(1.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(seed.phi0_at(0.0)) < 1e-12);
    // The ground state has no interior sign change.
    for (int i = 1; i < seed.phi0().size(); ++i) CHECK(seed.phi0()(i) > 0.0);

    CHECK(seed.sl_residual_max() < 1e-6);
    CHECK(seed.boundary_residual() < 1e-8);

    // Frozen value for the regression guard.
    CHECK(seed.lambda0() == doctest::Approx(12.898598788735177).epsilon(1e-9));
}

TEST_CASE("integration step count is converged at the default") {
    const auto zero = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(zero, 2.0);
    const auto stream = waves::stream_solution(zero, regime.s_minus);
    const double coarse = waves::dispersion_eigenvalue(stream, 2048).lambda0();
    const double fine = waves::dispersion_eigenvalue(stream, 4096).lambda0();
    CHECK(std::abs(fine - coarse) < 1e-9 * coarse);
}

TEST_CASE("supercritical streams admit no onset wavenumber") {
    const auto zero = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(zero, 1.8);
    const auto fast = waves::stream_solution(zero, regime.s_plus);
    CHECK_THROWS_AS(waves::dispersion_eigenvalue(fast), waves::RegimeError);
}

TEST_CASE("kernel mode is a cosine profile of the onset shape") {
    const auto zero = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(zero, 1.8);
    const auto stream = waves::stream_solution(zero, regime.s_minus);
    const auto seed = waves::dispersion_eigenvalue(stream);

    Eigen::VectorXd q(3);
    q << 0.0, 0.5 * M_PI, M_PI;
    const Eigen::MatrixXd w = waves::kernel_mode(seed, q);
    REQUIRE(w.rows() == 3);
    REQUIRE(w.cols() == seed.p_grid().size());

    const int last = static_cast<int>(w.cols()) - 1;
    CHECK(w(0, last) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(w(1, last)) < 1e-12);
    CHECK(w(2, last) == doctest::Approx(-1.0).epsilon(1e-12));
    for (int j = 0; j <= last; ++j)
        CHECK(w(2, j) == doctest::Approx(-w(0, j)).epsilon(1e-12));

    // Resampled variant agrees with phi0_at on a custom level set.
    Eigen::VectorXd p(4);
    p << 0.0, 0.31, 0.77, 1.0;
    const Eigen::MatrixXd wr = waves::kernel_mode(seed, q, p);
    REQUIRE(wr.cols() == 4);
    for (int j = 0; j < 4; ++j)
        CHECK(wr(0, j) == doctest::Approx(seed.phi0_at(p(j))).epsilon(1e-12));
}

TEST_CASE("seed json names the onset quantities") {
    const auto zero = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(zero, 1.8);
    const auto seed =
        waves::dispersion_eigenvalue(waves::stream_solution(zero, regime.s_minus));
    const auto js = waves::seed_json(seed);
    CHECK(js.find("\"lambda0\"") != std::string::npos);
    CHECK(js.find("\"s\"") != std::string::npos);
}
