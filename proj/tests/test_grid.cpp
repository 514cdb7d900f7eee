#include <doctest.h>

#include <waves/errors.hpp>
#include <waves/grid.hpp>

#include <cmath>

namespace {

double poly(double x, int k) { return std::pow(x, k); }
double dpoly(double x, int k) { return k == 0 ? 0.0 : k * std::pow(x, k - 1); }
double ddpoly(double x, int k) {
    return k < 2 ? 0.0 : k * (k - 1) * std::pow(x, k - 2);
}

} // namespace

TEST_CASE("fd_weights differentiates polynomials exactly") {
    Eigen::VectorXd xs(4);
    xs << 0.0, 0.3, 0.7, 1.1;
    const double x0 = 0.3;

    for (int order : {1, 2}) {
        const Eigen::VectorXd w = waves::fd_weights(xs, x0, order);
        REQUIRE(w.size() == xs.size());
        for (int k = 0; k < 4; ++k) {
            double approx = 0.0;
            for (int i = 0; i < xs.size(); ++i) approx += w(i) * poly(xs(i), k);
            const double exact = order == 1 ? dpoly(x0, k) : ddpoly(x0, k);
            CHECK(approx == doctest::Approx(exact).epsilon(1e-11));
        }
    }
}

TEST_CASE("central_first matches fd_weights on three nodes") {
    const double A = 0.013, B = 0.021, x0 = 0.4;
    const Eigen::Vector3d w = waves::central_first(A, B);

    Eigen::VectorXd xs(3);
    xs << x0 - A, x0, x0 + B;
    const Eigen::VectorXd ref = waves::fd_weights(xs, x0, 1);
    for (int i = 0; i < 3; ++i)
        CHECK(w(i) == doctest::Approx(ref(i)).epsilon(1e-12));

    // Exact on quadratics.
    auto f = [](double x) { return 1.7 - 0.3 * x + 2.2 * x * x; };
    const double approx = w(0) * f(x0 - A) + w(1) * f(x0) + w(2) * f(x0 + B);
    CHECK(approx == doctest::Approx(-0.3 + 4.4 * x0).epsilon(1e-11));
}

TEST_CASE("onesided_first_top is exact on quadratics at the upper node") {
    const double A = 0.05, B = 0.08, x0 = 1.0;
    const Eigen::Vector3d w = waves::onesided_first_top(A, B);

    auto f = [](double x) { return 0.4 + 1.9 * x - 0.7 * x * x; };
    const double approx =
        w(0) * f(x0) + w(1) * f(x0 - A) + w(2) * f(x0 - A - B);
    CHECK(approx == doctest::Approx(1.9 - 1.4 * x0).epsilon(1e-11));
}

TEST_CASE("uniform strip grid has evenly spaced nodes") {
    const auto g = waves::StripGrid::uniform(64, 48);
    CHECK(g.Nq == 64);
    CHECK(g.Np == 48);
    CHECK(g.M() == 32);
    CHECK_FALSE(g.clustered);
    REQUIRE(g.q.size() == 33);
    REQUIRE(g.p.size() == 49);

    CHECK(g.q(0) == 0.0);
    CHECK(g.q(32) == doctest::Approx(M_PI).epsilon(1e-15));
    CHECK(g.dq() == doctest::Approx(M_PI / 32).epsilon(1e-15));

    CHECK(g.p(0) == 0.0);
    CHECK(g.p(48) == 1.0);
    for (int j = 1; j <= 48; ++j)
        CHECK(g.p(j) - g.p(j - 1) == doctest::Approx(1.0 / 48).epsilon(1e-12));
}

TEST_CASE("stretched strip grid clusters p levels toward the surface") {
    const auto g = waves::StripGrid::stretched(64, 48);
    CHECK(g.clustered);
    CHECK(g.p(0) == 0.0);
    CHECK(g.p(48) == 1.0);

    for (int j = 1; j <= 48; ++j) CHECK(g.p(j) > g.p(j - 1));

    // Spacing shrinks toward p = 1 and the surface cell is well below the
    // bottom cell.
    const double bottom = g.p(1) - g.p(0);
    const double top = g.p(48) - g.p(47);
    CHECK(top < 0.5 * bottom);

    // The q direction is unaffected by clustering.
    CHECK(g.dq() == doctest::Approx(M_PI / 32).epsilon(1e-15));
}

TEST_CASE("grid constructors reject bad sizes") {
    CHECK_THROWS_AS(waves::StripGrid::uniform(63, 48), waves::ParseError);
    CHECK_THROWS_AS(waves::StripGrid::uniform(0, 48), waves::ParseError);
    CHECK_THROWS_AS(waves::StripGrid::uniform(64, 2), waves::ParseError);
    CHECK_THROWS_AS(waves::StripGrid::stretched(64, -1), waves::ParseError);
}
