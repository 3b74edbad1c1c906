#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "greg/grid.hpp"

using namespace greg;

TEST_CASE("make_grid spacing")
{
    const Grid2 g = make_grid(64, 64);
    CHECK(g.hx == doctest::Approx(1.0 / 63).epsilon(1e-15));
    CHECK(g.hy == doctest::Approx(1.0 / 63).epsilon(1e-15));

    const Grid2 r = make_grid(4, 8, {1.0, 2.0});
    CHECK(r.hx == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(r.hy == doctest::Approx(2.0 / 7).epsilon(1e-15));

    CHECK_THROWS_WITH_AS(make_grid(1, 64), doctest::Contains("degenerate dimension"), Error);
    CHECK_THROWS_AS(make_grid(64, 64, {0.0, 1.0}), Error);
}

TEST_CASE("bilinear interpolation")
{
    const Grid2 g = make_grid(17, 13);
    const ScalarField c(g, 2.5);
    CHECK(interp(c, Vec2{0.37, 0.81}) == doctest::Approx(2.5));
    CHECK(interp(c, Vec2{-3.0, 7.0}) == doctest::Approx(2.5));

    const ScalarField fx = ScalarField::from_function(g, [](Vec2 p) { return p.x; });
    for (int j = 0; j < g.ny; j += 3)
        for (int i = 0; i < g.nx; i += 2) CHECK(interp(fx, g.node(i, j)) == fx.at(i, j));

    const ScalarField aff = ScalarField::from_function(g, [](Vec2 p) { return p.x + 2.0 * p.y; });
    const Vec2 centre = g.node(5, 4) + Vec2{0.5 * g.hx, 0.5 * g.hy};
    CHECK(interp(aff, centre) == doctest::Approx(centre.x + 2.0 * centre.y).epsilon(1e-14));

    // Clamped outside the domain.
    CHECK(interp(fx, Vec2{1.7, 0.3}) == doctest::Approx(1.0));
    CHECK(interp_gradient(fx, Vec2{1.7, 0.3}).x == 0.0);
}

TEST_CASE("gradient and divergence exactness")
{
    const Grid2 g = make_grid(64, 64);
    const auto grad_c = gradient(ScalarField(g, 3.0));
    CHECK(grad_c.max_norm() < 1e-12);

    const auto gl = gradient(ScalarField::from_function(g, [](Vec2 p) { return 3.0 * p.x - p.y; }));
    for (std::size_t k = 0; k < g.size(); ++k) {
        REQUIRE(gl.x[k] == doctest::Approx(3.0).epsilon(1e-10));
        REQUIRE(gl.y[k] == doctest::Approx(-1.0).epsilon(1e-10));
    }

    const auto gq = gradient(ScalarField::from_function(g, [](Vec2 p) { return p.x * p.x; }));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) REQUIRE(gq.x[g.index(i, j)] == doctest::Approx(2.0 * g.node(i, j).x).epsilon(1e-10));

    CHECK(divergence(VectorField(g, {1.5, -0.5})).max_abs() < 1e-12);
    const auto d2 = divergence(VectorField::from_function(g, [](Vec2 p) { return p; }));
    for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(d2[k] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(divergence(VectorField::from_function(g, [](Vec2 p) { return Vec2{-p.y, p.x}; })).max_abs() < 1e-10);
    CHECK(curl2(VectorField::from_function(g, [](Vec2 p) { return Vec2{-p.y, p.x}; })).max_abs() ==
          doctest::Approx(2.0));
}

TEST_CASE("trapezoid quadrature")
{
    const Grid2 g = make_grid(64, 64);
    CHECK(integrate(ScalarField(g, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(integrate(ScalarField::from_function(g, [](Vec2 p) { return p.x; })) == doctest::Approx(0.5).epsilon(1e-12));
    const Grid2 f = make_grid(128, 128);
    const double s = integrate(ScalarField::from_function(f, [](Vec2 p) {
        return std::sin(2 * std::numbers::pi * p.x) * std::sin(2 * std::numbers::pi * p.y);
    }));
    CHECK(std::abs(s) <= 1e-4);
}

TEST_CASE("linearity of gradient")
{
    const Grid2 g = make_grid(33, 29);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    ScalarField a(g), b(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        a[k] = nd(rng);
        b[k] = nd(rng);
    }
    const VectorField lhs = gradient(2.0 * a + (-3.0) * b);
    const VectorField rhs = 2.0 * gradient(a) + (-3.0) * gradient(b);
    CHECK((lhs - rhs).max_norm() < 1e-11);
}

TEST_CASE("transpose stencils are adjoint")
{
    const Grid2 g = make_grid(21, 17);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    ScalarField a(g), b(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        a[k] = nd(rng);
        b[k] = nd(rng);
    }
    auto plain = [](const ScalarField &u, const ScalarField &v) {
        double s = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
        return s;
    };
    CHECK(plain(diff_x(a), b) == doctest::Approx(plain(a, diff_x_transpose(b))).epsilon(1e-12));
    CHECK(plain(diff_y(a), b) == doctest::Approx(plain(a, diff_y_transpose(b))).epsilon(1e-12));

    const auto op = gaussian_quadrature_operator(g, 0.1);
    CHECK(plain(op.apply(a), b) == doctest::Approx(plain(a, op.apply_transpose(b))).epsilon(1e-12));
}

TEST_CASE("summation by parts")
{
    // f and v vanish in a collar, so the discrete identity has no boundary term.
    auto bump = [](double t) {
        const double s = std::sin(std::numbers::pi * t);
        return s * s * s * s;
    };
    std::vector<double> err;
    for (int n : {32, 64, 128}) {
        const Grid2 g = make_grid(n + 1, n + 1);
        const auto f = ScalarField::from_function(g, [&](Vec2 p) { return std::cos(3 * p.x) * bump(p.x) * bump(p.y); });
        const auto v = VectorField::from_function(g, [&](Vec2 p) {
            return Vec2{std::sin(2 * p.y) * bump(p.x) * bump(p.y), (1 + p.x) * bump(p.x) * bump(p.y)};
        });
        err.push_back(std::abs(integrate(hadamard(f, divergence(v))) + integrate(dot(v, gradient(f)))));
    }
    // Central differences are exactly skew-adjoint away from the boundary rows.
    for (double e : err) CHECK(e < 1e-12);
}

TEST_CASE("separable gaussian quadrature")
{
    const Grid2 g = make_grid(65, 65);
    const auto op = gaussian_quadrature_operator(g, 0.05);
    ScalarField delta(g);
    delta.at(32, 32) = 1.0 / g.weight(32, 32);
    const auto out = op.apply(delta);
    const double peak = 1.0 / (2 * std::numbers::pi * 0.05 * 0.05);
    CHECK(out.at(32, 32) == doctest::Approx(peak).epsilon(1e-10));
    CHECK(out.at(36, 32) == doctest::Approx(peak * std::exp(-0.5 * std::pow(4 * g.hx / 0.05, 2))).epsilon(1e-10));
}
