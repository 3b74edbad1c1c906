#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "greg/fixtures.hpp"
#include "greg/groupoid.hpp"

using namespace greg;

namespace {

GroupoidElement sliding_translation(const InterfacePtr &iface, double a)
{
    const Grid2 &g = iface->grid();
    VectorField up = VectorField::from_function(g, [&](Vec2 p) { return p + Vec2{a, 0.0}; });
    VectorField down = VectorField::from_function(g, [&](Vec2 p) { return p - Vec2{a, 0.0}; });
    return make_element(iface, iface, std::move(up), std::move(down));
}

double sup_displacement(const GroupoidElement &e)
{
    const VectorField id = VectorField::identity_map(e.grid);
    double d = 0.0;
    for (Side s : {Side::plus, Side::minus}) {
        for (std::size_t k = 0; k < e.grid.size(); ++k) {
            if (!e.smooth() && e.gamma_src->masks().side[k] != s) continue;
            d = std::max(d, norm(e.forward(s)[k] - id[k]));
        }
    }
    return d;
}

} // namespace

TEST_CASE("identity element")
{
    const Grid2 g = make_grid(32, 32);
    const auto iface = horizontal_interface(g);
    const GroupoidElement id = identity_element(iface);
    CHECK(id.gamma_src == iface);
    CHECK(id.gamma_trg == iface);
    CHECK(sup_displacement(id) == 0.0);

    const ScalarField img = ScalarField::from_function(g, [](Vec2 p) { return std::sin(5 * p.x) * p.y; });
    const ScalarField out = act_on_image(id, img);
    for (std::size_t k = 0; k < img.size(); ++k) REQUIRE(out[k] == img[k]);

    const GroupoidElement inv = inverse(id);
    CHECK(map_distance(inv, id) == 0.0);
}

TEST_CASE("identity laws")
{
    const Grid2 g = make_grid(64, 64);
    const auto iface = horizontal_interface(g);
    Rng rng(11);
    const GroupoidElement e = random_sliding_arrow(iface, 0.5, rng);
    CHECK(map_distance(compose(identity_element(e.gamma_trg), e), e) <= 1e-10);
    CHECK(map_distance(compose(e, identity_element(e.gamma_src)), e) <= 1e-6 * g.diameter());
}

TEST_CASE("sliding translations compose and invert")
{
    const Grid2 g = make_grid(48, 48);
    const auto iface = horizontal_interface(g);
    const GroupoidElement a = sliding_translation(iface, 0.03);
    const GroupoidElement b = sliding_translation(iface, 0.05);
    const GroupoidElement ab = compose(b, a);
    const GroupoidElement expect = sliding_translation(iface, 0.08);
    CHECK(map_distance(ab, expect) <= 1e-12);

    const GroupoidElement ai = inverse(a);
    const VectorField id = VectorField::identity_map(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        REQUIRE(ai.phi_plus[k].x - id[k].x == doctest::Approx(-0.03).epsilon(1e-12));
        REQUIRE(ai.phi_minus[k].x - id[k].x == doctest::Approx(0.03).epsilon(1e-12));
    }
}

TEST_CASE("src and trg of a composition")
{
    const Grid2 g = make_grid(32, 32);
    const auto i1 = horizontal_interface(g, 0.5);
    const auto i2 = horizontal_interface(g, 0.5 + 0.2 / 31.0);
    GroupoidElement a = identity_element(i1);
    a.gamma_trg = i2;
    const GroupoidElement b = identity_element(i2);
    const GroupoidElement c = compose(b, a);
    CHECK(c.gamma_src == i1);
    CHECK(c.gamma_trg == i2);
}

TEST_CASE("non-composable arrows are rejected")
{
    const Grid2 g = make_grid(32, 32);
    const GroupoidElement a = identity_element(horizontal_interface(g));
    const GroupoidElement b = identity_element(circle_interface(g, {0.5, 0.5}, 0.25));
    CHECK_THROWS_WITH_AS(compose(b, a), "non-composable arrows", Error);
    CHECK_THROWS_WITH_AS(compose(identity_element(g), a), "non-composable arrows", Error);
}

TEST_CASE("associativity within C h^2")
{
    for (int n : {32, 64, 128}) {
        const Grid2 g = make_grid(n, n);
        const auto iface = horizontal_interface(g);
        Rng rng(5);
        const auto g1 = random_sliding_arrow(iface, 0.5, rng);
        const auto g2 = random_sliding_arrow(iface, 0.5, rng);
        const auto g3 = random_sliding_arrow(iface, 0.5, rng);
        const double err = map_distance(compose(compose(g3, g2), g1), compose(g3, compose(g2, g1)));
        const double h = g.hmax();
        CHECK(err <= 1.0 * h * h);
    }
}

TEST_CASE("inverse laws on random sliding arrows")
{
    const Grid2 g = make_grid(64, 64);
    const auto iface = horizontal_interface(g);
    Rng rng(21);
    for (int t = 0; t < 10; ++t) {
        const auto e = random_sliding_arrow(iface, 0.5, rng);
        CHECK(sup_displacement(compose(inverse(e), e)) <= 5e-3 * g.diameter());
        CHECK(sup_displacement(compose(e, inverse(e))) <= 5e-3 * g.diameter());
        const auto d = diagnose(e);
        CHECK(d.min_jacobian_forward > 0.0);
        CHECK(d.min_jacobian_inverse > 0.0);
        CHECK(d.side_consistency >= 0.99);
        CHECK(d.boundary_distance <= g.hmax());
    }
}

TEST_CASE("inversion failure reports the residual")
{
    const Grid2 g = make_grid(16, 16);
    // Folding map: the fixed point iteration cannot settle.
    const VectorField fold = VectorField::from_function(g, [](Vec2 p) { return Vec2{p.x + 0.2 * std::sin(30 * p.x), p.y}; });
    CHECK_THROWS_AS(invert_map(fold), Error);
}

TEST_CASE("translation of a bump")
{
    const Grid2 g = make_grid(64, 64);
    const VectorField phi = VectorField::from_function(g, [](Vec2 p) { return p + Vec2{0.1, 0.0}; });
    const GroupoidElement e = make_element(nullptr, nullptr, phi, phi);
    const ScalarField bump = ScalarField::from_function(g, [](Vec2 p) {
        const Vec2 d = p - Vec2{0.4, 0.5};
        return std::exp(-dot(d, d) / 0.01);
    });
    const ScalarField out = act_on_image(e, bump);
    std::size_t best = 0;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (out[k] > out[best]) best = k;
    CHECK(std::abs(g.node(best).x - 0.5) <= g.hx);
    CHECK(std::abs(g.node(best).y - 0.5) <= g.hy);
}

TEST_CASE("sliding element acts per side of the target")
{
    const Grid2 g = make_grid(64, 64);
    const auto iface = horizontal_interface(g);
    const GroupoidElement e = sliding_translation(iface, 0.1);
    const ScalarField img = ScalarField::from_function(g, [](Vec2 p) { return p.x; });
    const ScalarField out = act_on_image(e, img);
    const std::size_t up = g.index(32, 40), down = g.index(32, 20);
    CHECK(out[up] == doctest::Approx(img[up] - 0.1).epsilon(1e-12));
    CHECK(out[down] == doctest::Approx(img[down] + 0.1).epsilon(1e-12));
}

TEST_CASE("map primitives")
{
    const Grid2 g = make_grid(24, 24);
    const VectorField v(g, Vec2{0.02, -0.01});
    const VectorField id = VectorField::identity_map(g);
    const VectorField fwd = forward_step(id, v, 0.5);
    const VectorField inv = inverse_step(id, v, 0.5);
    for (std::size_t k = 0; k < g.size(); ++k) {
        REQUIRE(norm(fwd[k] - (id[k] + Vec2{0.01, -0.005})) <= 1e-14);
        REQUIRE(norm(inv[k] - (id[k] - Vec2{0.01, -0.005})) <= 1e-14);
    }
    const VectorField affine = VectorField::from_function(g, [](Vec2 p) { return Vec2{2 * p.x + 0.5 * p.y, -p.x + 3 * p.y}; });
    const ScalarField jac = jacobian_determinant(affine);
    for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(jac[k] == doctest::Approx(6.5).epsilon(1e-12));
}
