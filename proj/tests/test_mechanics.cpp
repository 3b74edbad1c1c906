#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "greg/fixtures.hpp"
#include "greg/mechanics.hpp"

using namespace greg;

namespace {

DVectField canonical(const PiecewiseVector &v) { return project_normal_continuity(from_composite(v.iface, v.composite())); }

DVectField smooth_dvect(VectorField v) { return DVectField::assume_admissible(smooth_piecewise(std::move(v))); }

double interior_sup(const VectorField &a, const VectorField &b, int margin)
{
    const Grid2 &g = a.grid;
    double d = 0.0;
    for (int j = margin; j < g.ny - margin; ++j)
        for (int i = margin; i < g.nx - margin; ++i) d = std::max(d, norm(a[g.index(i, j)] - b[g.index(i, j)]));
    return d;
}

} // namespace

TEST_CASE("epdiff rate examples")
{
    const Grid2 g = make_grid(32, 32);
    Rng rng(1);
    const VectorField m = random_smooth_field(g, rng);
    CHECK(epdiff_rhs(m, VectorField(g)).max_norm() == 0.0);

    const Vec2 c{0.7, -1.3};
    const VectorField mc(g, c);
    const VectorField v = VectorField::from_function(g, [](Vec2 p) { return Vec2{p.x, 0.0}; });
    const VectorField r = epdiff_rhs(mc, v);
    for (std::size_t k : {g.index(0, 0), g.index(10, 20), g.index(31, 5)}) {
        CHECK(r[k].x == doctest::Approx(-2 * c.x).epsilon(1e-12));
        CHECK(r[k].y == doctest::Approx(-c.y).epsilon(1e-12));
    }
}

TEST_CASE("epdiff rate equals its density form")
{
    double prev = 0.0;
    for (int n : {64, 128}) {
        const Grid2 g = make_grid(n, n);
        Rng rng(2);
        const VectorField m = random_smooth_field(g, rng);
        const VectorField v = random_smooth_field(g, rng);
        const VectorField a = epdiff_rhs(m, v), b = epdiff_rhs_density(m, v);
        const double err = interior_sup(a, b, 2) / a.max_norm();
        CHECK(err <= 5e-3);
        if (prev > 0.0) CHECK(prev / err >= 3.0);
        prev = err;
    }
}

TEST_CASE("euler-arnold rate")
{
    const Grid2 g = make_grid(48, 48);
    const auto iface = horizontal_interface(g);
    Rng rng(3);

    SUBCASE("zero momentum")
    {
        const auto v = canonical(random_sliding_field(iface, 0.5, rng));
        const auto r = euler_arnold_rhs(zero_density(g, iface), v);
        CHECK(r.momentum.max_norm() == 0.0);
        const auto z = euler_arnold_rhs(zero_density(g, iface), DVectField::zero(g, iface));
        for (double x : z.interface.values) CHECK(x == 0.0);
    }

    SUBCASE("steady rigid sliding")
    {
        const auto m = make_density(make_piecewise(iface, VectorField(g, {0.4, 0.0}), VectorField(g, {-0.3, 0.0})));
        const auto v = DVectField::assume_admissible(make_piecewise(iface, VectorField(g, {0.2, 0.0}), VectorField(g, {-0.1, 0.0})));
        const auto r = euler_arnold_rhs(m, v);
        CHECK(r.momentum.max_norm() <= 1e-12);
        for (double x : r.interface.values) CHECK(std::abs(x) <= 1e-12);
    }

    SUBCASE("no interface: half coefficients on the last two terms")
    {
        const VectorField m = random_smooth_field(g, rng);
        const VectorField v = random_smooth_field(g, rng);
        const auto r = euler_arnold_rhs(make_density(smooth_piecewise(m)), smooth_dvect(v)).momentum.composite();
        VectorField expect = epdiff_rhs_density(m, v);
        expect += 0.5 * gradient(dot(m, v));
        expect += 0.5 * scale(divergence(v), m);
        CHECK(interior_sup(r, expect, 0) <= 1e-12 * (1.0 + expect.max_norm()));
    }
}

TEST_CASE("shooting")
{
    const Grid2 g = make_grid(64, 64);
    const auto op = InertiaOperator::gaussian(0.05);

    SUBCASE("zero momentum is stationary")
    {
        const auto traj = shoot(zero_density(g, nullptr), 4, op);
        REQUIRE(traj.momenta.size() == 5);
        CHECK(traj.times.front() == 0.0);
        CHECK(traj.times.back() == 1.0);
        for (const auto &m : traj.momenta) CHECK(m.max_norm() == 0.0);
    }

    SUBCASE("smooth mode conserves the hamiltonian")
    {
        const auto m0 = smooth_bump_momentum(g, 0.15);
        const auto traj = shoot(m0, 10, op);
        const double h0 = hamiltonian(traj.momenta.front(), traj.velocities.front());
        double drift = 0.0;
        for (std::size_t k = 0; k < traj.momenta.size(); ++k)
            drift = std::max(drift, std::abs(hamiltonian(traj.momenta[k], traj.velocities[k]) - h0) / h0);
        CHECK(traj.velocities.front().max_norm() > 0.1);
        CHECK(drift <= 0.01);
    }

    SUBCASE("second order in time")
    {
        const auto m0 = smooth_bump_momentum(g, 0.15);
        const VectorField ref = shoot(m0, 80, op).momenta.back().composite();
        const double e1 = (shoot(m0, 10, op).momenta.back().composite() - ref).max_norm();
        const double e2 = (shoot(m0, 20, op).momenta.back().composite() - ref).max_norm();
        CHECK(std::log2(e1 / e2) >= 1.8);
    }

    SUBCASE("sliding mode keeps the hamiltonian within budget")
    {
        const auto iface = horizontal_interface(g);
        const auto m0 = sliding_momentum(iface, 0.15);
        const auto traj = shoot(m0, 10, op);
        const double h0 = hamiltonian(traj.momenta.front(), traj.velocities.front());
        double drift = 0.0;
        for (std::size_t k = 0; k < traj.momenta.size(); ++k)
            drift = std::max(drift, std::abs(hamiltonian(traj.momenta[k], traj.velocities[k]) - h0) / h0);
        CHECK(drift <= 0.05);
        const auto e = flow_integrate(std::vector<DVectField>(traj.velocities.begin(), traj.velocities.end() - 1), iface);
        const auto d = diagnose(e);
        CHECK(d.min_jacobian_forward > 0.0);
        CHECK(d.min_jacobian_inverse > 0.0);
    }

    SUBCASE("CFL violation")
    {
        const auto m0 = smooth_bump_momentum(g, 400.0);
        CHECK_THROWS_AS(shoot(m0, 2, op), Error);
    }
}

TEST_CASE("flow integration")
{
    const Grid2 g = make_grid(64, 64);
    SUBCASE("zero velocities")
    {
        const auto iface = horizontal_interface(g);
        const auto e = flow_integrate(std::vector<DVectField>(5, DVectField::zero(g, iface)), iface);
        CHECK(map_distance(e, identity_element(iface)) == 0.0);
        CHECK(band_distance(*e.gamma_trg, *iface) <= 1e-12);
    }
    SUBCASE("constant translation")
    {
        const auto e = flow_integrate(std::vector<DVectField>(10, smooth_dvect(VectorField(g, {0.1, 0.0}))), nullptr);
        const VectorField id = VectorField::identity_map(g);
        for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(norm(e.phi_plus[k] - id[k] - Vec2{0.1, 0.0}) <= 2 * g.hx);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 10; i < g.nx; ++i) REQUIRE(norm(e.inv_phi_plus[g.index(i, j)] - id[g.index(i, j)] + Vec2{0.1, 0.0}) <= 2 * g.hx);
    }
    SUBCASE("sliding translation keeps the interface")
    {
        const auto iface = horizontal_interface(g);
        const auto v = DVectField::assume_admissible(make_piecewise(iface, VectorField(g, {0.1, 0.0}), VectorField(g, {-0.1, 0.0})));
        const auto e = flow_integrate(std::vector<DVectField>(10, v), iface);
        CHECK(band_distance(*e.gamma_trg, *iface) <= 1e-9);
        const Vec2 p = g.node(32, 40);
        CHECK(norm(e.phi_plus[g.index(32, 40)] - p - Vec2{0.1, 0.0}) <= 1e-12);
        CHECK(norm(e.phi_minus[g.index(32, 20)] - g.node(32, 20) + Vec2{0.1, 0.0}) <= 1e-12);
    }
    SUBCASE("CFL violation")
    {
        CHECK_THROWS_AS(flow_integrate({smooth_dvect(VectorField(g, {0.5, 0.0}))}, nullptr), Error);
    }
}

TEST_CASE("poisson bracket")
{
    SUBCASE("antisymmetry")
    {
        const auto b = bracket_instance(64, 31);
        CHECK(poisson_bracket_jump_form(b.m, b.e1, b.e1) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
        const double ab = poisson_bracket_jump_form(b.m, b.e1, b.e2);
        const double ba = poisson_bracket_jump_form(b.m, b.e2, b.e1);
        CHECK(std::abs(ab + ba) <= 1e-10 * std::abs(ab));
        const double cd = poisson_bracket_div_form(b.m, b.e1, b.e2);
        const double dc = poisson_bracket_div_form(b.m, b.e2, b.e1);
        CHECK(std::abs(cd + dc) <= 1e-10 * std::abs(cd));
    }

    SUBCASE("zero data")
    {
        const Grid2 g = make_grid(32, 32);
        const auto iface = horizontal_interface(g);
        Rng rng(4);
        CotangentDualElement e1{canonical(random_sliding_field(iface, 0.5, rng)), boundary_constant(iface, 0.0)};
        CotangentDualElement e2{canonical(random_sliding_field(iface, 0.5, rng)), boundary_constant(iface, 0.0)};
        CHECK(poisson_bracket_div_form(zero_density(g, iface), e1, e2) == 0.0);
    }

    SUBCASE("divergence-free smooth fields")
    {
        const Grid2 g = make_grid(64, 64);
        Rng rng(5);
        const RandomScalar s1 = random_scalar(rng), s2 = random_scalar(rng);
        // Stream functions with compact support give discretely divergence-free fields.
        auto stream = [&](const RandomScalar &s) {
            const ScalarField psi = ScalarField::from_function(g, [&](Vec2 p) { return window2(p) * s(p); });
            return VectorField(diff_y(psi), -1.0 * diff_x(psi));
        };
        const VectorField v1 = stream(s1), v2 = stream(s2);
        const VectorField m = random_smooth_field(g, rng);
        const CotangentDualElement e1{smooth_dvect(v1), {}}, e2{smooth_dvect(v2), {}};
        const auto mt = make_density(smooth_piecewise(m));
        const ScalarField c = curl2(m);
        ScalarField integrand(g);
        for (std::size_t k = 0; k < g.size(); ++k) integrand[k] = -c[k] * cross(v1[k], v2[k]);
        const double direct = integrate(integrand);
        CHECK(divergence(v1).max_abs() <= 1e-10);
        CHECK(poisson_bracket_div_form(mt, e1, e2) == doctest::Approx(direct).epsilon(1e-10));
    }

    SUBCASE("jump and divergence forms converge")
    {
        for (int seed : {41, 42}) {
            double prev = 0.0;
            for (int n : {32, 64, 128}) {
                const auto b = bracket_instance(n, seed);
                const double j = poisson_bracket_jump_form(b.m, b.e1, b.e2);
                const double d = poisson_bracket_div_form(b.m, b.e1, b.e2);
                const double err = std::abs(j - d);
                MESSAGE("seed " << seed << " n " << n << " jump " << j << " div " << d);
                if (prev > 0.0) CHECK(std::log2(prev / err) >= 0.9);
                prev = err;
            }
        }
    }
}

TEST_CASE("hamiltonian operator")
{
    SUBCASE("zero arguments")
    {
        const Grid2 g = make_grid(32, 32);
        const auto iface = horizontal_interface(g);
        Rng rng(6);
        const auto b = bracket_instance(32, 6);
        const CotangentDualElement e{DVectField::zero(g, b.m.iface()), boundary_constant(b.m.iface(), 0.0)};
        const auto r = hamiltonian_operator(b.m, e);
        CHECK(r.momentum.max_norm() <= 1e-14);
        for (double x : r.interface.values) CHECK(x == 0.0);
    }

    SUBCASE("duality with the bracket")
    {
        for (int seed : {51, 52}) {
            const auto b = bracket_instance(128, seed);
            const double lhs = dual_pairing(b.e2, hamiltonian_operator(b.m, b.e1));
            const double rhs = poisson_bracket_div_form(b.m, b.e1, b.e2);
            MESSAGE("seed " << seed << " lhs " << lhs << " rhs " << rhs);
            CHECK(std::abs(lhs - rhs) <= 0.03 * std::abs(rhs));
        }
    }
}
