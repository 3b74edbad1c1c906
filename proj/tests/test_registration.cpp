#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "greg/fixtures.hpp"
#include "greg/registration.hpp"

using namespace greg;

namespace {

ScalarField bump(const Grid2 &g, Vec2 c, double r = 0.1)
{
    return ScalarField::from_function(g, [=](Vec2 p) {
        const Vec2 d = p - c;
        return std::exp(-dot(d, d) / (r * r));
    });
}

ScalarField pattern(const Grid2 &g)
{
    return ScalarField::from_function(g, [](Vec2 p) { return 0.5 + 0.3 * std::sin(6 * p.x + 1) * std::cos(5 * p.y) + 0.2 * p.x; });
}

ScalarField noise(const Grid2 &g, Rng &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScalarField f(g);
    for (auto &x : f.values) x = u(rng);
    return f;
}

std::vector<VectorField> random_series(const Grid2 &g, int steps, Rng &rng, double amp)
{
    std::vector<VectorField> out;
    for (int t = 0; t < steps; ++t) out.push_back(random_smooth_field(g, rng, amp));
    return out;
}

double series_dot(const std::vector<VectorField> &a, const std::vector<VectorField> &b)
{
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += weighted_dot(a[t], b[t]);
    return s;
}

std::vector<VectorField> axpy(const std::vector<VectorField> &m, double s, const std::vector<VectorField> &d)
{
    std::vector<VectorField> out = m;
    for (std::size_t t = 0; t < m.size(); ++t) out[t] += s * d[t];
    return out;
}

RegistrationProblem small_problem(int n, bool sliding, SimKind sim)
{
    const Grid2 g = make_grid(n, n);
    RegistrationProblem p;
    p.moving = pattern(g);
    p.fixed = ScalarField::from_function(g, [](Vec2 q) { return 0.5 + 0.3 * std::sin(6 * q.x + 1.2) * std::cos(5 * q.y - 0.1) + 0.2 * q.x; });
    p.interface = sliding ? horizontal_interface(g) : nullptr;
    p.inertia = InertiaOperator::gaussian(0.1);
    p.steps = 3;
    p.sim = sim;
    p.lncc_window = 2.0;
    return p;
}

double fd_relative_error(const RegistrationProblem &p, std::uint64_t seed)
{
    Rng rng(seed);
    const Grid2 &g = p.fixed.grid;
    const auto m = random_series(g, p.steps, rng, 0.05);
    const auto d = random_series(g, p.steps, rng, 0.05);
    std::vector<VectorField> grad;
    momentum_energy(m, p, &grad);
    const double analytic = series_dot(grad, d);
    const double delta = 1e-5;
    const double fd = (momentum_energy(axpy(m, delta, d), p).total - momentum_energy(axpy(m, -delta, d), p).total) / (2 * delta);
    return std::abs(analytic - fd) / std::abs(fd);
}

} // namespace

TEST_CASE("ssd examples")
{
    const Grid2 g = make_grid(17, 17);
    const ScalarField a = pattern(g);
    CHECK(ssd(a, a) == 0.0);
    CHECK(ssd(ScalarField(g, 1.0), ScalarField(g, 0.0)) == doctest::Approx(1.0).epsilon(1e-12));
    const ScalarField b = bump(g, {0.3, 0.6});
    CHECK(ssd(a, b) == ssd(b, a));
    CHECK_THROWS_AS(ssd(a, ScalarField(make_grid(16, 16))), Error);
}

TEST_CASE("lncc examples")
{
    const Grid2 g = make_grid(64, 64);
    const ScalarField a = pattern(g);
    CHECK(lncc(a, a, 5.0) <= 1e-3);
    ScalarField b = a;
    for (auto &x : b.values) x = 2 * x + 3;
    CHECK(lncc(a, b, 5.0) <= 1e-2);
    Rng rng(3);
    const ScalarField n1 = noise(g, rng), n2 = noise(g, rng);
    CHECK(std::abs(lncc(n1, n2, 5.0) - 1.0) <= 0.1);
}

TEST_CASE("similarity gradients match finite differences")
{
    const Grid2 g = make_grid(16, 16);
    Rng rng(8);
    const ScalarField a = pattern(g);
    const ScalarField b = bump(g, {0.4, 0.6}, 0.3);
    const ScalarField d = noise(g, rng);
    for (SimKind kind : {SimKind::ssd, SimKind::lncc}) {
        const ScalarField grad = similarity_gradient(kind, a, b, 3.0);
        double analytic = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) analytic += grad[k] * d[k];
        const double h = 1e-6;
        const double fd = (similarity(kind, a + h * d, b, 3.0) - similarity(kind, a - h * d, b, 3.0)) / (2 * h);
        CHECK(std::abs(analytic - fd) <= 1e-6 * std::abs(fd));
    }
}

TEST_CASE("energy examples")
{
    RegistrationProblem p = small_problem(24, false, SimKind::lncc);
    const Grid2 &g = p.fixed.grid;
    const std::vector<DVectField> zero(p.steps, DVectField::zero(g, nullptr));

    RegistrationProblem same = p;
    same.fixed = same.moving;
    CHECK(energy(zero, same).total <= 1e-3);

    const EnergyTerms e0 = energy(zero, p);
    CHECK(e0.total == doctest::Approx(lncc(p.moving, p.fixed, p.lncc_window)).epsilon(1e-14));
    CHECK(e0.regularizer == 0.0);

    Rng rng(4);
    const auto m = random_series(g, p.steps, rng, 0.05);
    const EnergyTerms e1 = momentum_energy(m, p);
    p.reg_weight = 2.0;
    const EnergyTerms e2 = momentum_energy(m, p);
    CHECK(e2.regularizer == e1.regularizer);
    CHECK(e2.total - e2.similarity == doctest::Approx(2 * (e1.total - e1.similarity)).epsilon(1e-14));
    CHECK_THROWS_AS(energy(std::vector<DVectField>(2, DVectField::zero(g, nullptr)), p), Error);
}

TEST_CASE("momentum gradient matches central differences")
{
    for (bool sliding : {false, true}) {
        for (SimKind sim : {SimKind::ssd, SimKind::lncc}) {
            CAPTURE(sliding);
            const RegistrationProblem p = small_problem(16, sliding, sim);
            CHECK(fd_relative_error(p, 17) <= 1e-4);
            CHECK(fd_relative_error(p, 18) <= 1e-4);
        }
    }
}

TEST_CASE("velocity gradient")
{
    RegistrationProblem p = small_problem(16, true, SimKind::ssd);
    const Grid2 &g = p.fixed.grid;
    p.fixed = p.moving;
    const std::vector<DVectField> zero(p.steps, DVectField::zero(g, p.interface));
    for (const auto &gt : energy_gradient(zero, p)) CHECK(gt.max_norm() <= 1e-8);

    // constant images: only the regulariser acts.
    p.moving = p.fixed = ScalarField(g, 0.3);
    p.reg_weight = 1.5;
    Rng rng(6);
    std::vector<DVectField> v;
    for (int t = 0; t < p.steps; ++t) v.push_back(project_normal_continuity(from_composite(p.interface, random_smooth_field(g, rng, 0.1))));
    const auto grad = energy_gradient(v, p);
    const double dt = 1.0 / p.steps;
    for (int t = 0; t < p.steps; ++t) {
        const VectorField diff = grad[t].composite() - p.reg_weight * dt * v[t].composite();
        CHECK(diff.max_norm() <= 1e-12);
    }
}

TEST_CASE("identical images give the identity")
{
    RegistrationProblem p = small_problem(32, true, SimKind::lncc);
    p.fixed = p.moving;
    const RegistrationResult r = register_images(p);
    CHECK(r.energy_trace.back().total <= 1e-3);
    CHECK(r.iterations <= 3);
    const VectorField id = VectorField::identity_map(p.fixed.grid);
    CHECK((r.element.phi_plus - id).max_norm() <= 0.1 * p.fixed.grid.hmax());

    const RegistrationResult l = register_lddmm(p);
    CHECK(l.energy_trace.back().total <= 1e-3);
    CHECK(l.iterations <= 3);
}

TEST_CASE("lddmm recovers a translated bump")
{
    const Grid2 g = make_grid(64, 64);
    RegistrationProblem p;
    p.moving = bump(g, {0.4, 0.5});
    p.fixed = bump(g, {0.5, 0.5});
    p.inertia = InertiaOperator::gaussian(0.1);
    p.sim = SimKind::ssd;
    p.reg_weight = 1e-3;
    RegistrationOptions opt;
    opt.iters = 60;
    const RegistrationResult r = register_lddmm(p, opt);
    const Vec2 back = interp(r.element.inv_phi_plus, Vec2{0.5, 0.5});
    CHECK(norm(back - Vec2{0.4, 0.5}) <= 2 * g.hmax());
    for (std::size_t k = 1; k < r.energy_trace.size(); ++k) CHECK(r.energy_trace[k].total <= r.energy_trace[k - 1].total);
    const ScalarField jac = jacobian_determinant(r.element.phi_plus);
    for (double j : jac.values) REQUIRE(j > 0.0);
}

TEST_CASE("empty interface reduces to lddmm")
{
    const Grid2 g = make_grid(32, 32);
    RegistrationProblem p;
    p.moving = bump(g, {0.42, 0.5}, 0.15);
    p.fixed = bump(g, {0.5, 0.5}, 0.15);
    p.inertia = InertiaOperator::gaussian(0.1);
    p.steps = 5;
    RegistrationOptions opt;
    opt.iters = 8;
    const RegistrationResult a = register_images(p, opt);
    const RegistrationResult b = register_lddmm(p, opt);
    REQUIRE(a.energy_trace.size() == b.energy_trace.size());
    for (std::size_t k = 0; k < a.energy_trace.size(); ++k)
        CHECK(std::abs(a.energy_trace[k].total - b.energy_trace[k].total) <= 1e-6 * std::abs(b.energy_trace[k].total));
    CHECK((a.warped - b.warped).max_abs() <= 1e-8);
}

TEST_CASE("sliding registration stays in the fiber")
{
    const Grid2 g = make_grid(32, 32);
    RegistrationProblem p;
    const auto tex = [](Vec2 q) { return 0.5 + 0.4 * std::sin(12 * q.x) * std::sin(9 * q.y); };
    p.moving = ScalarField::from_function(g, tex);
    p.fixed = ScalarField::from_function(g, [&](Vec2 q) { return tex(q + Vec2{q.y > 0.5 ? -0.04 : 0.04, 0.0}); });
    p.interface = horizontal_interface(g);
    p.inertia = InertiaOperator::gaussian(0.08);
    p.steps = 5;
    RegistrationOptions opt;
    opt.iters = 15;
    const RegistrationResult r = register_images(p, opt);
    CHECK(r.iterations >= 1);
    CHECK(r.energy_trace.back().total < r.energy_trace.front().total);
    for (std::size_t k = 1; k < r.energy_trace.size(); ++k) CHECK(r.energy_trace[k].total <= r.energy_trace[k - 1].total);
    CHECK(r.max_normal_jump <= 1e-8);
    const ElementDiagnostics d = diagnose(r.element);
    CHECK(d.min_jacobian_forward > 0.0);
    CHECK(d.min_jacobian_inverse > 0.0);
    const ScalarField again = act_on_image(r.element, p.moving);
    for (std::size_t k = 0; k < again.size(); ++k) REQUIRE(again[k] == r.warped[k]);
}
