#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "greg/bench.hpp"
#include "greg/fixtures.hpp"

using namespace greg;

namespace {

ScalarField noise(const Grid2 &g, Rng &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScalarField f(g);
    for (auto &x : f.values) x = u(rng);
    return f;
}

bool same_values(const ScalarField &a, const ScalarField &b)
{
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] != b[k]) return false;
    return true;
}

} // namespace

TEST_CASE("rectangle scenario")
{
    const Scenario zero = gen_rectangle(64, 0.0);
    CHECK(same_values(zero.moving, zero.fixed));
    const Scenario s = gen_rectangle(64, 0.1);
    REQUIRE(s.truth_element);
    CHECK(re_ssd(s.moving, s.fixed, act_on_image(*s.truth_element, s.moving)) <= 5.0);
    CHECK(re_ssd(s.moving, s.fixed, s.moving) == 100.0);
    CHECK(s.truth_interface->length() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(gen_rectangle(64, 0.3), Error);
}

TEST_CASE("wheel scenario")
{
    const Scenario zero = gen_wheel(64, 0.0);
    CHECK(same_values(zero.moving, zero.fixed));
    const Scenario s = gen_wheel(64, 5.0);
    REQUIRE(s.truth_element);
    CHECK(re_ssd(s.moving, s.fixed, act_on_image(*s.truth_element, s.moving)) <= 5.0);
    CHECK_THROWS_AS(gen_wheel(64, 20.0), Error);

    const Scenario back = gen_wheel(64, -5.0);
    const GroupoidElement round = compose(*back.truth_element, *s.truth_element);
    // rotations leave the square near the corners, where lookups clamp
    CHECK(map_distance(round, identity_element(s.truth_interface)) <= 0.25 * round.grid.hmax());
}

TEST_CASE("re_ssd examples")
{
    const Scenario s = gen_rectangle(32, 0.1);
    CHECK(re_ssd(s.moving, s.fixed, s.fixed) == 0.0);
    CHECK(re_ssd(s.moving, s.fixed, s.moving) == 100.0);
    const ScalarField mid = 0.5 * (s.moving + s.fixed);
    CHECK(re_ssd(s.moving, s.fixed, mid) == doctest::Approx(25.0).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(re_ssd(s.moving, s.moving, s.fixed), "undefined normalization", Error);
}

TEST_CASE("ncc examples")
{
    const Scenario s = gen_wheel(32, 5.0);
    CHECK(ncc_metric(s.fixed, s.fixed) == 1.0);
    double mean = 0.0;
    for (double x : s.fixed.values) mean += x;
    mean /= static_cast<double>(s.fixed.size());
    ScalarField mirrored = s.fixed, affine = s.fixed;
    for (auto &x : mirrored.values) x = -x + 2 * mean;
    for (auto &x : affine.values) x = 3 * x + 0.7;
    CHECK(ncc_metric(s.fixed, mirrored) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(ncc_metric(s.fixed, affine) - 1.0) <= 1e-10);
    CHECK_THROWS_AS(ncc_metric(s.fixed, ScalarField(s.fixed.grid, 0.4)), Error);
}

TEST_CASE("ssim examples")
{
    const Grid2 g = make_grid(16, 16);
    ScalarField ramp(g);
    for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) ramp.at(i, j) = (i + j) / 30.0;
    CHECK(ssim(ramp, ramp) == 1.0);
    ScalarField lifted = ramp;
    for (auto &x : lifted.values) x += 0.1;
    // scalar reference implementation of the same window and constants
    CHECK(ssim(ramp, lifted) == doctest::Approx(0.9806834246735973).epsilon(1e-12));

    Rng rng(9);
    const Grid2 g64 = make_grid(64, 64);
    CHECK(ssim(noise(g64, rng), noise(g64, rng)) <= 0.2);
}

TEST_CASE("tangential jump of a sliding field")
{
    const Grid2 g = make_grid(48, 48);
    const auto iface = horizontal_interface(g);
    const VectorField up(g, Vec2{0.3, 0.0}), down(g, Vec2{-0.2, 0.0});
    const DVectField v = project_normal_continuity(make_piecewise(iface, up, down));
    const std::vector<DVectField> series{v, v};
    CHECK(tangential_jump(series, iface, {0.5, 0.5}) == doctest::Approx(0.5).epsilon(1e-9));
    const std::vector<DVectField> smooth{DVectField::assume_admissible(smooth_piecewise(up))};
    CHECK(tangential_jump(smooth, iface, {0.5, 0.5}) <= 1e-12);
}

TEST_CASE("table rows and determinism")
{
    const std::vector<Scenario> scenarios{gen_rectangle(24, 0.08)};
    TableConfig cfg;
    cfg.steps = 4;
    cfg.opt.iters = 3;
    const auto rows = run_table(scenarios, cfg);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].method == "Before");
    CHECK(rows[0].re_ssd == 100.0);
    CHECK(rows[0].ncc == ncc_metric(scenarios[0].fixed, scenarios[0].moving));
    CHECK(rows[1].method == "LDDMM");
    CHECK(rows[2].method == "Proposed");
    const std::string csv = table_csv(rows);
    CHECK(csv.rfind("scenario,method,re_ssd_percent,ncc,ssim\n", 0) == 0);
    CHECK(table_csv(run_table(scenarios, cfg)) == csv);
}
