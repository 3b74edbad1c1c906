#include "greg/fixtures.hpp"

#include <cmath>
#include <numbers>

namespace greg {

double window(double t)
{
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double s = std::sin(std::numbers::pi * t);
    return s * s * s * s;
}

double window2(Vec2 p) { return window(p.x) * window(p.y); }

InterfacePtr horizontal_interface(const Grid2 &g, double y0)
{
    return build_interface(ScalarField::from_function(g, [&](Vec2 p) { return p.y - y0; }));
}

InterfacePtr circle_interface(const Grid2 &g, Vec2 centre, double radius)
{
    return build_interface(ScalarField::from_function(g, [&](Vec2 p) { return norm(p - centre) - radius; }));
}

double RandomScalar::operator()(Vec2 p) const
{
    double s = offset;
    for (const auto &m : modes) s += m.a * std::sin(m.kx * p.x + m.ky * p.y + m.phase);
    return s;
}

RandomScalar random_scalar(Rng &rng, int modes, double max_wavenumber)
{
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_real_distribution<double> wave(-max_wavenumber, max_wavenumber);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    RandomScalar f;
    f.offset = 0.5 * amp(rng);
    for (int k = 0; k < modes; ++k) f.modes.push_back({amp(rng), wave(rng), wave(rng), phase(rng)});
    return f;
}

VectorField random_smooth_field(const Grid2 &g, Rng &rng, double amplitude)
{
    const RandomScalar fx = random_scalar(rng);
    const RandomScalar fy = random_scalar(rng);
    return VectorField::from_function(g, [&](Vec2 p) { return amplitude * Vec2{fx(p), fy(p)}; });
}

VectorField random_compact_field(const Grid2 &g, Rng &rng, double amplitude)
{
    const RandomScalar fx = random_scalar(rng);
    const RandomScalar fy = random_scalar(rng);
    return VectorField::from_function(g, [&](Vec2 p) { return (amplitude * window2(p)) * Vec2{fx(p), fy(p)}; });
}

PiecewiseVector random_sliding_field(const InterfacePtr &iface, double y0, Rng &rng, double amplitude)
{
    const Grid2 &g = iface->grid();
    const RandomScalar mx = random_scalar(rng);
    const RandomScalar my = random_scalar(rng);
    const RandomScalar a = random_scalar(rng, 2, 4.0);
    const RandomScalar b = random_scalar(rng, 2, 4.0);
    auto minus = [&](Vec2 p) { return (amplitude * window2(p)) * Vec2{mx(p), my(p)}; };
    VectorField vm = VectorField::from_function(g, minus);
    VectorField vp = VectorField::from_function(g, [&](Vec2 p) {
        const double w = amplitude * window2(p);
        return minus(p) + w * Vec2{a({p.x, 0.0}), (p.y - y0) * b({p.x, 0.0})};
    });
    return make_piecewise(iface, std::move(vp), std::move(vm));
}

PiecewiseScalar random_piecewise_scalar(const InterfacePtr &iface, Rng &rng)
{
    const Grid2 &g = iface->grid();
    const RandomScalar fp = random_scalar(rng);
    const RandomScalar fm = random_scalar(rng);
    return make_piecewise(iface, ScalarField::from_function(g, fp), ScalarField::from_function(g, fm));
}

GroupoidElement random_sliding_arrow(const InterfacePtr &iface, double y0, Rng &rng, double amplitude)
{
    const Grid2 &g = iface->grid();
    VectorField maps[2];
    for (auto &map : maps) {
        const RandomScalar a = random_scalar(rng, 2, 4.0);
        const RandomScalar b = random_scalar(rng, 2, 4.0);
        map = VectorField::from_function(g, [&](Vec2 p) {
            const double w = amplitude * window2(p);
            return p + w * Vec2{a(p), (p.y - y0) * b(p)};
        });
    }
    return make_element(iface, iface, std::move(maps[0]), std::move(maps[1]));
}

BracketInstance bracket_instance(int n, std::uint64_t seed)
{
    const Grid2 g = make_grid(n, n);
    const auto iface = horizontal_interface(g);
    Rng rng(seed);
    const auto mp = random_piecewise_scalar(iface, rng);
    const auto mq = random_piecewise_scalar(iface, rng);
    const VectorField mc = make_piecewise(iface, VectorField(mp.plus, mq.plus), VectorField(mp.minus, mq.minus)).composite();
    BracketInstance out{density_from_composite(iface, mc), {}, {}};
    for (auto *e : {&out.e1, &out.e2}) {
        const PiecewiseVector v = random_sliding_field(iface, 0.5, rng);
        e->v = project_normal_continuity(from_composite(iface, v.composite()));
        const RandomScalar nf = random_scalar(rng, 2, 4.0);
        e->n = BoundaryFunction{iface, {}};
        for (const auto &s : iface->samples()) e->n.values.push_back(nf(s.point));
    }
    return out;
}

OneFormDensity smooth_bump_momentum(const Grid2 &g, double amp)
{
    return make_density(smooth_piecewise(VectorField::from_function(g, [&](Vec2 p) {
        const Vec2 d = p - Vec2{0.5, 0.5};
        const double b = amp * std::exp(-dot(d, d) / 0.02);
        return Vec2{b, 0.5 * b};
    })));
}

OneFormDensity sliding_momentum(const InterfacePtr &iface, double amp)
{
    const Grid2 &g = iface->grid();
    const VectorField m = VectorField::from_function(g, [&](Vec2 p) {
        const double w = amp * window((p.x - 0.1) / 0.8) * window((p.y - 0.15) / 0.7);
        return Vec2{p.y >= 0.5 ? w : -w, 0.0};
    });
    return density_from_composite(iface, m);
}

} // namespace greg
