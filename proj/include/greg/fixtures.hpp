#pragma once

#include <cstdint>
#include <random>

#include "greg/groupoid.hpp"
#include "greg/interface.hpp"
#include "greg/mechanics.hpp"

namespace greg {

/// Seeded analytic test data shared by the test suites and the `check` command.
/// Every generator draws from the caller's engine only.
using Rng = std::mt19937_64;

/// sin^4(pi t) on [0, 1], zero outside: smooth with a flat collar.
double window(double t);
double window2(Vec2 p);

InterfacePtr horizontal_interface(const Grid2 &g, double y0 = 0.5);
InterfacePtr circle_interface(const Grid2 &g, Vec2 centre, double radius);

/// Random band-limited scalar function, evaluated analytically.
struct RandomScalar {
    struct Mode {
        double a, kx, ky, phase;
    };
    std::vector<Mode> modes;
    double offset = 0.0;
    double operator()(Vec2 p) const;
};

RandomScalar random_scalar(Rng &rng, int modes = 3, double max_wavenumber = 6.0);

/// Random smooth vector field with compact support inside the domain.
VectorField random_compact_field(const Grid2 &g, Rng &rng, double amplitude = 1.0);
/// Random smooth field without compact support.
VectorField random_smooth_field(const Grid2 &g, Rng &rng, double amplitude = 1.0);

/// Admissible sliding field across a horizontal interface at y0: the plus part
/// adds a tangential jump a(x) and a normal term vanishing on the line. Both
/// parts are analytic on the full grid and compactly supported.
PiecewiseVector random_sliding_field(const InterfacePtr &iface, double y0, Rng &rng, double amplitude = 1.0);

/// Piecewise scalar with independent analytic parts.
PiecewiseScalar random_piecewise_scalar(const InterfacePtr &iface, Rng &rng);

/// Analytic arrow over a horizontal interface at y0 with src = trg: each side
/// gets its own windowed displacement whose normal part vanishes on the line.
GroupoidElement random_sliding_arrow(const InterfacePtr &iface, double y0, Rng &rng, double amplitude = 0.05);

/// Momentum on a horizontal interface at 0.5 with random analytic parts and
/// two canonical sliding covectors with random boundary parts.
struct BracketInstance {
    OneFormDensity m;
    CotangentDualElement e1, e2;
};
BracketInstance bracket_instance(int n, std::uint64_t seed);

/// Gaussian bump momentum (amp, amp/2) centred in the unit square.
OneFormDensity smooth_bump_momentum(const Grid2 &g, double amp);
/// Windowed +amp / -amp tangential momentum above / below y = 0.5.
OneFormDensity sliding_momentum(const InterfacePtr &iface, double amp);

} // namespace greg
