#include "greg/bench.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <algorithm>

#include "greg/fixtures.hpp"

namespace greg {

namespace {

double smoothstep(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// 1 inside, 0 outside, with a one-pixel ramp centred on d = 0.
double edge(double d, double h) { return smoothstep(d / h + 0.5); }

Vec2 rotate(Vec2 p, Vec2 c, double a)
{
    const Vec2 d = p - c;
    const double cs = std::cos(a), sn = std::sin(a);
    return c + Vec2{cs * d.x - sn * d.y, sn * d.x + cs * d.y};
}

VectorField map_from(const Grid2 &g, const std::function<Vec2(Vec2)> &f) { return VectorField::from_function(g, f); }

struct Stats {
    double mean = 0.0;
    double centred = 0.0;
};

Stats stats(const ScalarField &a)
{
    Stats s;
    for (double x : a.values) s.mean += x;
    s.mean /= static_cast<double>(a.size());
    for (double x : a.values) s.centred += (x - s.mean) * (x - s.mean);
    return s;
}

std::vector<double> ssim_window()
{
    std::vector<double> w(8);
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double d = i - 3.5;
        w[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
        sum += w[i];
    }
    for (double &x : w) x /= sum;
    return w;
}

std::string format_row(const TableRow &r)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.6f,%.6f\n", r.scenario.c_str(), r.method.c_str(), r.re_ssd, r.ncc, r.ssim);
    return buf;
}

} // namespace

Scenario gen_rectangle(int n, double shift)
{
    if (n < 8) fail(ErrorKind::invalid_argument, "scenario grid too small");
    if (!(std::abs(shift) < 0.25)) fail(ErrorKind::invalid_argument, "shift must be below a quarter of the domain width");
    const Grid2 g = make_grid(n, n);
    const double h = g.hmax();
    // Smooth interior texture with wavelengths well above the shift, so the
    // matching has no aliased minima, plus a few soft dots.
    const auto image = [h](Vec2 p) {
        const double d = std::min(std::min(p.x - 0.3, 0.7 - p.x), std::min(p.y - 0.2, 0.8 - p.y));
        const double tex = 0.45 + 0.2 * std::sin(2 * std::numbers::pi * (p.x - 0.3) / 0.4) * std::cos(2 * std::numbers::pi * (p.y - 0.2) / 0.6)
                           + 0.15 * (p.x - 0.5);
        double v = tex * edge(d, h);
        static const Vec2 dots[] = {{0.38, 0.3}, {0.55, 0.37}, {0.45, 0.62}, {0.62, 0.72}, {0.4, 0.45}, {0.6, 0.58}};
        for (const Vec2 &c : dots) v += 0.35 * smoothstep((0.045 - norm(p - c)) / 0.03);
        return v;
    };
    Scenario s;
    s.name = "rectangle";
    s.moving = ScalarField::from_function(g, image);
    s.fixed = ScalarField::from_function(g, [&](Vec2 p) { return image(p - Vec2{p.y >= 0.5 ? shift : -shift, 0.0}); });
    s.truth_interface = horizontal_interface(g, 0.5);
    GroupoidElement e = identity_element(s.truth_interface);
    e.phi_plus = map_from(g, [&](Vec2 p) { return p + Vec2{shift, 0.0}; });
    e.phi_minus = map_from(g, [&](Vec2 p) { return p - Vec2{shift, 0.0}; });
    e.inv_phi_plus = map_from(g, [&](Vec2 p) { return p - Vec2{shift, 0.0}; });
    e.inv_phi_minus = map_from(g, [&](Vec2 p) { return p + Vec2{shift, 0.0}; });
    s.truth_element = std::move(e);
    return s;
}

Scenario gen_wheel(int n, double degrees)
{
    if (n < 8) fail(ErrorKind::invalid_argument, "scenario grid too small");
    if (!(std::abs(degrees) <= 15.0)) fail(ErrorKind::invalid_argument, "rotation must be at most 15 degrees");
    const Grid2 g = make_grid(n, n);
    const double h = g.hmax();
    const Vec2 c{0.5, 0.5};
    const double r_in = 0.22, r_out = 0.42;
    const auto image = [=](Vec2 p) {
        const Vec2 d = p - c;
        const double r = norm(d), th = std::atan2(d.y, d.x);
        if (r < r_in) {
            const double spokes = 0.5 + 0.5 * std::cos(6 * th);
            return 0.2 + 0.6 * spokes * smoothstep((r - 0.03) / 0.05) * edge(r_in - h - r, h);
        }
        const double spokes = 0.5 + 0.5 * std::cos(12 * th);
        return (0.2 + 0.6 * spokes * edge(r - r_in - h, h)) * edge(r_out - r, h);
    };
    const double a = degrees * std::numbers::pi / 180.0;
    Scenario s;
    s.name = "wheel";
    s.moving = ScalarField::from_function(g, image);
    s.fixed = ScalarField::from_function(g, [&](Vec2 p) { return image(rotate(p, c, norm(p - c) < r_in ? -a : a)); });
    s.truth_interface = circle_interface(g, c, r_in);
    // plus is the outer annulus
    GroupoidElement e = identity_element(s.truth_interface);
    e.phi_plus = map_from(g, [&](Vec2 p) { return rotate(p, c, -a); });
    e.phi_minus = map_from(g, [&](Vec2 p) { return rotate(p, c, a); });
    e.inv_phi_plus = map_from(g, [&](Vec2 p) { return rotate(p, c, a); });
    e.inv_phi_minus = map_from(g, [&](Vec2 p) { return rotate(p, c, -a); });
    s.truth_element = std::move(e);
    return s;
}

Scenario make_scenario(const std::string &name, int n, double amount)
{
    if (name == "rectangle") return gen_rectangle(n, amount);
    if (name == "wheel") return gen_wheel(n, amount);
    fail(ErrorKind::invalid_argument, "unknown scenario: " + name);
}

double re_ssd(const ScalarField &moving, const ScalarField &fixed, const ScalarField &warped)
{
    const double before = ssd(moving, fixed);
    if (!(before > 0.0)) fail(ErrorKind::invalid_argument, "undefined normalization");
    return 100.0 * ssd(warped, fixed) / before;
}

double ncc_metric(const ScalarField &fixed, const ScalarField &warped)
{
    require_same_grid(fixed.grid, warped.grid, "ncc");
    const auto constant = [](const ScalarField &f) {
        const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
        return *lo == *hi;
    };
    const Stats a = stats(fixed), b = stats(warped);
    if (constant(fixed) || constant(warped)) fail(ErrorKind::invalid_argument, "ncc of a constant image");
    double s = 0.0;
    for (std::size_t k = 0; k < fixed.size(); ++k) s += (fixed[k] - a.mean) * (warped[k] - b.mean);
    return s / std::sqrt(a.centred * b.centred);
}

double ssim(const ScalarField &fixed, const ScalarField &warped)
{
    require_same_grid(fixed.grid, warped.grid, "ssim");
    const Grid2 &g = fixed.grid;
    if (g.nx < 8 || g.ny < 8) fail(ErrorKind::invalid_argument, "ssim needs at least 8x8 pixels");
    const std::vector<double> w = ssim_window();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int count = 0;
    for (int j0 = 0; j0 + 8 <= g.ny; ++j0) {
        for (int i0 = 0; i0 + 8 <= g.nx; ++i0) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int b = 0; b < 8; ++b) {
                for (int a = 0; a < 8; ++a) {
                    const double wt = w[a] * w[b];
                    const double x = fixed.at(i0 + a, j0 + b), y = warped.at(i0 + a, j0 + b);
                    mx += wt * x;
                    my += wt * y;
                    sxx += wt * x * x;
                    syy += wt * y * y;
                    sxy += wt * x * y;
                }
            }
            sxx -= mx * mx;
            syy -= my * my;
            sxy -= mx * my;
            total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
            ++count;
        }
    }
    return total / count;
}

double tangential_jump(const std::vector<DVectField> &velocities, const InterfacePtr &iface, Vec2 at)
{
    if (!iface || velocities.empty()) fail(ErrorKind::invalid_argument, "tangential jump needs an interface and velocities");
    const auto &samples = iface->samples();
    std::size_t best = 0;
    for (std::size_t k = 1; k < samples.size(); ++k)
        if (norm(samples[k].point - at) < norm(samples[best].point - at)) best = k;
    const Vec2 t = perp(samples[best].normal);
    double sum = 0.0;
    for (const DVectField &v : velocities) {
        const VectorField c = v.composite();
        const Vec2 up = trace(*iface, c, Side::plus)[best];
        const Vec2 down = trace(*iface, c, Side::minus)[best];
        sum += std::abs(dot(up - down, t));
    }
    return sum / static_cast<double>(velocities.size());
}

RegistrationProblem TableConfig::problem(const Scenario &s, bool sliding) const
{
    RegistrationProblem p;
    p.moving = s.moving;
    p.fixed = s.fixed;
    p.interface = sliding ? s.truth_interface : nullptr;
    p.inertia = inertia;
    p.steps = steps;
    p.sim = sim;
    p.lncc_window = lncc_window;
    p.reg_weight = reg_weight;
    return p;
}

MethodRun run_methods(const Scenario &s, const TableConfig &cfg)
{
    MethodRun out;
    out.lddmm = register_lddmm(cfg.problem(s, false), cfg.opt);
    out.groupoid = register_images(cfg.problem(s, true), cfg.opt);
    return out;
}

std::vector<TableRow> run_table(const std::vector<Scenario> &scenarios, const TableConfig &cfg,
                                const std::function<void(const Scenario &, const MethodRun &)> &on_run)
{
    std::vector<TableRow> rows;
    for (const Scenario &s : scenarios) {
        const auto row = [&](const char *method, const ScalarField &warped) {
            rows.push_back({s.name, method, re_ssd(s.moving, s.fixed, warped), ncc_metric(s.fixed, warped), ssim(s.fixed, warped)});
        };
        row("Before", s.moving);
        const MethodRun run = run_methods(s, cfg);
        row("LDDMM", run.lddmm.warped);
        row("Proposed", run.groupoid.warped);
        if (on_run) on_run(s, run);
    }
    return rows;
}

std::string table_csv(const std::vector<TableRow> &rows)
{
    std::string out = "scenario,method,re_ssd_percent,ncc,ssim\n";
    for (const TableRow &r : rows) out += format_row(r);
    return out;
}

} // namespace greg
