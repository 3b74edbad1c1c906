#include "greg/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "greg/bench.hpp"
#include "greg/fixtures.hpp"
#include "greg/mechanics.hpp"

namespace greg {

namespace {

std::string num(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

// Shared registration runs, computed on first use.
class Context {
public:
    explicit Context(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed(std::uint64_t base) const { return base + seed_; }

    const MethodRun &rectangle()
    {
        if (!rect_) rect_ = run_methods(rect_scenario(), TableConfig{});
        return *rect_;
    }
    const Scenario &rect_scenario()
    {
        if (!rect_s_) rect_s_ = gen_rectangle(64, 0.1);
        return *rect_s_;
    }
    const MethodRun &wheel()
    {
        if (!wheel_) wheel_ = run_methods(wheel_scenario(), TableConfig{});
        return *wheel_;
    }
    const Scenario &wheel_scenario()
    {
        if (!wheel_s_) wheel_s_ = gen_wheel(64, 5.0);
        return *wheel_s_;
    }

    std::vector<const RegistrationResult *> registrations() const
    {
        std::vector<const RegistrationResult *> out;
        for (const auto *run : {&rect_, &wheel_})
            if (*run) {
                out.push_back(&(*run)->lddmm);
                out.push_back(&(*run)->groupoid);
            }
        for (const auto &r : extra_) out.push_back(&r);
        return out;
    }
    void keep(RegistrationResult r) { extra_.push_back(std::move(r)); }

private:
    std::uint64_t seed_;
    std::optional<Scenario> rect_s_, wheel_s_;
    std::optional<MethodRun> rect_, wheel_;
    std::vector<RegistrationResult> extra_;
};

struct Outcome {
    bool passed = true;
    std::ostringstream detail;

    void require(bool ok, const std::string &what)
    {
        passed = passed && ok;
        if (detail.tellp() > 0) detail << "; ";
        detail << what;
    }
};

ScalarField gaussian_bump(const Grid2 &g, Vec2 c, double r)
{
    return ScalarField::from_function(g, [=](Vec2 p) {
        const Vec2 d = p - c;
        return std::exp(-dot(d, d) / (r * r));
    });
}

void check_reduction(Context &ctx, Outcome &o)
{
    const Grid2 g = make_grid(64, 64);
    RegistrationProblem p;
    p.moving = gaussian_bump(g, {0.42, 0.5}, 0.12);
    p.fixed = gaussian_bump(g, {0.5, 0.5}, 0.12);
    p.inertia = InertiaOperator::gaussian(0.05);
    RegistrationOptions opt;
    opt.iters = 30;
    RegistrationResult a = register_images(p, opt);
    RegistrationResult b = register_lddmm(p, opt);
    double trace = a.energy_trace.size() == b.energy_trace.size() ? 0.0 : INFINITY;
    for (std::size_t k = 0; k < std::min(a.energy_trace.size(), b.energy_trace.size()); ++k)
        trace = std::max(trace, std::abs(a.energy_trace[k].total - b.energy_trace[k].total) / std::abs(b.energy_trace[k].total));
    const double warp = (a.warped - b.warped).max_abs();
    o.require(trace <= 1e-6, "trace rel " + num(trace) + " <= 1e-6 over " + std::to_string(a.energy_trace.size()) + " iterates");
    o.require(warp <= 1e-8, "warp sup " + num(warp) + " <= 1e-8");
    ctx.keep(std::move(a));
    ctx.keep(std::move(b));
}

void check_ordering(const Scenario &s, const MethodRun &run, bool bound, Outcome &o)
{
    const double rl = re_ssd(s.moving, s.fixed, run.lddmm.warped), rg = re_ssd(s.moving, s.fixed, run.groupoid.warped);
    const double sl = ssim(s.fixed, run.lddmm.warped), sg = ssim(s.fixed, run.groupoid.warped);
    o.require(rg < rl, "Re_SSD proposed " + num(rg) + "% < LDDMM " + num(rl) + "%");
    o.require(sg > sl, "SSIM proposed " + num(sg) + " > LDDMM " + num(sl));
    if (bound) o.require(rg <= 15.0, "Re_SSD proposed " + num(rg) + "% <= 15%");
}

void check_sharpness(Context &ctx, Outcome &o)
{
    const MethodRun &run = ctx.rectangle();
    const InterfacePtr &iface = ctx.rect_scenario().truth_interface;
    const double jg = tangential_jump(run.groupoid.velocities, iface, {0.5, 0.5});
    const double jl = tangential_jump(run.lddmm.velocities, iface, {0.5, 0.5});
    o.require(jg >= 10.0 * jl, "tangential jump proposed " + num(jg) + " >= 10 x LDDMM " + num(jl));
}

void check_jump_lemma(Outcome &o)
{
    std::vector<double> err;
    double rel = 0.0;
    for (int n : {64, 128, 256}) {
        const Grid2 g = make_grid(n, n);
        const auto iface = horizontal_interface(g);
        const auto fp = ScalarField::from_function(g, [](Vec2 p) { return p.x * p.x + p.y; });
        const auto fm = ScalarField::from_function(g, [](Vec2 p) { return p.x * p.y; });
        const auto v = VectorField::from_function(g, [](Vec2 p) {
            const double w = window(p.x) * window(p.y);
            return Vec2{(1.0 + p.y) * w, (0.5 + p.x) * w};
        });
        const auto f = make_piecewise(iface, fp, fm);
        const auto vp = make_piecewise(iface, v, v);
        // sample normals point into D+, the inward normal of D+ on the curve
        const double lhs = -boundary_integral(jump(f), v);
        const double rhs = integrate(dot(vp, reg_grad(f)).composite()) + integrate(hadamard(reg_div(vp).composite(), f.composite()));
        err.push_back(std::abs(lhs - rhs));
        rel = err.back() / std::abs(lhs);
    }
    const double o1 = order(err[0], err[1]), o2 = order(err[1], err[2]);
    o.require(o1 >= 0.9 && o2 >= 0.9, "orders " + num(o1) + ", " + num(o2) + " >= 0.9");
    o.require(rel <= 0.01, "relative error at 256 " + num(rel) + " <= 1%");
}

void check_bracket(Context &ctx, Outcome &o)
{
    double worst_order = INFINITY, worst_anti = 0.0;
    for (std::uint64_t s = 41; s < 46; ++s) {
        std::vector<double> err;
        for (int n : {32, 64, 128}) {
            const auto b = bracket_instance(n, ctx.seed(s));
            const double j = poisson_bracket_jump_form(b.m, b.e1, b.e2);
            const double d = poisson_bracket_div_form(b.m, b.e1, b.e2);
            err.push_back(std::abs(j - d));
            const double jr = poisson_bracket_jump_form(b.m, b.e2, b.e1);
            const double dr = poisson_bracket_div_form(b.m, b.e2, b.e1);
            worst_anti = std::max({worst_anti, std::abs(j + jr) / std::abs(j), std::abs(d + dr) / std::abs(d)});
        }
        worst_order = std::min({worst_order, order(err[0], err[1]), order(err[1], err[2])});
    }
    o.require(worst_order >= 0.9, "min order " + num(worst_order) + " >= 0.9 on 5 instances");
    o.require(worst_anti <= 1e-10, "antisymmetry " + num(worst_anti) + " <= 1e-10");
}

void check_duality(Context &ctx, Outcome &o)
{
    double worst = 0.0;
    for (std::uint64_t s = 51; s < 56; ++s) {
        const auto b = bracket_instance(128, ctx.seed(s));
        const double lhs = dual_pairing(b.e2, hamiltonian_operator(b.m, b.e1));
        const double rhs = poisson_bracket_div_form(b.m, b.e1, b.e2);
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
    o.require(worst <= 0.03, "max relative mismatch " + num(worst) + " <= 3% on 5 instances");
}

double drift(const MomentumTrajectory &traj)
{
    const double h0 = hamiltonian(traj.momenta.front(), traj.velocities.front());
    double d = 0.0;
    for (std::size_t k = 0; k < traj.momenta.size(); ++k)
        d = std::max(d, std::abs(hamiltonian(traj.momenta[k], traj.velocities[k]) - h0) / h0);
    return d;
}

void check_conservation(Outcome &o)
{
    const Grid2 g = make_grid(64, 64);
    const auto op = InertiaOperator::gaussian(0.05);
    const double smooth = drift(shoot(smooth_bump_momentum(g, 0.15), 20, op));
    const double sliding = drift(shoot(sliding_momentum(horizontal_interface(g), 0.15), 20, op));
    o.require(smooth <= 0.01, "smooth drift " + num(smooth) + " <= 1%");
    o.require(sliding <= 0.05, "sliding drift " + num(sliding) + " <= 5%");
}

double fd_error(const RegistrationProblem &p, std::uint64_t seed)
{
    Rng rng(seed);
    const Grid2 &g = p.fixed.grid;
    std::vector<VectorField> m, d;
    for (int t = 0; t < p.steps; ++t) m.push_back(random_smooth_field(g, rng, 0.05));
    for (int t = 0; t < p.steps; ++t) d.push_back(random_smooth_field(g, rng, 0.05));
    std::vector<VectorField> grad;
    momentum_energy(m, p, &grad);
    double analytic = 0.0;
    for (int t = 0; t < p.steps; ++t) analytic += weighted_dot(grad[t], d[t]);
    const double delta = 1e-5;
    auto shifted = [&](double s) {
        std::vector<VectorField> out = m;
        for (int t = 0; t < p.steps; ++t) out[t] += s * d[t];
        return momentum_energy(out, p).total;
    };
    const double fd = (shifted(delta) - shifted(-delta)) / (2 * delta);
    return std::abs(analytic - fd) / std::abs(fd);
}

void check_gradient(Context &ctx, Outcome &o)
{
    const Grid2 g = make_grid(16, 16);
    for (bool sliding : {false, true}) {
        double worst = 0.0;
        for (SimKind sim : {SimKind::ssd, SimKind::lncc}) {
            RegistrationProblem p;
            p.moving = ScalarField::from_function(g, [](Vec2 q) { return 0.5 + 0.3 * std::sin(6 * q.x + 1) * std::cos(5 * q.y) + 0.2 * q.x; });
            p.fixed = ScalarField::from_function(g, [](Vec2 q) { return 0.5 + 0.3 * std::sin(6 * q.x + 1.2) * std::cos(5 * q.y - 0.1) + 0.2 * q.x; });
            p.interface = sliding ? horizontal_interface(g) : nullptr;
            p.inertia = InertiaOperator::gaussian(0.1);
            p.steps = 3;
            p.sim = sim;
            p.lncc_window = 2.0;
            worst = std::max(worst, fd_error(p, ctx.seed(17)));
        }
        o.require(worst <= 1e-4, std::string(sliding ? "with" : "without") + " interface " + num(worst) + " <= 1e-4");
    }
}

void check_groupoid(Context &ctx, Outcome &o)
{
    const Grid2 g = make_grid(64, 64);
    const auto iface = horizontal_interface(g);
    Rng rng(ctx.seed(21));
    std::vector<GroupoidElement> arrows;
    for (int k = 0; k < 10; ++k) arrows.push_back(random_sliding_arrow(iface, 0.5, rng));
    const VectorField id = VectorField::identity_map(g);
    auto displacement = [&](const GroupoidElement &e) {
        double d = 0.0;
        for (Side s : {Side::plus, Side::minus})
            for (std::size_t k = 0; k < g.size(); ++k)
                if (e.gamma_src->masks().side[k] == s) d = std::max(d, norm(e.forward(s)[k] - id[k]));
        return d;
    };
    double ident = 0.0, assoc = 0.0, inv = 0.0;
    for (int k = 0; k < 10; ++k) {
        const GroupoidElement &e = arrows[k];
        ident = std::max({ident, map_distance(compose(identity_element(e.gamma_trg), e), e), map_distance(compose(e, identity_element(e.gamma_src)), e)});
        const GroupoidElement &b = arrows[(k + 1) % 10], &c = arrows[(k + 2) % 10];
        assoc = std::max(assoc, map_distance(compose(compose(c, b), e), compose(c, compose(b, e))));
        inv = std::max({inv, displacement(compose(inverse(e), e)), displacement(compose(e, inverse(e)))});
    }
    const double diam = g.diameter(), h = g.hmax();
    o.require(ident <= 1e-6 * diam, "identity " + num(ident) + " <= 1e-6 diam");
    o.require(assoc <= h * h, "associativity " + num(assoc) + " <= h^2");
    o.require(inv <= 5e-3 * diam, "inverse " + num(inv) + " <= 5e-3 diam");
}

void check_diffeomorphism(Context &ctx, Outcome &o)
{
    ctx.rectangle();
    ctx.wheel();
    double min_jac = INFINITY, max_jump = 0.0;
    const auto runs = ctx.registrations();
    for (const RegistrationResult *r : runs) {
        const ElementDiagnostics d = diagnose(r->element);
        min_jac = std::min({min_jac, d.min_jacobian_forward, d.min_jacobian_inverse});
        max_jump = std::max(max_jump, r->max_normal_jump);
    }
    o.require(min_jac > 0.0, "min side Jacobian " + num(min_jac) + " > 0 over " + std::to_string(runs.size()) + " results");
    o.require(max_jump <= kFiberTolerance, "max normal jump " + num(max_jump) + " <= " + num(kFiberTolerance));
}

void check_metrics(Outcome &o)
{
    const Scenario s = gen_rectangle(64, 0.1);
    const double r0 = re_ssd(s.moving, s.fixed, s.fixed), r1 = re_ssd(s.moving, s.fixed, s.moving);
    const double n = ncc_metric(s.fixed, s.fixed), m = ssim(s.fixed, s.fixed);
    o.require(r0 == 0.0, "Re_SSD(fixed) = " + num(r0));
    o.require(r1 == 100.0, "Re_SSD(moving) = " + num(r1));
    o.require(n == 1.0, "NCC = " + num(n));
    o.require(m == 1.0, "SSIM = " + num(m));
}

} // namespace

const std::vector<std::string> &check_names()
{
    static const std::vector<std::string> names{"reduction", "rectangle", "wheel",   "sharpness", "jump_lemma",     "bracket",
                                                "duality",   "conservation", "gradient", "groupoid", "diffeomorphism", "metrics"};
    return names;
}

std::vector<CheckResult> run_checks(const std::vector<std::string> &names, std::uint64_t seed,
                                    const std::function<void(const CheckResult &)> &report)
{
    const auto &all = check_names();
    std::vector<int> ids;
    for (const std::string &n : names) {
        if (n == "all") {
            for (int k = 0; k < static_cast<int>(all.size()); ++k) ids.push_back(k);
            continue;
        }
        const auto it = std::find(all.begin(), all.end(), n);
        if (it == all.end()) fail(ErrorKind::invalid_argument, "unknown check: " + n);
        ids.push_back(static_cast<int>(it - all.begin()));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    Context ctx(seed);
    std::vector<CheckResult> out;
    for (int id : ids) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            switch (id) {
            case 0: check_reduction(ctx, o); break;
            case 1: check_ordering(ctx.rect_scenario(), ctx.rectangle(), true, o); break;
            case 2: check_ordering(ctx.wheel_scenario(), ctx.wheel(), false, o); break;
            case 3: check_sharpness(ctx, o); break;
            case 4: check_jump_lemma(o); break;
            case 5: check_bracket(ctx, o); break;
            case 6: check_duality(ctx, o); break;
            case 7: check_conservation(o); break;
            case 8: check_gradient(ctx, o); break;
            case 9: check_groupoid(ctx, o); break;
            case 10: check_diffeomorphism(ctx, o); break;
            default: check_metrics(o); break;
            }
        } catch (const Error &e) {
            o.require(false, std::string("error: ") + e.what());
        }
        CheckResult r;
        r.id = id + 1;
        r.name = all[id];
        r.passed = o.passed;
        r.detail = o.detail.str();
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (report) report(r);
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_check(const CheckResult &r)
{
    char head[96];
    std::snprintf(head, sizeof head, "%s %2d %-15s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
    char tail[32];
    std::snprintf(tail, sizeof tail, " (%.1f s)", r.seconds);
    return std::string(head) + r.detail + tail;
}

} // namespace greg
