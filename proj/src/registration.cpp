#include "greg/registration.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "greg/mechanics.hpp"

namespace greg {

namespace {

// Relative to the product of the global variances, so the loss is invariant
// under affine intensity changes of either image.
constexpr double kLnccEps = 1e-5;

double global_variance(const ScalarField &a)
{
    double s = 0.0, s2 = 0.0;
    for (double x : a.values) {
        s += x;
        s2 += x * x;
    }
    const double n = static_cast<double>(a.size());
    return std::max(s2 / n - (s / n) * (s / n), 0.0);
}

double lncc_eps(double va, double vb) { return kLnccEps * std::max(va * vb, 1e-12); }

struct LocalStats {
    ScalarField mu_a, mu_b, saa, sbb, sab;
};

LocalStats local_stats(const ScalarField &a, const ScalarField &b, const SeparableOperator &G)
{
    LocalStats s;
    s.mu_a = G.apply(a);
    s.mu_b = G.apply(b);
    s.saa = G.apply(hadamard(a, a));
    s.sbb = G.apply(hadamard(b, b));
    s.sab = G.apply(hadamard(a, b));
    for (std::size_t k = 0; k < a.size(); ++k) {
        s.saa[k] -= s.mu_a[k] * s.mu_a[k];
        s.sbb[k] -= s.mu_b[k] * s.mu_b[k];
        s.sab[k] -= s.mu_a[k] * s.mu_b[k];
    }
    return s;
}

ScalarField lncc_gradient(const ScalarField &a, const ScalarField &b, double window)
{
    const SeparableOperator G = gaussian_smoother(a.grid, window);
    const LocalStats s = local_stats(a, b, G);
    const double n = static_cast<double>(a.size());
    const double va = global_variance(a), vb = global_variance(b);
    const double eps = lncc_eps(va, vb);
    ScalarField p(a.grid), q(a.grid), mu_adj(a.grid);
    double d_eps = 0.0;
    double mean_a = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = s.saa[k] * s.sbb[k] + eps;
        const double rd = 1.0 / std::sqrt(d);
        p[k] = -rd / n;
        const double dd = 0.5 * s.sab[k] * rd / (d * n);
        q[k] = dd * s.sbb[k];
        d_eps += dd;
        mu_adj[k] = -p[k] * s.mu_b[k] - 2.0 * q[k] * s.mu_a[k];
        mean_a += a[k] / n;
    }
    // eps depends on a through its global variance
    const double d_va = va * vb > 1e-12 ? d_eps * kLnccEps * vb : 0.0;
    const ScalarField gp = G.apply_transpose(p), gq = G.apply_transpose(q), gm = G.apply_transpose(mu_adj);
    ScalarField out(a.grid);
    for (std::size_t k = 0; k < a.size(); ++k)
        out[k] = gm[k] + 2.0 * a[k] * gq[k] + b[k] * gp[k] + d_va * 2.0 * (a[k] - mean_a) / n;
    return out;
}

// Adjoint of psi_next = inverse_step(psi, v, dt). Given the adjoint of
// psi_next, returns the adjoint of psi and writes the one of v.
VectorField inverse_step_adjoint(const VectorField &psi, const VectorField &v, double dt, const VectorField &lam_next,
                                 VectorField &grad_v)
{
    const Grid2 &g = psi.grid;
    const VectorField u = psi - VectorField::identity_map(g);
    VectorField lam(g);
    grad_v = VectorField(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double lx = lam_next.x[k], ly = lam_next.y[k];
        if (lx == 0.0 && ly == 0.0) continue;
        const Vec2 q = g.node(k) - dt * v[k];
        const BilinearStencil st = bilinear_stencil(g, q);
        double j00 = 0.0, j01 = 0.0, j10 = 0.0, j11 = 0.0;
        for (int i = 0; i < 4; ++i) {
            const std::size_t n = st.idx[i];
            j00 += u.x[n] * st.dwdx[i];
            j01 += u.x[n] * st.dwdy[i];
            j10 += u.y[n] * st.dwdx[i];
            j11 += u.y[n] * st.dwdy[i];
            lam.x[n] += st.w[i] * lx;
            lam.y[n] += st.w[i] * ly;
        }
        // d psi_next = (I + J) dq, dq = -dt dv
        grad_v.set(k, -dt * Vec2{lx * (1.0 + j00) + ly * j10, lx * j01 + ly * (1.0 + j11)});
    }
    return lam;
}

// lambda_N on the nodes whose warped value reads through `psi`.
VectorField final_adjoint(const ScalarField &moving, const VectorField &psi, const ScalarField &g_sim,
                          const std::vector<Side> *side, Side s)
{
    VectorField lam(psi.grid);
    for (std::size_t k = 0; k < lam.size(); ++k) {
        if (side && (*side)[k] != s) continue;
        lam.set(k, g_sim[k] * interp_gradient(moving, psi[k]));
    }
    return lam;
}

VectorField divide_weights(VectorField f)
{
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double w = f.grid.weight(k);
        f.x[k] /= w;
        f.y[k] /= w;
    }
    return f;
}

void check_step_cfl(const VectorField &v, double dt)
{
    const double h = v.grid.hmin();
    const double travel = dt * v.max_norm();
    if (travel > h * (1.0 + 1e-12)) fail(ErrorKind::numerical, "CFL violation: step moves " + std::to_string(travel / h) + " cells");
}

std::vector<VectorField> zero_series(const Grid2 &g, int steps) { return std::vector<VectorField>(steps, VectorField(g)); }

// -- models -------------------------------------------------------------

// Groupoid path: per-side flows of the extended velocities, advected
// interface, warp read on the final masks.
class GroupoidModel {
public:
    struct Pass {
        std::vector<VectorField> vc;
        std::vector<DVectField> v;
        FlowRecord rec;
        ScalarField warped;
        EnergyTerms terms;
    };

    explicit GroupoidModel(const RegistrationProblem &p)
        : p_(p), solver_(p.inertia, p.fixed.grid, p.interface), dt_(1.0 / p.steps)
    {
    }

    const Grid2 &grid() const { return p_.fixed.grid; }
    int steps() const { return p_.steps; }

    Pass from_velocities(std::vector<VectorField> vc, double reg) const
    {
        Pass out;
        out.vc = std::move(vc);
        for (const VectorField &f : out.vc) out.v.push_back(DVectField::assume_admissible(from_composite(p_.interface, f)));
        out.rec = flow_integrate_recorded(out.v, p_.interface);
        out.warped = act_on_image(out.rec.element, p_.moving);
        out.terms.similarity = similarity(p_.sim, out.warped, p_.fixed, p_.lncc_window);
        out.terms.regularizer = reg;
        out.terms.total = out.terms.similarity + p_.reg_weight * reg;
        return out;
    }

    Pass forward(const std::vector<VectorField> &m) const
    {
        std::vector<VectorField> vc;
        double reg = 0.0;
        for (const VectorField &mt : m) {
            vc.push_back(solver_.to_velocity(mt));
            reg += 0.5 * dt_ * weighted_dot(mt, vc.back());
        }
        return from_velocities(std::move(vc), reg);
    }

    // Euclidean gradient of the similarity with respect to the composite
    // velocity node values of every step.
    std::vector<VectorField> velocity_adjoint(const Pass &pass) const
    {
        const ScalarField gs = similarity_gradient(p_.sim, pass.warped, p_.fixed, p_.lncc_window);
        const int n = p_.steps;
        const bool split = static_cast<bool>(p_.interface);
        const std::vector<Side> *side = split ? &pass.rec.interfaces.back()->masks().side : nullptr;
        VectorField lam[2];
        lam[0] = final_adjoint(p_.moving, pass.rec.inv_plus[n], gs, side, Side::plus);
        if (split) lam[1] = final_adjoint(p_.moving, pass.rec.inv_minus[n], gs, side, Side::minus);
        std::vector<VectorField> out(n);
        for (int t = n - 1; t >= 0; --t) {
            VectorField acc(grid());
            for (int si = 0; si < (split ? 2 : 1); ++si) {
                const Side s = si == 0 ? Side::plus : Side::minus;
                const VectorField &psi = si == 0 ? pass.rec.inv_plus[t] : pass.rec.inv_minus[t];
                VectorField gv;
                lam[si] = inverse_step_adjoint(psi, pass.v[t].field().part(s), dt_, lam[si], gv);
                if (split) {
                    const ExtensionPlan &plan = p_.interface->extension(s);
                    plan.apply_transpose(gv.x);
                    plan.apply_transpose(gv.y);
                }
                acc += gv;
            }
            out[t] = std::move(acc);
        }
        return out;
    }

    void gradient(const Pass &pass, const std::vector<VectorField> &m, std::vector<VectorField> &G,
                  std::vector<VectorField> &D) const
    {
        const std::vector<VectorField> gv = velocity_adjoint(pass);
        G.assign(m.size(), VectorField());
        D.assign(m.size(), VectorField());
        const double r = p_.reg_weight * dt_;
        for (std::size_t t = 0; t < m.size(); ++t) {
            const VectorField gw = divide_weights(gv[t]);
            G[t] = solver_.to_velocity(gw) + r * pass.vc[t];
            D[t] = gw + r * m[t];
        }
    }

    double normal_jump(const Pass &pass) const
    {
        double out = 0.0;
        if (!p_.interface) return out;
        for (const DVectField &v : pass.v)
            for (double j : greg::normal_jump(v.field())) out = std::max(out, std::abs(j));
        return out;
    }

    RegistrationResult result(const Pass &pass) const
    {
        RegistrationResult r;
        r.element = pass.rec.element;
        r.warped = act_on_image(r.element, p_.moving);
        r.velocities = pass.v;
        return r;
    }

    const InertiaSolver &solver() const { return solver_; }

private:
    const RegistrationProblem &p_;
    InertiaSolver solver_;
    double dt_;
};

// Plain smooth LDDMM: one forward and one inverse map, no piecewise fields.
class LddmmModel {
public:
    struct Pass {
        std::vector<VectorField> v;
        std::vector<VectorField> psi;
        VectorField phi;
        ScalarField warped;
        EnergyTerms terms;
    };

    explicit LddmmModel(const RegistrationProblem &p) : p_(p), solver_(p.inertia, p.fixed.grid, nullptr), dt_(1.0 / p.steps) {}

    const Grid2 &grid() const { return p_.fixed.grid; }
    int steps() const { return p_.steps; }

    Pass forward(const std::vector<VectorField> &m) const
    {
        const Grid2 &g = grid();
        Pass out;
        out.psi.push_back(VectorField::identity_map(g));
        out.phi = VectorField::identity_map(g);
        double reg = 0.0;
        for (const VectorField &mt : m) {
            out.v.push_back(solver_.to_velocity(mt));
            const VectorField &v = out.v.back();
            reg += 0.5 * dt_ * weighted_dot(mt, v);
            check_step_cfl(v, dt_);
            out.phi = forward_step(out.phi, v, dt_);
            out.psi.push_back(inverse_step(out.psi.back(), v, dt_));
            const ScalarField jf = jacobian_determinant(out.phi), ji = jacobian_determinant(out.psi.back());
            for (std::size_t k = 0; k < g.size(); ++k)
                if (!(jf[k] > 0.0) || !(ji[k] > 0.0)) fail(ErrorKind::numerical, "non-diffeomorphic step");
        }
        out.warped = ScalarField(g);
        const VectorField &psi = out.psi.back();
        for (std::size_t k = 0; k < g.size(); ++k) out.warped[k] = interp(p_.moving, psi[k]);
        out.terms.similarity = similarity(p_.sim, out.warped, p_.fixed, p_.lncc_window);
        out.terms.regularizer = reg;
        out.terms.total = out.terms.similarity + p_.reg_weight * reg;
        return out;
    }

    void gradient(const Pass &pass, const std::vector<VectorField> &m, std::vector<VectorField> &G,
                  std::vector<VectorField> &D) const
    {
        const int n = p_.steps;
        const ScalarField gs = similarity_gradient(p_.sim, pass.warped, p_.fixed, p_.lncc_window);
        VectorField lam = final_adjoint(p_.moving, pass.psi[n], gs, nullptr, Side::plus);
        G.assign(n, VectorField());
        D.assign(n, VectorField());
        const double r = p_.reg_weight * dt_;
        for (int t = n - 1; t >= 0; --t) {
            VectorField gv;
            lam = inverse_step_adjoint(pass.psi[t], pass.v[t], dt_, lam, gv);
            const VectorField gw = divide_weights(gv);
            G[t] = solver_.to_velocity(gw) + r * pass.v[t];
            D[t] = gw + r * m[t];
        }
    }

    double normal_jump(const Pass &) const { return 0.0; }

    RegistrationResult result(const Pass &pass) const
    {
        RegistrationResult r;
        const Grid2 &g = grid();
        r.element = identity_element(g);
        r.element.phi_plus = r.element.phi_minus = pass.phi;
        r.element.inv_phi_plus = r.element.inv_phi_minus = pass.psi.back();
        r.warped = act_on_image(r.element, p_.moving);
        for (const VectorField &v : pass.v) r.velocities.push_back(DVectField::assume_admissible(smooth_piecewise(v)));
        return r;
    }

private:
    const RegistrationProblem &p_;
    InertiaSolver solver_;
    double dt_;
};

template <class Model>
std::optional<typename Model::Pass> try_forward(const Model &model, const std::vector<VectorField> &m)
{
    try {
        return model.forward(m);
    } catch (const Error &e) {
        if (e.kind() != ErrorKind::numerical) throw;
        return std::nullopt;
    }
}

double series_dot(const std::vector<VectorField> &a, const std::vector<VectorField> &b)
{
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += weighted_dot(a[t], b[t]);
    return s;
}

template <class Model>
RegistrationResult optimize(const Model &model, const RegistrationOptions &opt)
{
    std::vector<VectorField> m = zero_series(model.grid(), model.steps());
    typename Model::Pass pass = model.forward(m);
    std::vector<VectorField> G, D;
    model.gradient(pass, m, G, D);

    std::vector<EnergyTerms> trace{pass.terms};
    double max_jump = model.normal_jump(pass);
    bool converged = false;
    int iterations = 0;
    double alpha = -1.0;
    for (int it = 0; it < opt.iters; ++it) {
        const double slope = series_dot(G, D);
        if (!(slope > 0.0)) {
            converged = true;
            break;
        }
        if (alpha < 0.0) {
            double gmax = 0.0;
            for (const VectorField &f : G) gmax = std::max(gmax, f.max_norm());
            alpha = opt.step_size * model.grid().hmin() / gmax;
        }
        std::optional<typename Model::Pass> next;
        std::vector<VectorField> trial;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            trial = m;
            for (std::size_t t = 0; t < trial.size(); ++t) trial[t] -= alpha * D[t];
            next = try_forward(model, trial);
            if (next && (!opt.line_search || next->terms.total <= pass.terms.total - opt.armijo_c * alpha * slope)) break;
            next.reset();
            alpha *= 0.5;
        }
        if (!next) break;
        const double prev = pass.terms.total;
        m = std::move(trial);
        pass = std::move(*next);
        model.gradient(pass, m, G, D);
        trace.push_back(pass.terms);
        max_jump = std::max(max_jump, model.normal_jump(pass));
        ++iterations;
        alpha *= 2.0;
        // floor of 1 on the scale, as energies near zero make a plain ratio meaningless
        const double rel = (prev - pass.terms.total) / std::max(std::abs(prev), 1.0);
        if (rel < opt.tol) {
            converged = true;
            break;
        }
    }
    RegistrationResult r = model.result(pass);
    r.energy_trace = std::move(trace);
    r.converged = converged;
    r.iterations = iterations;
    r.max_normal_jump = max_jump;
    return r;
}

void validate_series(std::size_t n, const RegistrationProblem &problem)
{
    if (n != static_cast<std::size_t>(problem.steps)) fail(ErrorKind::invalid_argument, "series length must equal steps");
}

} // namespace

void RegistrationProblem::validate() const
{
    require_same_grid(moving.grid, fixed.grid, "registration images");
    if (steps < 1) fail(ErrorKind::invalid_argument, "steps must be at least 1");
    if (sim == SimKind::lncc && !(lncc_window >= 2.0)) fail(ErrorKind::invalid_argument, "lncc_window must be at least 2 pixels");
    if (!(reg_weight > 0.0)) fail(ErrorKind::invalid_argument, "reg_weight must be positive");
    if (interface) require_same_grid(interface->grid(), fixed.grid, "registration interface");
    inertia.validate();
}

double ssd(const ScalarField &a, const ScalarField &b)
{
    require_same_grid(a.grid, b.grid, "ssd");
    const ScalarField d = a - b;
    return integrate(hadamard(d, d));
}

double lncc(const ScalarField &a, const ScalarField &b, double window)
{
    require_same_grid(a.grid, b.grid, "lncc");
    const LocalStats s = local_stats(a, b, gaussian_smoother(a.grid, window));
    const double eps = lncc_eps(global_variance(a), global_variance(b));
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += s.sab[k] / std::sqrt(s.saa[k] * s.sbb[k] + eps);
    return 1.0 - sum / static_cast<double>(a.size());
}

double similarity(SimKind kind, const ScalarField &warped, const ScalarField &fixed, double window)
{
    return kind == SimKind::ssd ? ssd(warped, fixed) : lncc(warped, fixed, window);
}

ScalarField similarity_gradient(SimKind kind, const ScalarField &warped, const ScalarField &fixed, double window)
{
    require_same_grid(warped.grid, fixed.grid, "similarity gradient");
    if (kind == SimKind::lncc) return lncc_gradient(warped, fixed, window);
    ScalarField out(warped.grid);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 2.0 * warped.grid.weight(k) * (warped[k] - fixed[k]);
    return out;
}

EnergyTerms energy(const std::vector<DVectField> &v, const RegistrationProblem &problem)
{
    problem.validate();
    validate_series(v.size(), problem);
    const double dt = 1.0 / problem.steps;
    double reg = 0.0;
    for (const DVectField &f : v) reg += 0.5 * dt * metric(f, f, problem.inertia);
    const GroupoidElement e = flow_integrate(v, problem.interface);
    EnergyTerms out;
    out.similarity = similarity(problem.sim, act_on_image(e, problem.moving), problem.fixed, problem.lncc_window);
    out.regularizer = reg;
    out.total = out.similarity + problem.reg_weight * reg;
    return out;
}

std::vector<DVectField> energy_gradient(const std::vector<DVectField> &v, const RegistrationProblem &problem)
{
    problem.validate();
    validate_series(v.size(), problem);
    const GroupoidModel model(problem);
    std::vector<VectorField> vc;
    for (const DVectField &f : v) vc.push_back(f.composite());
    const auto pass = model.from_velocities(std::move(vc), 0.0);
    const std::vector<VectorField> gv = model.velocity_adjoint(pass);
    const double r = problem.reg_weight / problem.steps;
    std::vector<DVectField> out;
    for (std::size_t t = 0; t < gv.size(); ++t) {
        const VectorField g = model.solver().to_velocity(divide_weights(gv[t])) + r * pass.vc[t];
        out.push_back(DVectField::assume_admissible(from_composite(problem.interface, g)));
    }
    return out;
}

EnergyTerms momentum_energy(const std::vector<VectorField> &m, const RegistrationProblem &problem,
                            std::vector<VectorField> *grad)
{
    problem.validate();
    validate_series(m.size(), problem);
    const GroupoidModel model(problem);
    const auto pass = model.forward(m);
    if (grad) {
        std::vector<VectorField> D;
        model.gradient(pass, m, *grad, D);
    }
    return pass.terms;
}

EnergyTerms lddmm_energy(const std::vector<VectorField> &m, const RegistrationProblem &problem,
                         std::vector<VectorField> *grad)
{
    problem.validate();
    validate_series(m.size(), problem);
    const LddmmModel model(problem);
    const auto pass = model.forward(m);
    if (grad) {
        std::vector<VectorField> D;
        model.gradient(pass, m, *grad, D);
    }
    return pass.terms;
}

RegistrationResult register_images(const RegistrationProblem &problem, const RegistrationOptions &opt)
{
    problem.validate();
    return optimize(GroupoidModel(problem), opt);
}

RegistrationResult register_lddmm(const RegistrationProblem &problem, const RegistrationOptions &opt)
{
    problem.validate();
    return optimize(LddmmModel(problem), opt);
}

} // namespace greg
