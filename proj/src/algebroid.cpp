#include "greg/algebroid.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "greg/parallel.hpp"

namespace greg {

OneFormDensity make_density(PiecewiseVector m)
{
    ScalarField w(m.grid(), 1.0);
    return {std::move(m), std::move(w)};
}

OneFormDensity density_from_composite(InterfacePtr iface, const VectorField &m)
{
    return make_density(from_composite(std::move(iface), m));
}

OneFormDensity zero_density(const Grid2 &g, InterfacePtr iface)
{
    if (!iface) return make_density(smooth_piecewise(VectorField(g)));
    return make_density(PiecewiseVector{std::move(iface), VectorField(g), VectorField(g)});
}

OneFormDensity operator+(const OneFormDensity &a, const OneFormDensity &b) { return make_density(a.m + b.m); }
OneFormDensity operator-(const OneFormDensity &a, const OneFormDensity &b) { return make_density(a.m - b.m); }
OneFormDensity operator*(double s, const OneFormDensity &a) { return make_density(s * a.m); }

InertiaOperator InertiaOperator::gaussian(double sigma)
{
    InertiaOperator op;
    op.kind = Kind::gaussian_kernel;
    op.sigma = sigma;
    op.validate();
    return op;
}

InertiaOperator InertiaOperator::helmholtz(double alpha, double gamma, int order)
{
    InertiaOperator op;
    op.kind = Kind::helmholtz;
    op.alpha = alpha;
    op.gamma = gamma;
    op.order = order;
    op.validate();
    return op;
}

void InertiaOperator::validate() const
{
    if (kind == Kind::gaussian_kernel && !(sigma > 0.0)) fail(ErrorKind::invalid_argument, "inertia sigma must be positive");
    if (kind == Kind::helmholtz) {
        if (!(alpha >= 0.0) || !(gamma > 0.0)) fail(ErrorKind::invalid_argument, "helmholtz inertia needs alpha >= 0 and gamma > 0");
        if (order < 1) fail(ErrorKind::invalid_argument, "helmholtz order must be at least 1");
    }
    if (!(cg_tol > 0.0) || cg_max_iter < 1) fail(ErrorKind::invalid_argument, "invalid inertia solver settings");
}

double weighted_dot(const VectorField &a, const VectorField &b)
{
    require_same_grid(a.grid, b.grid, "pairing");
    const Grid2 &g = a.grid;
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += g.weight(k) * (a.x[k] * b.x[k] + a.y[k] * b.y[k]);
    return s;
}

double pairing(const OneFormDensity &mt, const VectorField &v) { return weighted_dot(mt.composite(), v); }

double pairing(const OneFormDensity &mt, const DVectField &v) { return weighted_dot(mt.composite(), v.composite()); }

// -- solver ---------------------------------------------------------------

InertiaSolver::InertiaSolver(const InertiaOperator &op, const Grid2 &g, InterfacePtr iface)
    : op_(op), grid_(g), iface_(std::move(iface))
{
    op_.validate();
    if (iface_) require_same_grid(iface_->grid(), g, "inertia operator");
    split_ = iface_ && op_.regularized;
    if (op_.kind != InertiaOperator::Kind::gaussian_kernel) return;
    kernel_ = gaussian_quadrature_operator(g, op_.sigma);
    if (!split_) return;
    const ScalarField mass = kernel_.apply(ScalarField(g, 1.0));
    scale_plus_ = ScalarField(g);
    scale_minus_ = ScalarField(g);
    for (Side s : {Side::plus, Side::minus}) {
        const ScalarField &chi = iface_->masks().chi(s);
        const ScalarField frac = kernel_.apply(chi);
        ScalarField &out = s == Side::plus ? scale_plus_ : scale_minus_;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (chi[k] == 0.0) continue;
            const double d = std::max(frac[k] / mass[k], 1e-300);
            out[k] = 1.0 / std::sqrt(d);
        }
    }
}

VectorField InertiaSolver::project(const VectorField &v) const
{
    if (!iface_) return v;
    return project_composite(*iface_, v);
}

VectorField InertiaSolver::gaussian_apply(const VectorField &m) const
{
    if (!split_) return kernel_.apply(m);
    VectorField out(grid_);
    for (const ScalarField *s : {&scale_plus_, &scale_minus_}) out += scale(*s, kernel_.apply(scale(*s, m)));
    return out;
}

VectorField InertiaSolver::helmholtz_apply(const VectorField &v) const
{
    const Grid2 &g = grid_;
    const std::vector<Side> *side = split_ ? &iface_->masks().side : nullptr;
    auto laplace = [&](const std::vector<double> &c) {
        std::vector<double> out(c.size(), 0.0);
        auto edge = [&](std::size_t a, std::size_t b, double kappa) {
            if (side && (*side)[a] != (*side)[b]) return;
            const double d = kappa * (c[a] - c[b]);
            out[a] += d;
            out[b] -= d;
        };
        for (int j = 0; j < g.ny; ++j) {
            const double wy = (j == 0 || j == g.ny - 1) ? 0.5 : 1.0;
            for (int i = 0; i + 1 < g.nx; ++i) edge(g.index(i, j), g.index(i + 1, j), wy * g.hy / g.hx);
        }
        for (int j = 0; j + 1 < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const double wx = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
                edge(g.index(i, j), g.index(i, j + 1), wx * g.hx / g.hy);
            }
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] /= g.weight(k);
        return out;
    };
    VectorField cur = v;
    for (int r = 0; r < op_.order; ++r) {
        const auto lx = laplace(cur.x);
        const auto ly = laplace(cur.y);
        for (std::size_t k = 0; k < cur.size(); ++k) {
            cur.x[k] = op_.gamma * cur.x[k] + op_.alpha * lx[k];
            cur.y[k] = op_.gamma * cur.y[k] + op_.alpha * ly[k];
        }
    }
    return cur;
}

VectorField InertiaSolver::conjugate_gradient(const std::function<VectorField(const VectorField &)> &op,
                                              const VectorField &rhs) const
{
    VectorField x(grid_);
    const double bnorm = std::sqrt(weighted_dot(rhs, rhs));
    if (bnorm == 0.0) return x;
    VectorField r = rhs;
    VectorField p = r;
    double rr = weighted_dot(r, r);
    for (int it = 0; it < op_.cg_max_iter; ++it) {
        if (std::sqrt(rr) <= op_.cg_tol * bnorm) return x;
        const VectorField ap = op(p);
        const double pap = weighted_dot(p, ap);
        if (!(pap > 0.0)) break;
        const double a = rr / pap;
        x += a * p;
        r -= a * ap;
        const double rr_new = weighted_dot(r, r);
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    if (std::sqrt(rr) <= op_.cg_tol * bnorm) return x;
    std::ostringstream msg;
    msg << "inertia solve did not converge: relative residual " << std::sqrt(rr) / bnorm;
    fail(ErrorKind::numerical, msg.str());
}

VectorField InertiaSolver::to_velocity(const VectorField &m) const
{
    require_same_grid(m.grid, grid_, "inertia operator");
    if (op_.kind == InertiaOperator::Kind::gaussian_kernel) return project(gaussian_apply(project(m)));
    return conjugate_gradient([&](const VectorField &x) { return to_momentum(x); }, project(m));
}

VectorField InertiaSolver::to_momentum(const VectorField &v) const
{
    require_same_grid(v.grid, grid_, "inertia operator");
    if (op_.kind == InertiaOperator::Kind::helmholtz) return project(helmholtz_apply(project(v)));
    return conjugate_gradient([&](const VectorField &x) { return to_velocity(x); }, project(v));
}

OneFormDensity apply_inertia(const InertiaOperator &op, const DVectField &v)
{
    const InertiaSolver solver(op, v.grid(), v.iface());
    return density_from_composite(v.iface(), solver.to_momentum(v.composite()));
}

DVectField invert_inertia(const InertiaOperator &op, const OneFormDensity &mt)
{
    const InertiaSolver solver(op, mt.grid(), mt.iface());
    return DVectField::assume_admissible(from_composite(mt.iface(), solver.to_velocity(mt.composite())));
}

double metric(const DVectField &u, const DVectField &v, const InertiaOperator &op)
{
    if (u.iface() != v.iface()) fail(ErrorKind::invalid_argument, "interface mismatch in metric");
    return pairing(apply_inertia(op, u), v);
}

double kinetic_energy(const DVectField &v, const InertiaOperator &op) { return 0.5 * metric(v, v, op); }

// -- bracket, T, dual anchor ---------------------------------------------

VectorField advect(const VectorField &a, const VectorField &b)
{
    require_same_grid(a.grid, b.grid, "advective derivative");
    const ScalarField bxx = diff_x(b.component(0)), bxy = diff_y(b.component(0));
    const ScalarField byx = diff_x(b.component(1)), byy = diff_y(b.component(1));
    VectorField out(a.grid);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out.x[k] = a.x[k] * bxx[k] + a.y[k] * bxy[k];
        out.y[k] = a.x[k] * byx[k] + a.y[k] * byy[k];
    }
    return out;
}

PiecewiseVector reg_bracket(const PiecewiseVector &u, const PiecewiseVector &v)
{
    if (u.iface != v.iface) fail(ErrorKind::invalid_argument, "interface mismatch in bracket");
    auto br = [](const VectorField &a, const VectorField &b) { return advect(a, b) - advect(b, a); };
    if (!u.iface) return smooth_piecewise(br(u.plus, v.plus));
    return {u.iface, br(u.plus, v.plus), br(u.minus, v.minus)};
}

OneFormDensity t_operator(const PiecewiseScalar &f)
{
    const Grid2 &g = f.grid();
    const ScalarField w = node_weights(g);
    VectorField out(g);
    if (!f.iface) {
        const ScalarField wf = hadamard(w, f.plus);
        out = VectorField(diff_x_transpose(wf), diff_y_transpose(wf));
    } else {
        for (Side s : {Side::plus, Side::minus}) {
            const ScalarField wf = hadamard(hadamard(w, f.iface->masks().chi(s)), f.part(s));
            VectorField t(diff_x_transpose(wf), diff_y_transpose(wf));
            const auto &plan = f.iface->extension(s);
            plan.apply_transpose(t.x);
            plan.apply_transpose(t.y);
            out += t;
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out.x[k] /= w[k];
        out.y[k] /= w[k];
    }
    return density_from_composite(f.iface, out);
}

OneFormDensity dual_anchor_from_profile(const PiecewiseScalar &h)
{
    const VectorField grad = reg_grad(h).composite();
    return density_from_composite(h.iface, grad + t_operator(h).composite());
}

OneFormDensity dual_anchor(const BoundaryFunction &n)
{
    if (!n.iface) fail(ErrorKind::invalid_argument, "dual anchor needs an interface");
    const ScalarField e = extend_boundary_values(n);
    // Sample normals point into D+, so a profile with jump -n pairs to +n.
    return dual_anchor_from_profile(make_piecewise(n.iface, -0.5 * e, 0.5 * e));
}

} // namespace greg
