#include "greg/mechanics.hpp"

#include <cmath>
#include <sstream>

namespace greg {

namespace {

PiecewiseVector assemble(const InterfacePtr &iface, VectorField plus, VectorField minus)
{
    if (!iface) return smooth_piecewise(std::move(plus));
    return {iface, std::move(plus), std::move(minus)};
}

// i_v dm with dm = c dx^dy.
VectorField interior_curl(const ScalarField &c, const VectorField &v)
{
    VectorField out(v.grid);
    for (std::size_t k = 0; k < out.size(); ++k) out.set(k, c[k] * perp(v[k]));
    return out;
}

BoundaryFunction or_zero(const BoundaryFunction &b, const InterfacePtr &iface)
{
    if (!b.values.empty() || !iface) return b;
    return boundary_constant(iface, 0.0);
}

void require_shared(const OneFormDensity &mt, const DVectField &a, const DVectField &b, const char *what)
{
    if (mt.iface() != a.iface() || a.iface() != b.iface()) fail(ErrorKind::invalid_argument, std::string("interface mismatch in ") + what);
}

double boundary_pairing(const BoundaryFunction &a, const BoundaryFunction &b)
{
    if (!a.iface || a.values.empty() || b.values.empty()) return 0.0;
    const auto &samples = a.iface->samples();
    double s = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) s += a.values[k] * b.values[k] * samples[k].weight;
    return s;
}

void check_cfl(const DVectField &v, double dt)
{
    const double h = v.grid().hmin();
    const double travel = dt * v.max_norm();
    if (travel > h * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "CFL violation: step moves " << travel / h << " cells";
        fail(ErrorKind::numerical, msg.str());
    }
}

} // namespace

VectorField epdiff_rhs(const VectorField &m, const VectorField &v)
{
    require_same_grid(m.grid, v.grid, "epdiff");
    const ScalarField mx = m.component(0), my = m.component(1);
    const ScalarField vx = v.component(0), vy = v.component(1);
    const ScalarField mxx = diff_x(mx), mxy = diff_y(mx), myx = diff_x(my), myy = diff_y(my);
    const ScalarField vxx = diff_x(vx), vxy = diff_y(vx), vyx = diff_x(vy), vyy = diff_y(vy);
    VectorField out(m.grid);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double div = vxx[k] + vyy[k];
        const double ax = vx[k] * mxx[k] + vy[k] * mxy[k] + vxx[k] * mx[k] + vyx[k] * my[k] + div * mx[k];
        const double ay = vx[k] * myx[k] + vy[k] * myy[k] + vxy[k] * mx[k] + vyy[k] * my[k] + div * my[k];
        out.set(k, {-ax, -ay});
    }
    return out;
}

VectorField epdiff_rhs_density(const VectorField &m, const VectorField &v)
{
    require_same_grid(m.grid, v.grid, "epdiff");
    VectorField out = interior_curl(curl2(m), v);
    out += gradient(dot(m, v));
    out += scale(divergence(v), m);
    return -1.0 * out;
}

MechanicsRate euler_arnold_rhs(const OneFormDensity &mt, const DVectField &v)
{
    if (mt.iface() != v.iface()) fail(ErrorKind::invalid_argument, "interface mismatch in euler_arnold_rhs");
    const PiecewiseVector &m = mt.m;
    const PiecewiseVector &pv = v.field();
    const PiecewiseScalar c = reg_curl2(m);
    const PiecewiseVector gf = reg_grad(dot(m, pv));
    const PiecewiseScalar dv = reg_div(pv);
    VectorField parts[2];
    for (Side s : {Side::plus, Side::minus}) {
        VectorField r = interior_curl(c.part(s), pv.part(s));
        r += 0.5 * gf.part(s);
        r += 0.5 * scale(dv.part(s), m.part(s));
        parts[s == Side::plus ? 0 : 1] = -1.0 * r;
    }
    return {make_density(assemble(mt.iface(), std::move(parts[0]), std::move(parts[1]))), anchor(v)};
}

double hamiltonian(const OneFormDensity &mt, const DVectField &v) { return 0.5 * pairing(mt, v); }

double hamiltonian(const OneFormDensity &mt, const InertiaOperator &op) { return hamiltonian(mt, invert_inertia(op, mt)); }

MomentumTrajectory shoot(const OneFormDensity &m0, int steps, const InertiaOperator &op, ShootEquation eq)
{
    if (steps < 1) fail(ErrorKind::invalid_argument, "shoot needs at least one step");
    if (eq == ShootEquation::epdiff && m0.iface()) fail(ErrorKind::invalid_argument, "epdiff shooting is smooth-only");
    const double dt = 1.0 / steps;
    auto rate = [&](const OneFormDensity &m, const DVectField &v) {
        if (eq == ShootEquation::epdiff) return density_from_composite(nullptr, epdiff_rhs(m.composite(), v.composite()));
        return euler_arnold_rhs(m, v).momentum;
    };
    // m + s * r, both read per side, re-extended onto `iface` when present.
    auto update = [](const OneFormDensity &m, double s, const OneFormDensity &r, const InterfacePtr &iface) {
        PiecewiseVector next = assemble(m.iface(), m.m.plus + s * r.m.plus, m.m.minus + s * r.m.minus);
        if (iface) next = reextend(next, iface);
        return make_density(std::move(next));
    };

    MomentumTrajectory traj;
    traj.times.push_back(0.0);
    traj.momenta.push_back(m0);
    traj.interfaces.push_back(m0.iface());
    traj.velocities.push_back(invert_inertia(op, m0));
    for (int k = 0; k < steps; ++k) {
        const OneFormDensity &m = traj.momenta.back();
        const InterfacePtr iface = traj.interfaces.back();
        const DVectField v = traj.velocities.back();
        check_cfl(v, dt);
        const OneFormDensity k1 = rate(m, v);
        const InterfacePtr half_iface = iface ? advect_interface(*iface, v, 0.5 * dt) : nullptr;
        const OneFormDensity mh = update(m, 0.5 * dt, k1, half_iface);
        const DVectField vh = invert_inertia(op, mh);
        check_cfl(vh, dt);
        const OneFormDensity k2 = rate(mh, vh);
        const InterfacePtr next_iface = iface ? advect_interface(*iface, vh, dt) : nullptr;
        OneFormDensity next = update(m, dt, k2, next_iface);
        DVectField vnext = invert_inertia(op, next);
        traj.times.push_back(k + 1 == steps ? 1.0 : (k + 1) * dt);
        traj.momenta.push_back(std::move(next));
        traj.interfaces.push_back(next_iface);
        traj.velocities.push_back(std::move(vnext));
    }
    return traj;
}

GroupoidElement flow_integrate(const std::vector<DVectField> &velocities, InterfacePtr gamma0)
{
    return flow_integrate_recorded(velocities, std::move(gamma0)).element;
}

FlowRecord flow_integrate_recorded(const std::vector<DVectField> &velocities, InterfacePtr gamma0)
{
    if (velocities.empty()) fail(ErrorKind::invalid_argument, "flow needs at least one velocity");
    const Grid2 g = velocities.front().grid();
    const double dt = 1.0 / static_cast<double>(velocities.size());
    FlowRecord rec;
    GroupoidElement &e = rec.element;
    e = gamma0 ? identity_element(gamma0) : identity_element(g);
    InterfacePtr iface = gamma0;
    rec.inv_plus.push_back(e.inv_phi_plus);
    rec.inv_minus.push_back(e.inv_phi_minus);
    rec.interfaces.push_back(iface);
    for (const DVectField &v : velocities) {
        require_same_grid(v.grid(), g, "flow");
        if (!gamma0 && !v.smooth()) fail(ErrorKind::invalid_argument, "piecewise velocity in a smooth flow");
        check_cfl(v, dt);
        const PiecewiseVector &pv = v.field();
        e.phi_plus = forward_step(e.phi_plus, pv.plus, dt);
        e.inv_phi_plus = inverse_step(e.inv_phi_plus, pv.plus, dt);
        if (gamma0) {
            e.phi_minus = forward_step(e.phi_minus, pv.minus, dt);
            e.inv_phi_minus = inverse_step(e.inv_phi_minus, pv.minus, dt);
            iface = advect_interface(*iface, v, dt);
        } else {
            e.phi_minus = e.phi_plus;
            e.inv_phi_minus = e.inv_phi_plus;
        }
        e.gamma_trg = iface;
        const ElementDiagnostics d = diagnose(e);
        if (!(d.min_jacobian_forward > 0.0) || !(d.min_jacobian_inverse > 0.0))
            fail(ErrorKind::numerical, "non-diffeomorphic step");
        rec.inv_plus.push_back(e.inv_phi_plus);
        rec.inv_minus.push_back(e.inv_phi_minus);
        rec.interfaces.push_back(iface);
    }
    return rec;
}

// -- Hamiltonian structure ------------------------------------------------

double poisson_bracket_jump_form(const OneFormDensity &mt, const CotangentDualElement &e1, const CotangentDualElement &e2)
{
    require_shared(mt, e1.v, e2.v, "poisson bracket");
    const PiecewiseVector &v1 = e1.v.field();
    const PiecewiseVector &v2 = e2.v.field();
    double out = pairing(mt, reg_bracket(v1, v2).composite());
    if (!mt.iface()) return out;
    const BoundaryFunction j1 = jump(dot(mt.m, v1));
    const BoundaryFunction j2 = jump(dot(mt.m, v2));
    out += boundary_integral(or_zero(e2.n, mt.iface()) + j2, v1);
    out -= boundary_integral(or_zero(e1.n, mt.iface()) + j1, v2);
    return out;
}

double poisson_bracket_div_form(const OneFormDensity &mt, const CotangentDualElement &e1, const CotangentDualElement &e2)
{
    require_shared(mt, e1.v, e2.v, "poisson bracket");
    const PiecewiseVector &v1 = e1.v.field();
    const PiecewiseVector &v2 = e2.v.field();
    const ScalarField c = reg_curl2(mt.m).composite();
    const VectorField a = v1.composite(), b = v2.composite(), m = mt.composite();
    const ScalarField d1 = reg_div(v1).composite(), d2 = reg_div(v2).composite();
    ScalarField density(m.grid);
    for (std::size_t k = 0; k < density.size(); ++k) {
        density[k] = -c[k] * cross(a[k], b[k]) - d1[k] * dot(m[k], b[k]) + d2[k] * dot(m[k], a[k]);
    }
    double out = integrate(density);
    if (!mt.iface()) return out;
    out -= boundary_integral(or_zero(e1.n, mt.iface()), v2);
    out += boundary_integral(or_zero(e2.n, mt.iface()), v1);
    return out;
}

MechanicsRate hamiltonian_operator(const OneFormDensity &mt, const CotangentDualElement &e)
{
    if (mt.iface() != e.v.iface()) fail(ErrorKind::invalid_argument, "interface mismatch in hamiltonian operator");
    const PiecewiseVector &m = mt.m;
    const PiecewiseVector &pv = e.v.field();
    const PiecewiseScalar f = dot(m, pv);
    const PiecewiseScalar c = reg_curl2(m);
    const PiecewiseVector gf = reg_grad(f);
    const PiecewiseScalar dv = reg_div(pv);
    VectorField parts[2];
    for (Side s : {Side::plus, Side::minus}) {
        VectorField r = interior_curl(c.part(s), pv.part(s));
        r += gf.part(s);
        r += scale(dv.part(s), m.part(s));
        parts[s == Side::plus ? 0 : 1] = -1.0 * r;
    }
    OneFormDensity rate = make_density(assemble(mt.iface(), std::move(parts[0]), std::move(parts[1])));
    if (!mt.iface()) return {rate, {}};
    rate = rate - dual_anchor(jump(f) + or_zero(e.n, mt.iface()));
    return {rate, anchor(e.v)};
}

double dual_pairing(const CotangentDualElement &e, const MechanicsRate &rate)
{
    return pairing(rate.momentum, e.v) + boundary_pairing(or_zero(e.n, e.v.iface()), rate.interface);
}

} // namespace greg
