#include "greg/groupoid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>


namespace greg {

GroupoidElement identity_element(const InterfacePtr &gamma)
{
    if (!gamma) fail(ErrorKind::invalid_argument, "identity element needs an interface or a grid");
    GroupoidElement e = identity_element(gamma->grid());
    e.gamma_src = gamma;
    e.gamma_trg = gamma;
    return e;
}

GroupoidElement identity_element(const Grid2 &g)
{
    const VectorField id = VectorField::identity_map(g);
    return {g, nullptr, nullptr, id, id, id, id};
}

GroupoidElement make_element(InterfacePtr src, InterfacePtr trg, VectorField phi_plus, VectorField phi_minus)
{
    if (static_cast<bool>(src) != static_cast<bool>(trg)) fail(ErrorKind::invalid_argument, "element needs both interfaces or neither");
    const Grid2 g = phi_plus.grid;
    require_same_grid(g, phi_minus.grid, "groupoid element");
    VectorField ip = invert_map(phi_plus);
    VectorField im = src ? invert_map(phi_minus) : ip;
    if (!src) phi_minus = phi_plus;
    return {g, std::move(src), std::move(trg), std::move(phi_plus), std::move(phi_minus), std::move(ip), std::move(im)};
}

GroupoidElement compose(const GroupoidElement &g2, const GroupoidElement &g1)
{
    require_same_grid(g1.grid, g2.grid, "compose");
    if (g1.smooth() != g2.smooth()) fail(ErrorKind::invalid_argument, "non-composable arrows");
    if (!g1.smooth() && g1.gamma_trg != g2.gamma_src && band_distance(*g1.gamma_trg, *g2.gamma_src) > g1.grid.hmax())
        fail(ErrorKind::invalid_argument, "non-composable arrows");
    GroupoidElement out;
    out.grid = g1.grid;
    out.gamma_src = g1.gamma_src;
    out.gamma_trg = g2.gamma_trg;
    out.phi_plus = compose_maps(g2.phi_plus, g1.phi_plus);
    out.inv_phi_plus = compose_maps(g1.inv_phi_plus, g2.inv_phi_plus);
    if (out.smooth()) {
        out.phi_minus = out.phi_plus;
        out.inv_phi_minus = out.inv_phi_plus;
    } else {
        out.phi_minus = compose_maps(g2.phi_minus, g1.phi_minus);
        out.inv_phi_minus = compose_maps(g1.inv_phi_minus, g2.inv_phi_minus);
    }
    return out;
}

GroupoidElement inverse(const GroupoidElement &g)
{
    return {g.grid, g.gamma_trg, g.gamma_src, g.inv_phi_plus, g.inv_phi_minus, g.phi_plus, g.phi_minus};
}

ScalarField act_on_image(const GroupoidElement &g, const ScalarField &image)
{
    require_same_grid(g.grid, image.grid, "act_on_image");
    ScalarField out(g.grid);
    const std::vector<Side> *side = g.smooth() ? nullptr : &g.gamma_trg->masks().side;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const VectorField &m = (side && (*side)[k] == Side::minus) ? g.inv_phi_minus : g.inv_phi_plus;
        out[k] = interp(image, m[k]);
    }
    return out;
}

// -- map primitives -------------------------------------------------------

VectorField compose_maps(const VectorField &outer, const VectorField &inner)
{
    require_same_grid(outer.grid, inner.grid, "map composition");
    const Grid2 &g = outer.grid;
    const VectorField u = outer - VectorField::identity_map(g);
    VectorField out(g);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const Vec2 p = inner[k];
        out.set(k, p + interp(u, p));
    }
    return out;
}

VectorField invert_map(const VectorField &map, double tol_rel, int max_iter)
{
    const Grid2 &g = map.grid;
    const VectorField id = VectorField::identity_map(g);
    const VectorField u = map - id;
    VectorField uinv = -1.0 * u;
    const double tol = tol_rel * g.diameter();
    double res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        res = 0.0;
        VectorField next(g);
        for (std::size_t k = 0; k < next.size(); ++k) {
            const Vec2 y = id[k];
            const Vec2 val = -interp(u, y + uinv[k]);
            res = std::max(res, norm(val - uinv[k]));
            next.set(k, val);
        }
        uinv = std::move(next);
        if (res <= tol) return id + uinv;
    }
    std::ostringstream msg;
    msg << "map inversion did not converge: residual " << res;
    fail(ErrorKind::numerical, msg.str());
}

VectorField inverse_step(const VectorField &psi, const VectorField &v, double dt)
{
    require_same_grid(psi.grid, v.grid, "inverse map step");
    const Grid2 &g = psi.grid;
    const VectorField u = psi - VectorField::identity_map(g);
    VectorField out(g);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const Vec2 q = g.node(k) - dt * v[k];
        out.set(k, q + interp(u, q));
    }
    return out;
}

VectorField forward_step(const VectorField &phi, const VectorField &v, double dt)
{
    require_same_grid(phi.grid, v.grid, "forward map step");
    VectorField out(phi.grid);
    for (std::size_t k = 0; k < out.size(); ++k) out.set(k, phi[k] + dt * interp(v, phi[k]));
    return out;
}

ScalarField jacobian_determinant(const VectorField &map)
{
    const ScalarField ax = diff_x(map.component(0)), ay = diff_y(map.component(0));
    const ScalarField bx = diff_x(map.component(1)), by = diff_y(map.component(1));
    ScalarField out(map.grid);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = ax[k] * by[k] - ay[k] * bx[k];
    return out;
}

ElementDiagnostics diagnose(const GroupoidElement &g)
{
    ElementDiagnostics d;
    d.min_jacobian_forward = std::numeric_limits<double>::infinity();
    d.min_jacobian_inverse = std::numeric_limits<double>::infinity();
    for (Side s : {Side::plus, Side::minus}) {
        const ScalarField jf = jacobian_determinant(g.forward(s));
        const ScalarField ji = jacobian_determinant(g.inverse(s));
        for (std::size_t k = 0; k < g.grid.size(); ++k) {
            if (g.smooth() || g.gamma_src->masks().side[k] == s) d.min_jacobian_forward = std::min(d.min_jacobian_forward, jf[k]);
            if (g.smooth() || g.gamma_trg->masks().side[k] == s) d.min_jacobian_inverse = std::min(d.min_jacobian_inverse, ji[k]);
        }
        if (g.smooth()) break;
    }
    if (g.smooth()) return d;

    const double h = g.grid.hmax();
    std::size_t total = 0, good = 0;
    for (std::size_t k = 0; k < g.grid.size(); ++k) {
        const Side s = g.gamma_src->masks().side[k];
        const double level = interp(g.gamma_trg->sdf(), g.forward(s)[k]);
        const double signed_level = s == Side::plus ? level : -level;
        ++total;
        if (signed_level >= -h) ++good;
    }
    d.side_consistency = static_cast<double>(good) / static_cast<double>(total);
    for (const auto &smp : g.gamma_src->samples()) {
        for (Side s : {Side::plus, Side::minus}) {
            const Vec2 p = interp(g.forward(s), smp.point);
            d.boundary_distance = std::max(d.boundary_distance, std::abs(interp(g.gamma_trg->sdf(), p)));
        }
    }
    return d;
}

double map_distance(const GroupoidElement &a, const GroupoidElement &b)
{
    require_same_grid(a.grid, b.grid, "map distance");
    double d = 0.0;
    for (Side s : {Side::plus, Side::minus}) {
        for (std::size_t k = 0; k < a.grid.size(); ++k) {
            if (!a.smooth() && a.gamma_src->masks().side[k] != s) continue;
            d = std::max(d, norm(a.forward(s)[k] - b.forward(s)[k]));
        }
        for (std::size_t k = 0; k < a.grid.size(); ++k) {
            if (!a.smooth() && a.gamma_trg->masks().side[k] != s) continue;
            d = std::max(d, norm(a.inverse(s)[k] - b.inverse(s)[k]));
        }
    }
    return d;
}

} // namespace greg
