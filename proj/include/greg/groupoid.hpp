#pragma once

#include "greg/interface.hpp"

namespace greg {

/// An arrow (src, trg, phi+, phi-) of the discontinuous diffeomorphism
/// groupoid. Maps are stored as full-grid position maps; phi_s is meaningful on
/// side s of gamma_src and inv_phi_s on side s of gamma_trg, and both are
/// extended beyond their side. Null interfaces mean an ordinary (smooth)
/// diffeomorphism, in which case the minus maps mirror the plus maps.
struct GroupoidElement {
    Grid2 grid;
    InterfacePtr gamma_src;
    InterfacePtr gamma_trg;
    VectorField phi_plus;
    VectorField phi_minus;
    VectorField inv_phi_plus;
    VectorField inv_phi_minus;

    bool smooth() const { return !gamma_src; }
    const VectorField &forward(Side s) const { return s == Side::plus ? phi_plus : phi_minus; }
    const VectorField &inverse(Side s) const { return s == Side::plus ? inv_phi_plus : inv_phi_minus; }
};

GroupoidElement identity_element(const InterfacePtr &gamma);
GroupoidElement identity_element(const Grid2 &g);

/// Builds an element from forward maps only; inverses are computed by
/// fixed-point iteration.
GroupoidElement make_element(InterfacePtr src, InterfacePtr trg, VectorField phi_plus, VectorField phi_minus);

/// g2 after g1. Requires trg(g1) and src(g2) to agree within h on the band.
GroupoidElement compose(const GroupoidElement &g2, const GroupoidElement &g1);
/// Swaps the cached forward and inverse maps together with src and trg.
GroupoidElement inverse(const GroupoidElement &g);

/// I*(x) = I(inv_phi_s(x)) with s the side of x with respect to gamma_trg.
ScalarField act_on_image(const GroupoidElement &g, const ScalarField &image);

// -- map primitives -------------------------------------------------------

/// outer(inner(x)), interpolating the displacement of `outer`.
VectorField compose_maps(const VectorField &outer, const VectorField &inner);
/// Fixed-point inverse u_inv = -u o (id + u_inv); fails if the residual stays
/// above tol_rel * diameter after max_iter sweeps.
VectorField invert_map(const VectorField &map, double tol_rel = 1e-6, int max_iter = 50);
/// One backward-characteristic step of an inverse map: psi(y - dt v(y)).
VectorField inverse_step(const VectorField &psi, const VectorField &v, double dt);
/// One explicit Euler step of a forward map: phi + dt v(phi).
VectorField forward_step(const VectorField &phi, const VectorField &v, double dt);
ScalarField jacobian_determinant(const VectorField &map);

struct ElementDiagnostics {
    double min_jacobian_forward = 0.0;  // over source side nodes
    double min_jacobian_inverse = 0.0;  // over target side nodes
    double side_consistency = 1.0;      // fraction of source side nodes landing on their side of trg (margin h)
    double boundary_distance = 0.0;     // max distance of pushed-forward src samples to trg
};

ElementDiagnostics diagnose(const GroupoidElement &g);
/// Sup over the grid of the difference of the maps of a and b on matching sides.
double map_distance(const GroupoidElement &a, const GroupoidElement &b);

} // namespace greg
