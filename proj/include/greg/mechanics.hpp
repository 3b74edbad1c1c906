#pragma once

#include <vector>

#include "greg/algebroid.hpp"
#include "greg/groupoid.hpp"

namespace greg {

/// -[v.grad m + (grad v)^T m + m div v] for a smooth covector m.
VectorField epdiff_rhs(const VectorField &m, const VectorField &v);
/// The same rate written as -(i_v dm + d(i_v m) + div(v) m).
VectorField epdiff_rhs_density(const VectorField &m, const VectorField &v);

/// Momentum rate and interface normal speed.
struct MechanicsRate {
    OneFormDensity momentum;
    BoundaryFunction interface;
};

/// -[i_v d^R m + 1/2 d^R(i_v m) + 1/2 div^R(v) m] per side; interface rate is
/// the anchor of v. In 2D i_v dm = curl2(m) * (-v_y, v_x).
MechanicsRate euler_arnold_rhs(const OneFormDensity &mt, const DVectField &v);

struct MomentumTrajectory {
    std::vector<double> times;
    std::vector<OneFormDensity> momenta;
    std::vector<InterfacePtr> interfaces;
    std::vector<DVectField> velocities;
};

/// 1/2 <m, I^-1 m>.
double hamiltonian(const OneFormDensity &mt, const DVectField &v);
double hamiltonian(const OneFormDensity &mt, const InertiaOperator &op);

enum class ShootEquation {
    euler_arnold,
    /// Full-coefficient EPDiff; smooth mode only.
    epdiff,
};

/// RK2 (midpoint) integration over unit time. With an interface the level set
/// is advected by the anchor velocity and the momentum parts are re-extended
/// onto the moved masks after every stage.
MomentumTrajectory shoot(const OneFormDensity &m0, int steps, const InertiaOperator &op,
                         ShootEquation eq = ShootEquation::euler_arnold);

/// Integrates d/dt phi = v(t, phi) over unit time with one step per entry.
/// Each side uses its own extended velocity; the interface follows the
/// average velocity. The grid is taken from the velocities.
GroupoidElement flow_integrate(const std::vector<DVectField> &velocities, InterfacePtr gamma0);

/// flow_integrate keeping the inverse maps and interfaces before every step
/// (entries 0..N), as needed by the registration adjoint.
struct FlowRecord {
    GroupoidElement element;
    std::vector<VectorField> inv_plus;
    std::vector<VectorField> inv_minus;
    std::vector<InterfacePtr> interfaces;
};
FlowRecord flow_integrate_recorded(const std::vector<DVectField> &velocities, InterfacePtr gamma0);

// -- Hamiltonian structure ------------------------------------------------

struct CotangentDualElement {
    DVectField v;
    BoundaryFunction n;
};

double poisson_bracket_jump_form(const OneFormDensity &mt, const CotangentDualElement &e1, const CotangentDualElement &e2);
double poisson_bracket_div_form(const OneFormDensity &mt, const CotangentDualElement &e1, const CotangentDualElement &e2);
MechanicsRate hamiltonian_operator(const OneFormDensity &mt, const CotangentDualElement &e);
/// <e, rate>: domain pairing of the momentum part plus the boundary pairing
/// of n against the interface rate.
double dual_pairing(const CotangentDualElement &e, const MechanicsRate &rate);

} // namespace greg
