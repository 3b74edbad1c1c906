#pragma once

#include "greg/interface.hpp"

namespace greg {

/// Momentum m (x) mu. The density weight is kept as a separate field but is
/// always the Lebesgue weight 1 here.
struct OneFormDensity {
    PiecewiseVector m;
    ScalarField density_weight;

    const Grid2 &grid() const { return m.grid(); }
    const InterfacePtr &iface() const { return m.iface; }
    VectorField composite() const { return m.composite(); }
    double max_norm() const { return m.composite().max_norm(); }
};

OneFormDensity make_density(PiecewiseVector m);
/// Splits a composite covector along `iface` (may be null).
OneFormDensity density_from_composite(InterfacePtr iface, const VectorField &m);
OneFormDensity zero_density(const Grid2 &g, InterfacePtr iface);

OneFormDensity operator+(const OneFormDensity &a, const OneFormDensity &b);
OneFormDensity operator-(const OneFormDensity &a, const OneFormDensity &b);
OneFormDensity operator*(double s, const OneFormDensity &a);

struct InertiaOperator {
    enum class Kind { gaussian_kernel, helmholtz };

    Kind kind = Kind::gaussian_kernel;
    double sigma = 0.05;
    double alpha = 0.01;
    double gamma = 1.0;
    int order = 1;
    /// Apply per subdomain when an interface is present. When false the
    /// kernel ignores the interface; results are still projected.
    bool regularized = true;
    double cg_tol = 1e-10;
    int cg_max_iter = 5000;

    static InertiaOperator gaussian(double sigma);
    static InertiaOperator helmholtz(double alpha, double gamma, int order);
    void validate() const;
};

/// The operator pair for one grid and interface, on composite fields.
/// `to_velocity` is the smoothing direction (momentum to velocity) and
/// `to_momentum` its inverse on the admissible subspace. Both are symmetric
/// for the trapezoid-weighted pairing.
class InertiaSolver {
public:
    InertiaSolver(const InertiaOperator &op, const Grid2 &g, InterfacePtr iface);

    VectorField to_velocity(const VectorField &m) const;
    VectorField to_momentum(const VectorField &v) const;
    /// Normal-continuity projection on composites (identity without interface).
    VectorField project(const VectorField &v) const;

    const InterfacePtr &iface() const { return iface_; }
    const Grid2 &grid() const { return grid_; }

private:
    VectorField gaussian_apply(const VectorField &m) const;
    VectorField helmholtz_apply(const VectorField &v) const;
    VectorField conjugate_gradient(const std::function<VectorField(const VectorField &)> &op, const VectorField &rhs) const;

    InertiaOperator op_;
    Grid2 grid_;
    InterfacePtr iface_;
    bool split_ = false;
    SeparableOperator kernel_;
    // Per side: chi_s / sqrt(D_s), with D_s the fraction of kernel mass on side s.
    ScalarField scale_plus_;
    ScalarField scale_minus_;
};

/// Integral of m . v over the domain using the composite fields.
double pairing(const OneFormDensity &mt, const VectorField &v);
double pairing(const OneFormDensity &mt, const DVectField &v);
/// Trapezoid-weighted pairing of two composite fields.
double weighted_dot(const VectorField &a, const VectorField &b);

OneFormDensity apply_inertia(const InertiaOperator &op, const DVectField &v);
DVectField invert_inertia(const InertiaOperator &op, const OneFormDensity &mt);
double metric(const DVectField &u, const DVectField &v, const InertiaOperator &op);
double kinetic_energy(const DVectField &v, const InertiaOperator &op);

/// (a . grad) b per side.
VectorField advect(const VectorField &a, const VectorField &b);
/// [u, v] = (u . grad) v - (v . grad) u on each side.
PiecewiseVector reg_bracket(const PiecewiseVector &u, const PiecewiseVector &v);

/// Discrete adjoint of reg_div: pairing(t_operator(f), v) equals the
/// quadrature of div^R(v) f for every v whose parts are the one-sided
/// extensions of its composite.
OneFormDensity t_operator(const PiecewiseScalar &f);

/// Dual of the anchor: pairing(dual_anchor(n), v) approximates
/// boundary_integral(n, v) for admissible v.
OneFormDensity dual_anchor(const BoundaryFunction &n);
/// The same construction from an explicit step profile h (any h whose jump
/// is -n for the sample-normal orientation used here).
OneFormDensity dual_anchor_from_profile(const PiecewiseScalar &h);

} // namespace greg
