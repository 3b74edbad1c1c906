#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "greg/grid.hpp"

namespace greg {

enum class Side { plus, minus };

inline Side opposite(Side s) { return s == Side::plus ? Side::minus : Side::plus; }

/// Midpoint of one zero-level-set segment. `normal` is unit length and
/// points into D+.
struct BoundarySample {
    Vec2 point;
    double weight = 0.0;
    Vec2 normal;
};

/// Characteristic functions of D+ and D-. Nodes with sdf == 0 belong to D+.
struct RegionMasks {
    ScalarField chi_plus;
    ScalarField chi_minus;
    std::vector<Side> side;

    std::size_t count(Side s) const;
    const ScalarField &chi(Side s) const { return s == Side::plus ? chi_plus : chi_minus; }
};

using SparseRow = std::vector<std::pair<std::size_t, double>>;

/// Ordered linear fill of the nodes outside one side from the nodes inside
/// it. Applying the steps in order overwrites every off-side node.
struct ExtensionPlan {
    struct Step {
        std::size_t target;
        SparseRow sources;
    };
    Side side = Side::plus;
    std::vector<Step> steps;

    void apply(std::vector<double> &values) const;
    /// Adjoint of `apply` for the plain Euclidean inner product on nodes.
    void apply_transpose(std::vector<double> &adjoint) const;
};

/// One-sided trace functionals: the trace of a field from side s at sample k
/// is sum over rows[k] of weight * value (affine least-squares fit on side
/// nodes near the sample, exact for affine data).
struct TraceStencils {
    std::vector<SparseRow> plus;
    std::vector<SparseRow> minus;
    const std::vector<SparseRow> &rows(Side s) const { return s == Side::plus ? plus : minus; }
};

/// The sliding hypersurface as a signed-distance level set on the grid.
/// Instances are immutable and shared through InterfacePtr; derived data that
/// is expensive to build (extension plans, the normal-jump projector) is
/// computed on first use.
class Interface {
public:
    struct Projector;

    const Grid2 &grid() const { return sdf_.grid; }
    const ScalarField &sdf() const { return sdf_; }
    const VectorField &normals() const { return normals_; }
    const std::vector<std::size_t> &band() const { return band_; }
    const std::vector<BoundarySample> &samples() const { return samples_; }
    double band_width() const { return band_width_; }
    const RegionMasks &masks() const { return masks_; }
    const TraceStencils &traces() const { return traces_; }
    double length() const;

    const ExtensionPlan &extension(Side s) const;
    const Projector &projector() const;

    Interface(ScalarField sdf, VectorField normals, std::vector<std::size_t> band, std::vector<BoundarySample> samples,
              double band_width, RegionMasks masks, TraceStencils traces);
    ~Interface();
    Interface(const Interface &) = delete;
    Interface &operator=(const Interface &) = delete;

private:
    ScalarField sdf_;
    VectorField normals_;
    std::vector<std::size_t> band_;
    std::vector<BoundarySample> samples_;
    double band_width_;
    RegionMasks masks_;
    TraceStencils traces_;

    mutable std::once_flag ext_once_[2];
    mutable std::unique_ptr<ExtensionPlan> ext_[2];
    mutable std::once_flag proj_once_;
    mutable std::unique_ptr<Projector> proj_;
};

using InterfacePtr = std::shared_ptr<const Interface>;

/// Builds an interface from any level set that changes sign: extracts the zero
/// contour by marching squares, redistances to the exact distance from that
/// polyline, and precomputes trace stencils. band_width <= 0 selects
/// 4 * max(hx, hy).
InterfacePtr build_interface(const ScalarField &level_set, double band_width = 0.0);
/// Label image (label > 0 means D+) to interface.
InterfacePtr interface_from_labels(const ScalarField &labels, double band_width = 0.0);

RegionMasks masks(const Interface &iface);

/// Max over the narrow band of |sdf_a - sdf_b|.
double band_distance(const Interface &a, const Interface &b);

// -- piecewise fields -----------------------------------------------------

/// chi+ * plus + chi- * minus. Both parts are defined on the full grid (each
/// is the extension of the field that is smooth on its side). A null
/// interface means the smooth case and then minus mirrors plus.
template <class Field>
struct Piecewise {
    InterfacePtr iface;
    Field plus;
    Field minus;

    const Grid2 &grid() const { return plus.grid; }
    bool smooth() const { return !iface; }
    const Field &part(Side s) const { return s == Side::plus ? plus : minus; }
    Field &part(Side s) { return s == Side::plus ? plus : minus; }
    Field composite() const;
};

template <>
ScalarField Piecewise<ScalarField>::composite() const;
template <>
VectorField Piecewise<VectorField>::composite() const;

using PiecewiseScalar = Piecewise<ScalarField>;
using PiecewiseVector = Piecewise<VectorField>;

PiecewiseScalar make_piecewise(InterfacePtr iface, ScalarField plus, ScalarField minus);
PiecewiseVector make_piecewise(InterfacePtr iface, VectorField plus, VectorField minus);
PiecewiseScalar smooth_piecewise(ScalarField f);
PiecewiseVector smooth_piecewise(VectorField f);
/// Splits a composite field along the interface and extends each side.
PiecewiseScalar from_composite(InterfacePtr iface, const ScalarField &composite);
PiecewiseVector from_composite(InterfacePtr iface, const VectorField &composite);
/// Re-reads each part on the masks of a new interface and re-extends.
PiecewiseScalar reextend(const PiecewiseScalar &f, InterfacePtr iface);
PiecewiseVector reextend(const PiecewiseVector &f, InterfacePtr iface);

PiecewiseScalar operator+(const PiecewiseScalar &a, const PiecewiseScalar &b);
PiecewiseVector operator+(const PiecewiseVector &a, const PiecewiseVector &b);
PiecewiseVector operator-(const PiecewiseVector &a, const PiecewiseVector &b);
PiecewiseScalar operator*(double s, PiecewiseScalar a);
PiecewiseVector operator*(double s, PiecewiseVector a);
/// Per-side pointwise products.
PiecewiseScalar dot(const PiecewiseVector &a, const PiecewiseVector &b);
PiecewiseVector scale(const PiecewiseScalar &s, const PiecewiseVector &v);

/// Keeps the values of `field` on side nodes and fills every other node by
/// extrapolation along the distance function (linear for the first layers,
/// then constant).
ScalarField one_sided_extend(const ScalarField &field, const Interface &iface, Side side);
VectorField one_sided_extend(const VectorField &field, const Interface &iface, Side side);

// -- boundary functions and traces ---------------------------------------

/// A scalar per boundary sample; arclength density is carried by the sample
/// weights.
struct BoundaryFunction {
    InterfacePtr iface;
    std::vector<double> values;

    BoundaryFunction &operator*=(double s);
};

BoundaryFunction operator+(BoundaryFunction a, const BoundaryFunction &b);
BoundaryFunction operator-(BoundaryFunction a, const BoundaryFunction &b);
BoundaryFunction operator*(double s, BoundaryFunction a);
BoundaryFunction boundary_constant(InterfacePtr iface, double c);

std::vector<double> trace(const Interface &iface, const ScalarField &composite, Side side);
std::vector<Vec2> trace(const Interface &iface, const VectorField &composite, Side side);

BoundaryFunction jump(const PiecewiseScalar &f);

PiecewiseVector reg_grad(const PiecewiseScalar &f);
PiecewiseScalar reg_div(const PiecewiseVector &v);
PiecewiseScalar reg_curl2(const PiecewiseVector &m);

/// Sum over samples of g * (v . n) * weight. A piecewise v contributes the
/// average of its two normal traces.
double boundary_integral(const BoundaryFunction &g, const VectorField &v);
double boundary_integral(const BoundaryFunction &g, const PiecewiseVector &v);

/// Normal component of the jump of v at each sample: n . (v+|G - v-|G).
std::vector<double> normal_jump(const PiecewiseVector &v);

// -- the fiber of admissible velocities ------------------------------------

/// A piecewise vector field whose normal traces agree on both sides of the
/// interface (an element of the algebroid fiber over that interface).
class DVectField {
public:
    DVectField() = default;
    /// Wraps a field already known to be admissible (for instance a linear
    /// combination of admissible fields). No check is made.
    static DVectField assume_admissible(PiecewiseVector v) { return DVectField(std::move(v)); }
    static DVectField zero(const Grid2 &g, InterfacePtr iface);

    const PiecewiseVector &field() const { return v_; }
    const InterfacePtr &iface() const { return v_.iface; }
    const Grid2 &grid() const { return v_.grid(); }
    bool smooth() const { return v_.smooth(); }
    VectorField composite() const { return v_.composite(); }
    double max_norm() const;

    DVectField &operator+=(const DVectField &o);
    DVectField &operator*=(double s);

private:
    explicit DVectField(PiecewiseVector v) : v_(std::move(v)) {}
    PiecewiseVector v_;
};

DVectField operator+(DVectField a, const DVectField &b);
DVectField operator-(DVectField a, const DVectField &b);
DVectField operator*(double s, DVectField a);

/// Orthogonal projection (for the trapezoid-weighted L2 pairing) onto fields
/// with continuous normal traces. Tangential jumps pass through.
DVectField project_normal_continuity(const PiecewiseVector &v);
/// Adjoint-consistent helper: the same projection applied to a composite
/// field already split along the interface.
VectorField project_composite(const Interface &iface, const VectorField &composite);

/// Normal velocity of the interface: per sample n . (average trace).
BoundaryFunction anchor(const DVectField &v);

/// Extension of boundary values to every node: the value at the foot point
/// along the normal, smoothed over nearby samples.
ScalarField extend_boundary_values(const BoundaryFunction &n);

/// Velocity used to move the level set: the anchor (normal speed) extended
/// off the curve, times the level-set normal. Tangential motion does not move
/// the curve, and leaving it out keeps the shear of a sliding field from
/// wrinkling the level set.
VectorField interface_velocity(const DVectField &v);

/// Semi-Lagrangian level-set step followed by redistancing.
InterfacePtr advect_interface(const Interface &iface, const DVectField &v, double dt);
InterfacePtr advect_interface(const Interface &iface, const VectorField &velocity, double dt);

} // namespace greg
