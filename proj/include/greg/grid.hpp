#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "greg/error.hpp"

namespace greg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 &operator+=(const Vec2 &o) { x += o.x; y += o.y; return *this; }
    Vec2 &operator-=(const Vec2 &o) { x -= o.x; y -= o.y; return *this; }
    Vec2 &operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }
inline Vec2 operator-(const Vec2 &a) { return {-a.x, -a.y}; }
inline double dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2 &a, const Vec2 &b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2 &a) { return std::hypot(a.x, a.y); }
inline Vec2 perp(const Vec2 &a) { return {-a.y, a.x}; }

/// Regular node-centred grid. Node (i, j) sits at origin + (i*hx, j*hy);
/// storage is row-major with x fastest.
struct Grid2 {
    int nx = 0;
    int ny = 0;
    double hx = 1.0;
    double hy = 1.0;
    Vec2 origin{};

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    int col(std::size_t k) const { return static_cast<int>(k % nx); }
    int row(std::size_t k) const { return static_cast<int>(k / nx); }
    Vec2 node(int i, int j) const { return {origin.x + i * hx, origin.y + j * hy}; }
    Vec2 node(std::size_t k) const { return node(col(k), row(k)); }
    Vec2 extent() const { return {(nx - 1) * hx, (ny - 1) * hy}; }
    double hmax() const { return std::max(hx, hy); }
    double hmin() const { return std::min(hx, hy); }
    double diameter() const { return norm(extent()); }
    /// Trapezoid quadrature weight of a node (the discrete volume form).
    double weight(int i, int j) const
    {
        const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
        const double wy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
        return wx * wy * hx * hy;
    }
    double weight(std::size_t k) const { return weight(col(k), row(k)); }

    bool operator==(const Grid2 &o) const
    {
        return nx == o.nx && ny == o.ny && hx == o.hx && hy == o.hy && origin.x == o.origin.x &&
               origin.y == o.origin.y;
    }
};

Grid2 make_grid(int nx, int ny, Vec2 extent = {1.0, 1.0}, Vec2 origin = {0.0, 0.0});

void require_same_grid(const Grid2 &a, const Grid2 &b, const char *what);

struct ScalarField {
    Grid2 grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const Grid2 &g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    ScalarField(const Grid2 &g, std::vector<double> v);

    static ScalarField from_function(const Grid2 &g, const std::function<double(Vec2)> &f);

    double &operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
    double &at(int i, int j) { return values[grid.index(i, j)]; }
    double at(int i, int j) const { return values[grid.index(i, j)]; }
    std::size_t size() const { return values.size(); }

    ScalarField &operator+=(const ScalarField &o);
    ScalarField &operator-=(const ScalarField &o);
    ScalarField &operator*=(double s);
    double max_abs() const;
    bool all_finite() const;
};

ScalarField operator+(ScalarField a, const ScalarField &b);
ScalarField operator-(ScalarField a, const ScalarField &b);
ScalarField operator*(double s, ScalarField a);
ScalarField hadamard(const ScalarField &a, const ScalarField &b);

/// Two-component field. Used both for vector fields and, with covariant
/// meaning, for 1-forms (the flat metric makes the components coincide).
struct VectorField {
    Grid2 grid;
    std::vector<double> x;
    std::vector<double> y;

    VectorField() = default;
    explicit VectorField(const Grid2 &g, Vec2 fill = {}) : grid(g), x(g.size(), fill.x), y(g.size(), fill.y) {}
    VectorField(const ScalarField &fx, const ScalarField &fy);

    static VectorField from_function(const Grid2 &g, const std::function<Vec2(Vec2)> &f);
    /// Position map of the identity deformation.
    static VectorField identity_map(const Grid2 &g);

    Vec2 operator[](std::size_t k) const { return {x[k], y[k]}; }
    void set(std::size_t k, Vec2 v) { x[k] = v.x; y[k] = v.y; }
    std::size_t size() const { return x.size(); }
    ScalarField component(int c) const { return ScalarField(grid, c == 0 ? x : y); }

    VectorField &operator+=(const VectorField &o);
    VectorField &operator-=(const VectorField &o);
    VectorField &operator*=(double s);
    double max_norm() const;
    bool all_finite() const;
};

VectorField operator+(VectorField a, const VectorField &b);
VectorField operator-(VectorField a, const VectorField &b);
VectorField operator*(double s, VectorField a);
/// Pointwise a·b.
ScalarField dot(const VectorField &a, const VectorField &b);
VectorField scale(const ScalarField &s, const VectorField &v);

// -- interpolation --------------------------------------------------------

/// Bilinear stencil of a (clamped) point: four node indices and weights, plus
/// the derivative of each weight with respect to the query point. Derivatives
/// vanish along a clamped coordinate.
struct BilinearStencil {
    std::array<std::size_t, 4> idx{};
    std::array<double, 4> w{};
    std::array<double, 4> dwdx{};
    std::array<double, 4> dwdy{};
};

BilinearStencil bilinear_stencil(const Grid2 &g, Vec2 p);

double interp(const ScalarField &f, Vec2 p);
Vec2 interp(const VectorField &f, Vec2 p);
std::vector<double> interp(const ScalarField &f, std::span<const Vec2> points);
std::vector<Vec2> interp(const VectorField &f, std::span<const Vec2> points);
/// Gradient of the bilinear interpolant at p.
Vec2 interp_gradient(const ScalarField &f, Vec2 p);

// -- stencils -------------------------------------------------------------

/// d/dx with central differences inside and second-order one-sided rows at
/// the outer boundary. `transpose` applies the adjoint matrix (plain sum).
ScalarField diff_x(const ScalarField &f);
ScalarField diff_y(const ScalarField &f);
ScalarField diff_x_transpose(const ScalarField &g);
ScalarField diff_y_transpose(const ScalarField &g);

VectorField gradient(const ScalarField &f);
ScalarField divergence(const VectorField &v);
/// Scalar exterior derivative of a 1-form in 2D: d/dx m_y - d/dy m_x.
ScalarField curl2(const VectorField &m);
/// Composite-weighted Laplacian div(grad f).
ScalarField laplacian(const ScalarField &f);

/// Trapezoid rule: sum of f times node weights.
double integrate(const ScalarField &f);
double integrate_product(const ScalarField &a, const ScalarField &b);
ScalarField node_weights(const Grid2 &g);

// -- separable linear operators ------------------------------------------

/// Dense separable operator acting as F -> Ay * F * Ax^T on a field stored
/// row-major (rows = y). Used for Gaussian smoothing in both the inertia
/// kernel and local statistics.
class SeparableOperator {
public:
    SeparableOperator() = default;
    SeparableOperator(const Grid2 &g, std::vector<double> ax, std::vector<double> ay);

    ScalarField apply(const ScalarField &f) const;
    ScalarField apply_transpose(const ScalarField &f) const;
    VectorField apply(const VectorField &v) const;
    const Grid2 &grid() const { return grid_; }

private:
    ScalarField run(const ScalarField &f, bool transpose) const;

    Grid2 grid_;
    std::vector<double> ax_;
    std::vector<double> ay_;
};

/// Quadrature of the convolution with an area-normalised Gaussian of std
/// `sigma` (domain units): (K W f)(x_i) = sum_j G(x_i - x_j) w_j f_j.
SeparableOperator gaussian_quadrature_operator(const Grid2 &g, double sigma);
/// Row-normalised Gaussian smoothing with std given in pixels.
SeparableOperator gaussian_smoother(const Grid2 &g, double sigma_px);

} // namespace greg
