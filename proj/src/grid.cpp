#include "greg/grid.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

#include "greg/parallel.hpp"

namespace greg {

Grid2 make_grid(int nx, int ny, Vec2 extent, Vec2 origin)
{
    if (nx < 4 || ny < 4) {
        std::ostringstream os;
        os << "degenerate dimension: grid must be at least 4x4, got " << nx << "x" << ny;
        fail(ErrorKind::invalid_argument, os.str());
    }
    if (!(extent.x > 0.0) || !(extent.y > 0.0)) fail(ErrorKind::invalid_argument, "degenerate dimension: extent must be positive");
    Grid2 g;
    g.nx = nx;
    g.ny = ny;
    g.hx = extent.x / (nx - 1);
    g.hy = extent.y / (ny - 1);
    g.origin = origin;
    return g;
}

void require_same_grid(const Grid2 &a, const Grid2 &b, const char *what)
{
    if (!(a == b)) fail(ErrorKind::invalid_argument, std::string("grid mismatch in ") + what);
}

// -- ScalarField ----------------------------------------------------------

ScalarField::ScalarField(const Grid2 &g, std::vector<double> v) : grid(g), values(std::move(v))
{
    if (values.size() != g.size()) fail(ErrorKind::invalid_argument, "scalar field size does not match grid");
}

ScalarField ScalarField::from_function(const Grid2 &g, const std::function<double(Vec2)> &f)
{
    ScalarField s(g);
    for (std::size_t k = 0; k < g.size(); ++k) s.values[k] = f(g.node(k));
    return s;
}

ScalarField &ScalarField::operator+=(const ScalarField &o)
{
    require_same_grid(grid, o.grid, "scalar add");
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
    return *this;
}

ScalarField &ScalarField::operator-=(const ScalarField &o)
{
    require_same_grid(grid, o.grid, "scalar subtract");
    for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
    return *this;
}

ScalarField &ScalarField::operator*=(double s)
{
    for (auto &v : values) v *= s;
    return *this;
}

double ScalarField::max_abs() const
{
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

bool ScalarField::all_finite() const
{
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ScalarField operator+(ScalarField a, const ScalarField &b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField &b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

ScalarField hadamard(const ScalarField &a, const ScalarField &b)
{
    require_same_grid(a.grid, b.grid, "hadamard");
    ScalarField r(a.grid);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = a[k] * b[k];
    return r;
}

// -- VectorField ----------------------------------------------------------

VectorField::VectorField(const ScalarField &fx, const ScalarField &fy) : grid(fx.grid), x(fx.values), y(fy.values)
{
    require_same_grid(fx.grid, fy.grid, "vector field components");
}

VectorField VectorField::from_function(const Grid2 &g, const std::function<Vec2(Vec2)> &f)
{
    VectorField v(g);
    for (std::size_t k = 0; k < g.size(); ++k) v.set(k, f(g.node(k)));
    return v;
}

VectorField VectorField::identity_map(const Grid2 &g)
{
    return from_function(g, [](Vec2 p) { return p; });
}

VectorField &VectorField::operator+=(const VectorField &o)
{
    require_same_grid(grid, o.grid, "vector add");
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] += o.x[k];
        y[k] += o.y[k];
    }
    return *this;
}

VectorField &VectorField::operator-=(const VectorField &o)
{
    require_same_grid(grid, o.grid, "vector subtract");
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] -= o.x[k];
        y[k] -= o.y[k];
    }
    return *this;
}

VectorField &VectorField::operator*=(double s)
{
    for (auto &v : x) v *= s;
    for (auto &v : y) v *= s;
    return *this;
}

double VectorField::max_norm() const
{
    double m = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::hypot(x[k], y[k]));
    return m;
}

bool VectorField::all_finite() const
{
    auto fin = [](double v) { return std::isfinite(v); };
    return std::all_of(x.begin(), x.end(), fin) && std::all_of(y.begin(), y.end(), fin);
}

VectorField operator+(VectorField a, const VectorField &b) { return a += b; }
VectorField operator-(VectorField a, const VectorField &b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

ScalarField dot(const VectorField &a, const VectorField &b)
{
    require_same_grid(a.grid, b.grid, "dot");
    ScalarField r(a.grid);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = a.x[k] * b.x[k] + a.y[k] * b.y[k];
    return r;
}

VectorField scale(const ScalarField &s, const VectorField &v)
{
    require_same_grid(s.grid, v.grid, "scale");
    VectorField r(v.grid);
    for (std::size_t k = 0; k < r.size(); ++k) {
        r.x[k] = s[k] * v.x[k];
        r.y[k] = s[k] * v.y[k];
    }
    return r;
}

// -- interpolation --------------------------------------------------------

namespace {

// Cell coordinate and fractional offset along one axis, clamped to the grid.
struct AxisCoord {
    int i0;
    double t;
    bool clamped;
};

AxisCoord axis_coord(double p, double origin, double h, int n)
{
    double s = (p - origin) / h;
    bool clamped = false;
    if (s <= 0.0) {
        clamped = s < 0.0;
        s = 0.0;
    } else if (s >= n - 1) {
        clamped = s > n - 1;
        s = n - 1;
    }
    int i0 = static_cast<int>(std::floor(s));
    if (i0 >= n - 1) i0 = n - 2;
    return {i0, s - i0, clamped};
}

} // namespace

BilinearStencil bilinear_stencil(const Grid2 &g, Vec2 p)
{
    const AxisCoord ax = axis_coord(p.x, g.origin.x, g.hx, g.nx);
    const AxisCoord ay = axis_coord(p.y, g.origin.y, g.hy, g.ny);
    BilinearStencil s;
    s.idx = {g.index(ax.i0, ay.i0), g.index(ax.i0 + 1, ay.i0), g.index(ax.i0, ay.i0 + 1),
             g.index(ax.i0 + 1, ay.i0 + 1)};
    const double tx = ax.t, ty = ay.t;
    s.w = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    const double sx = ax.clamped ? 0.0 : 1.0 / g.hx;
    const double sy = ay.clamped ? 0.0 : 1.0 / g.hy;
    s.dwdx = {-(1 - ty) * sx, (1 - ty) * sx, -ty * sx, ty * sx};
    s.dwdy = {-(1 - tx) * sy, -tx * sy, (1 - tx) * sy, tx * sy};
    return s;
}

double interp(const ScalarField &f, Vec2 p)
{
    const auto s = bilinear_stencil(f.grid, p);
    double v = 0.0;
    for (int q = 0; q < 4; ++q) v += s.w[q] * f.values[s.idx[q]];
    return v;
}

Vec2 interp(const VectorField &f, Vec2 p)
{
    const auto s = bilinear_stencil(f.grid, p);
    Vec2 v;
    for (int q = 0; q < 4; ++q) {
        v.x += s.w[q] * f.x[s.idx[q]];
        v.y += s.w[q] * f.y[s.idx[q]];
    }
    return v;
}

std::vector<double> interp(const ScalarField &f, std::span<const Vec2> points)
{
    std::vector<double> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) out[k] = interp(f, points[k]);
    return out;
}

std::vector<Vec2> interp(const VectorField &f, std::span<const Vec2> points)
{
    std::vector<Vec2> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) out[k] = interp(f, points[k]);
    return out;
}

Vec2 interp_gradient(const ScalarField &f, Vec2 p)
{
    const auto s = bilinear_stencil(f.grid, p);
    Vec2 d;
    for (int q = 0; q < 4; ++q) {
        d.x += s.dwdx[q] * f.values[s.idx[q]];
        d.y += s.dwdy[q] * f.values[s.idx[q]];
    }
    return d;
}

// -- stencils -------------------------------------------------------------

namespace {

// One row of the first-derivative matrix: (offset, coefficient) pairs.
struct Row3 {
    int off[3];
    double c[3];
    int n;
};

Row3 derivative_row(int i, int n, double h)
{
    if (i == 0) return {{0, 1, 2}, {-1.5 / h, 2.0 / h, -0.5 / h}, 3};
    if (i == n - 1) return {{0, -1, -2}, {1.5 / h, -2.0 / h, 0.5 / h}, 3};
    return {{1, -1, 0}, {0.5 / h, -0.5 / h, 0.0}, 2};
}

template <bool AlongX, bool Transpose>
ScalarField derivative(const ScalarField &f)
{
    const Grid2 &g = f.grid;
    ScalarField out(g);
    const int n = AlongX ? g.nx : g.ny;
    const double h = AlongX ? g.hx : g.hy;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int a = AlongX ? i : j;
            const Row3 r = derivative_row(a, n, h);
            for (int q = 0; q < r.n; ++q) {
                const int b = a + r.off[q];
                const std::size_t kb = AlongX ? g.index(b, j) : g.index(i, b);
                const std::size_t ka = g.index(i, j);
                if constexpr (Transpose)
                    out.values[kb] += r.c[q] * f.values[ka];
                else
                    out.values[ka] += r.c[q] * f.values[kb];
            }
        }
    }
    return out;
}

} // namespace

ScalarField diff_x(const ScalarField &f) { return derivative<true, false>(f); }
ScalarField diff_y(const ScalarField &f) { return derivative<false, false>(f); }
ScalarField diff_x_transpose(const ScalarField &g) { return derivative<true, true>(g); }
ScalarField diff_y_transpose(const ScalarField &g) { return derivative<false, true>(g); }

VectorField gradient(const ScalarField &f) { return VectorField(diff_x(f), diff_y(f)); }

ScalarField divergence(const VectorField &v)
{
    return diff_x(v.component(0)) + diff_y(v.component(1));
}

ScalarField curl2(const VectorField &m)
{
    return diff_x(m.component(1)) - diff_y(m.component(0));
}

ScalarField laplacian(const ScalarField &f) { return divergence(gradient(f)); }

double integrate(const ScalarField &f)
{
    const Grid2 &g = f.grid;
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        double row = 0.0;
        for (int i = 0; i < g.nx; ++i) {
            const double wx = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
            row += wx * f.values[g.index(i, j)];
        }
        const double wy = (j == 0 || j == g.ny - 1) ? 0.5 : 1.0;
        s += wy * row;
    }
    return s * g.hx * g.hy;
}

double integrate_product(const ScalarField &a, const ScalarField &b) { return integrate(hadamard(a, b)); }

ScalarField node_weights(const Grid2 &g)
{
    ScalarField w(g);
    for (std::size_t k = 0; k < g.size(); ++k) w[k] = g.weight(k);
    return w;
}

// -- separable operators --------------------------------------------------

SeparableOperator::SeparableOperator(const Grid2 &g, std::vector<double> ax, std::vector<double> ay)
    : grid_(g), ax_(std::move(ax)), ay_(std::move(ay))
{
    if (ax_.size() != static_cast<std::size_t>(g.nx) * g.nx || ay_.size() != static_cast<std::size_t>(g.ny) * g.ny)
        fail(ErrorKind::invalid_argument, "separable operator matrices do not match grid");
}

ScalarField SeparableOperator::run(const ScalarField &f, bool transpose) const
{
    require_same_grid(grid_, f.grid, "separable operator");
    const int nx = grid_.nx, ny = grid_.ny;
    // Pass 1 along x: T[j][i] = sum_k Ax[i][k] f[j][k].
    std::vector<double> tmp(grid_.size(), 0.0);
    parallel_for(ny, [&](int jb, int je) {
        for (int j = jb; j < je; ++j) {
            const double *src = &f.values[static_cast<std::size_t>(j) * nx];
            double *dst = &tmp[static_cast<std::size_t>(j) * nx];
            for (int i = 0; i < nx; ++i) {
                double s = 0.0;
                if (!transpose) {
                    const double *a = &ax_[static_cast<std::size_t>(i) * nx];
                    for (int k = 0; k < nx; ++k) s += a[k] * src[k];
                } else {
                    for (int k = 0; k < nx; ++k) s += ax_[static_cast<std::size_t>(k) * nx + i] * src[k];
                }
                dst[i] = s;
            }
        }
    });
    // Pass 2 along y.
    ScalarField out(grid_);
    parallel_for(ny, [&](int jb, int je) {
        for (int j = jb; j < je; ++j) {
            double *dst = &out.values[static_cast<std::size_t>(j) * nx];
            for (int k = 0; k < ny; ++k) {
                const double a = transpose ? ay_[static_cast<std::size_t>(k) * ny + j] : ay_[static_cast<std::size_t>(j) * ny + k];
                if (a == 0.0) continue;
                const double *src = &tmp[static_cast<std::size_t>(k) * nx];
                for (int i = 0; i < nx; ++i) dst[i] += a * src[i];
            }
        }
    });
    return out;
}

ScalarField SeparableOperator::apply(const ScalarField &f) const { return run(f, false); }
ScalarField SeparableOperator::apply_transpose(const ScalarField &f) const { return run(f, true); }

VectorField SeparableOperator::apply(const VectorField &v) const
{
    return VectorField(apply(v.component(0)), apply(v.component(1)));
}

namespace {

std::vector<double> gaussian_quadrature_matrix(int n, double h, double sigma)
{
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    const double c = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            const double d = (i - k) * h;
            const double wk = (k == 0 || k == n - 1) ? 0.5 * h : h;
            a[static_cast<std::size_t>(i) * n + k] = c * std::exp(-0.5 * d * d / (sigma * sigma)) * wk;
        }
    }
    return a;
}

std::vector<double> normalized_smoother_matrix(int n, double sigma_px)
{
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
    for (int i = 0; i < n; ++i) {
        double total = 0.0;
        for (int k = std::max(0, i - radius); k <= std::min(n - 1, i + radius); ++k) {
            const double d = i - k;
            const double w = std::exp(-0.5 * d * d / (sigma_px * sigma_px));
            a[static_cast<std::size_t>(i) * n + k] = w;
            total += w;
        }
        for (int k = 0; k < n; ++k) a[static_cast<std::size_t>(i) * n + k] /= total;
    }
    return a;
}

} // namespace

SeparableOperator gaussian_quadrature_operator(const Grid2 &g, double sigma)
{
    if (!(sigma > 0.0)) fail(ErrorKind::invalid_argument, "gaussian sigma must be positive");
    return SeparableOperator(g, gaussian_quadrature_matrix(g.nx, g.hx, sigma), gaussian_quadrature_matrix(g.ny, g.hy, sigma));
}

SeparableOperator gaussian_smoother(const Grid2 &g, double sigma_px)
{
    if (!(sigma_px > 0.0)) fail(ErrorKind::invalid_argument, "smoothing width must be positive");
    return SeparableOperator(g, normalized_smoother_matrix(g.nx, sigma_px), normalized_smoother_matrix(g.ny, sigma_px));
}

} // namespace greg
