#include "greg/interface.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "greg/parallel.hpp"

namespace greg {

struct Interface::Projector {
    // Per sample: composite-node coefficients of the normal-jump functional.
    std::vector<std::vector<std::pair<std::size_t, Vec2>>> rows;
    // Pseudo-inverse of C W^-1 C^T, row-major, samples x samples.
    std::vector<double> pinv;
    std::size_t n = 0;
};

namespace {

constexpr int kLinearLayers = 2;

struct Segment {
    Vec2 a;
    Vec2 b;
};

bool positive(double v) { return v >= 0.0; }

std::vector<Segment> marching_squares(const ScalarField &ls)
{
    const Grid2 &g = ls.grid;
    std::vector<Segment> segs;
    for (int j = 0; j + 1 < g.ny; ++j) {
        for (int i = 0; i + 1 < g.nx; ++i) {
            const std::array<Vec2, 4> p = {g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1), g.node(i, j + 1)};
            const std::array<double, 4> v = {ls.at(i, j), ls.at(i + 1, j), ls.at(i + 1, j + 1), ls.at(i, j + 1)};
            std::array<std::optional<Vec2>, 4> cut;
            int ncut = 0;
            for (int e = 0; e < 4; ++e) {
                const int q = (e + 1) % 4;
                if (positive(v[e]) != positive(v[q])) {
                    const double t = v[e] / (v[e] - v[q]);
                    cut[e] = p[e] + t * (p[q] - p[e]);
                    ++ncut;
                }
            }
            auto add = [&](int e0, int e1) {
                const Segment s{*cut[e0], *cut[e1]};
                if (norm(s.b - s.a) > 1e-14 * g.hmax()) segs.push_back(s);
            };
            if (ncut == 2) {
                int first = -1, second = -1;
                for (int e = 0; e < 4; ++e) {
                    if (!cut[e]) continue;
                    (first < 0 ? first : second) = e;
                }
                add(first, second);
            } else if (ncut == 4) {
                const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                // Edges e join corners e and e+1. Separate the corners whose
                // sign differs from the centre.
                if (positive(centre) == positive(v[0])) {
                    add(0, 1);
                    add(2, 3);
                } else {
                    add(3, 0);
                    add(1, 2);
                }
            }
        }
    }
    return segs;
}

double point_segment_distance(Vec2 p, const Segment &s)
{
    const Vec2 d = s.b - s.a;
    const double len2 = dot(d, d);
    double t = len2 > 0.0 ? dot(p - s.a, d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (s.a + t * d));
}

// Exact distance from every node to the polyline, using a coarse bucket grid.
std::vector<double> distance_to_segments(const Grid2 &g, const std::vector<Segment> &segs)
{
    const double bsize = 4.0 * g.hmax();
    const Vec2 ext = g.extent();
    const int bx = std::max(1, static_cast<int>(std::ceil(ext.x / bsize)) + 1);
    const int by = std::max(1, static_cast<int>(std::ceil(ext.y / bsize)) + 1);
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(bx) * by);
    auto bucket_of = [&](Vec2 p) {
        const int ix = std::clamp(static_cast<int>((p.x - g.origin.x) / bsize), 0, bx - 1);
        const int iy = std::clamp(static_cast<int>((p.y - g.origin.y) / bsize), 0, by - 1);
        return std::pair<int, int>{ix, iy};
    };
    for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
        const auto [ax, ay] = bucket_of(segs[s].a);
        const auto [bxx, byy] = bucket_of(segs[s].b);
        for (int iy = std::min(ay, byy); iy <= std::max(ay, byy); ++iy)
            for (int ix = std::min(ax, bxx); ix <= std::max(ax, bxx); ++ix)
                buckets[static_cast<std::size_t>(iy) * bx + ix].push_back(s);
    }
    std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
    const int rmax = std::max(bx, by);
    parallel_for(g.ny, [&](int jb, int je) {
        for (int j = jb; j < je; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const Vec2 p = g.node(i, j);
                const auto [cx, cy] = bucket_of(p);
                double best = std::numeric_limits<double>::infinity();
                for (int r = 0; r <= rmax; ++r) {
                    for (int iy = cy - r; iy <= cy + r; ++iy) {
                        if (iy < 0 || iy >= by) continue;
                        for (int ix = cx - r; ix <= cx + r; ++ix) {
                            if (ix < 0 || ix >= bx) continue;
                            if (std::max(std::abs(ix - cx), std::abs(iy - cy)) != r) continue;
                            for (int s : buckets[static_cast<std::size_t>(iy) * bx + ix])
                                best = std::min(best, point_segment_distance(p, segs[s]));
                        }
                    }
                    // Any bucket in ring r+1 is at least r*bsize away.
                    if (best <= r * bsize) break;
                }
                dist[g.index(i, j)] = best;
            }
        }
    });
    return dist;
}

// Affine least-squares trace weights from side nodes near p.
SparseRow trace_row(const Grid2 &g, const RegionMasks &m, Side side, Vec2 p)
{
    const double h = g.hmax();
    for (double radius = 2.5 * h; radius <= 6.0 * h; radius *= 1.5) {
        const int i0 = std::max(0, static_cast<int>(std::floor((p.x - radius - g.origin.x) / g.hx)));
        const int i1 = std::min(g.nx - 1, static_cast<int>(std::ceil((p.x + radius - g.origin.x) / g.hx)));
        const int j0 = std::max(0, static_cast<int>(std::floor((p.y - radius - g.origin.y) / g.hy)));
        const int j1 = std::min(g.ny - 1, static_cast<int>(std::ceil((p.y + radius - g.origin.y) / g.hy)));
        std::vector<std::size_t> nodes;
        std::vector<std::array<double, 3>> rows;
        std::vector<double> omega;
        Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const std::size_t k = g.index(i, j);
                if (m.side[k] != side) continue;
                const Vec2 d = g.node(i, j) - p;
                const double r = norm(d);
                if (r > radius) continue;
                const double w = std::exp(-(r * r) / (2.25 * h * h));
                const std::array<double, 3> a = {1.0, d.x / h, d.y / h};
                nodes.push_back(k);
                rows.push_back(a);
                omega.push_back(w);
                for (int r1 = 0; r1 < 3; ++r1)
                    for (int r2 = 0; r2 < 3; ++r2) M(r1, r2) += w * a[r1] * a[r2];
            }
        }
        if (nodes.size() < 3) continue;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
        if (es.eigenvalues()(0) < 1e-6 * es.eigenvalues()(2)) continue;
        const Eigen::Vector3d c = M.inverse().col(0);
        SparseRow row;
        row.reserve(nodes.size());
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const double b = omega[q] * (c(0) * rows[q][0] + c(1) * rows[q][1] + c(2) * rows[q][2]);
            row.emplace_back(nodes[q], b);
        }
        return row;
    }
    // Thin sliver: fall back to the nearest side node.
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (m.side[k] != side) continue;
        const double r = norm(g.node(k) - p);
        if (r < best) {
            best = r;
            arg = k;
        }
    }
    if (!std::isfinite(best)) return {};
    return {{arg, 1.0}};
}

ExtensionPlan build_extension(const Interface &iface, Side side)
{
    const Grid2 &g = iface.grid();
    const RegionMasks &m = iface.masks();
    const double sgn = side == Side::plus ? 1.0 : -1.0;
    std::vector<int> layer(g.size(), -1);
    std::size_t filled = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (m.side[k] == side) {
            layer[k] = 0;
            ++filled;
        }
    }
    if (filled == 0) fail(ErrorKind::invalid_argument, "one-sided extension: side contains no nodes");

    ExtensionPlan plan;
    plan.side = side;
    const std::array<std::pair<int, int>, 8> offs = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
    for (int L = 1; filled < g.size(); ++L) {
        std::vector<ExtensionPlan::Step> steps;
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t k = g.index(i, j);
                if (layer[k] >= 0) continue;
                const double dk = sgn * iface.sdf()[k];
                struct Nb {
                    std::size_t k, kk;
                    bool linear;
                    double u;
                };
                std::vector<Nb> nbs;
                double usum = 0.0;
                for (auto [di, dj] : offs) {
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= g.nx || jj >= g.ny) continue;
                    const std::size_t kn = g.index(ii, jj);
                    if (layer[kn] < 0 || layer[kn] >= L) continue;
                    const double dist = std::hypot(di * g.hx, dj * g.hy);
                    const double u = std::max(0.0, sgn * iface.sdf()[kn] - dk) / dist;
                    Nb nb{kn, 0, false, u};
                    const int i2 = i + 2 * di, j2 = j + 2 * dj;
                    if (L <= kLinearLayers && i2 >= 0 && j2 >= 0 && i2 < g.nx && j2 < g.ny) {
                        const std::size_t k2 = g.index(i2, j2);
                        if (layer[k2] >= 0 && layer[k2] <= layer[kn]) {
                            nb.kk = k2;
                            nb.linear = true;
                        }
                    }
                    nbs.push_back(nb);
                    usum += u;
                }
                if (nbs.empty()) continue;
                if (usum <= 1e-14) {
                    for (auto &nb : nbs) nb.u = 1.0;
                    usum = static_cast<double>(nbs.size());
                }
                ExtensionPlan::Step step{k, {}};
                for (const auto &nb : nbs) {
                    if (nb.u == 0.0) continue;
                    const double w = nb.u / usum;
                    if (nb.linear) {
                        step.sources.emplace_back(nb.k, 2.0 * w);
                        step.sources.emplace_back(nb.kk, -w);
                    } else {
                        step.sources.emplace_back(nb.k, w);
                    }
                }
                steps.push_back(std::move(step));
            }
        }
        if (steps.empty()) fail(ErrorKind::numerical, "one-sided extension stalled");
        for (auto &s : steps) {
            layer[s.target] = L;
            ++filled;
            plan.steps.push_back(std::move(s));
        }
    }
    return plan;
}

void require_same_iface(const InterfacePtr &a, const InterfacePtr &b, const char *what)
{
    if (a != b) fail(ErrorKind::invalid_argument, std::string("interface mismatch in ") + what);
}

} // namespace

// -- RegionMasks / ExtensionPlan -------------------------------------------

std::size_t RegionMasks::count(Side s) const { return static_cast<std::size_t>(std::count(side.begin(), side.end(), s)); }

void ExtensionPlan::apply(std::vector<double> &values) const
{
    for (const auto &s : steps) {
        double v = 0.0;
        for (const auto &[k, w] : s.sources) v += w * values[k];
        values[s.target] = v;
    }
}

void ExtensionPlan::apply_transpose(std::vector<double> &adj) const
{
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        const double a = adj[it->target];
        adj[it->target] = 0.0;
        if (a == 0.0) continue;
        for (const auto &[k, w] : it->sources) adj[k] += w * a;
    }
}

// -- Interface ------------------------------------------------------------

Interface::Interface(ScalarField sdf, VectorField normals, std::vector<std::size_t> band,
                     std::vector<BoundarySample> samples, double band_width, RegionMasks masks, TraceStencils traces)
    : sdf_(std::move(sdf)), normals_(std::move(normals)), band_(std::move(band)), samples_(std::move(samples)),
      band_width_(band_width), masks_(std::move(masks)), traces_(std::move(traces))
{
}

Interface::~Interface() = default;

double Interface::length() const
{
    double s = 0.0;
    for (const auto &b : samples_) s += b.weight;
    return s;
}

const ExtensionPlan &Interface::extension(Side s) const
{
    const int k = s == Side::plus ? 0 : 1;
    std::call_once(ext_once_[k], [&] { ext_[k] = std::make_unique<ExtensionPlan>(build_extension(*this, s)); });
    return *ext_[k];
}

const Interface::Projector &Interface::projector() const
{
    std::call_once(proj_once_, [&] {
        auto p = std::make_unique<Projector>();
        const std::size_t n = samples_.size();
        p->n = n;
        p->rows.resize(n);
        for (std::size_t s = 0; s < n; ++s) {
            const Vec2 nrm = samples_[s].normal;
            for (const auto &[k, b] : traces_.plus[s]) p->rows[s].emplace_back(k, b * nrm);
            for (const auto &[k, b] : traces_.minus[s]) p->rows[s].emplace_back(k, -b * nrm);
        }
        // G = C W^-1 C^T through a node -> (sample, coefficient) index.
        const Grid2 &g = grid();
        std::vector<std::vector<std::pair<std::size_t, Vec2>>> by_node(g.size());
        for (std::size_t s = 0; s < n; ++s)
            for (const auto &[k, c] : p->rows[s]) by_node[k].emplace_back(s, c);
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto &lst = by_node[k];
            if (lst.empty()) continue;
            const double winv = 1.0 / g.weight(k);
            for (const auto &[s, cs] : lst)
                for (const auto &[t, ct] : lst) G(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += winv * dot(cs, ct);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const Eigen::VectorXd lam = es.eigenvalues();
        const double tol = 1e-10 * std::max(1e-300, lam.cwiseAbs().maxCoeff());
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
        for (Eigen::Index q = 0; q < lam.size(); ++q)
            if (lam(q) > tol) inv(q) = 1.0 / lam(q);
        const Eigen::MatrixXd V = es.eigenvectors();
        const Eigen::MatrixXd Pinv = V * inv.asDiagonal() * V.transpose();
        p->pinv.resize(n * n);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t t = 0; t < n; ++t) p->pinv[s * n + t] = Pinv(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        proj_ = std::move(p);
    });
    return *proj_;
}

InterfacePtr build_interface(const ScalarField &level_set, double band_width)
{
    const Grid2 &g = level_set.grid;
    if (!level_set.all_finite()) fail(ErrorKind::invalid_argument, "level set contains non-finite values");
    bool any_pos = false, any_neg = false;
    for (double v : level_set.values) (positive(v) ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg) fail(ErrorKind::invalid_argument, "empty interface");
    if (band_width <= 0.0) band_width = 4.0 * g.hmax();

    const auto segs = marching_squares(level_set);
    if (segs.empty()) fail(ErrorKind::invalid_argument, "empty interface");

    const auto dist = distance_to_segments(g, segs);
    ScalarField sdf(g);
    for (std::size_t k = 0; k < g.size(); ++k) sdf[k] = positive(level_set[k]) ? dist[k] : -dist[k];

    VectorField grad = gradient(sdf);
    VectorField normals(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 d = grad[k];
        const double l = norm(d);
        normals.set(k, l > 1e-12 ? (1.0 / l) * d : Vec2{});
    }

    std::vector<std::size_t> band;
    double res2 = 0.0;
    std::size_t nres = 0;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t k = g.index(i, j);
            if (std::abs(sdf[k]) > band_width) continue;
            band.push_back(k);
            if (i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1) continue;
            const double r = norm(grad[k]) - 1.0;
            res2 += r * r;
            ++nres;
        }
    }
    if (nres > 0 && std::sqrt(res2 / nres) > 0.1) fail(ErrorKind::numerical, "degenerate level set");

    std::vector<BoundarySample> samples;
    samples.reserve(segs.size());
    for (const auto &s : segs) {
        const Vec2 d = s.b - s.a;
        const double len = norm(d);
        const Vec2 mid = 0.5 * (s.a + s.b);
        Vec2 n = (1.0 / len) * perp(d);
        Vec2 up = interp_gradient(level_set, mid);
        if (norm(up) < 1e-14) up = interp(grad, mid);
        if (dot(n, up) < 0.0) n = -n;
        samples.push_back({mid, len, n});
    }

    RegionMasks m;
    m.chi_plus = ScalarField(g);
    m.chi_minus = ScalarField(g);
    m.side.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const bool p = sdf[k] >= 0.0;
        m.chi_plus[k] = p ? 1.0 : 0.0;
        m.chi_minus[k] = p ? 0.0 : 1.0;
        m.side[k] = p ? Side::plus : Side::minus;
    }

    TraceStencils traces;
    traces.plus.reserve(samples.size());
    traces.minus.reserve(samples.size());
    for (const auto &s : samples) {
        traces.plus.push_back(trace_row(g, m, Side::plus, s.point));
        traces.minus.push_back(trace_row(g, m, Side::minus, s.point));
    }
    return std::make_shared<const Interface>(std::move(sdf), std::move(normals), std::move(band), std::move(samples),
                                             band_width, std::move(m), std::move(traces));
}

InterfacePtr interface_from_labels(const ScalarField &labels, double band_width)
{
    ScalarField ls(labels.grid);
    for (std::size_t k = 0; k < ls.size(); ++k) ls[k] = labels[k] > 0.0 ? 0.5 : -0.5;
    return build_interface(ls, band_width);
}

RegionMasks masks(const Interface &iface) { return iface.masks(); }

double band_distance(const Interface &a, const Interface &b)
{
    require_same_grid(a.grid(), b.grid(), "band distance");
    double d = 0.0;
    for (const auto *band : {&a.band(), &b.band()})
        for (std::size_t k : *band) d = std::max(d, std::abs(a.sdf()[k] - b.sdf()[k]));
    return d;
}

// -- piecewise ------------------------------------------------------------

template <>
ScalarField Piecewise<ScalarField>::composite() const
{
    if (!iface) return plus;
    ScalarField c(plus.grid);
    const auto &side = iface->masks().side;
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = side[k] == Side::plus ? plus[k] : minus[k];
    return c;
}

template <>
VectorField Piecewise<VectorField>::composite() const
{
    if (!iface) return plus;
    VectorField c(plus.grid);
    const auto &side = iface->masks().side;
    for (std::size_t k = 0; k < c.size(); ++k) c.set(k, side[k] == Side::plus ? plus[k] : minus[k]);
    return c;
}

PiecewiseScalar make_piecewise(InterfacePtr iface, ScalarField plus, ScalarField minus)
{
    require_same_grid(plus.grid, minus.grid, "piecewise scalar");
    if (iface) require_same_grid(iface->grid(), plus.grid, "piecewise scalar");
    return {std::move(iface), std::move(plus), std::move(minus)};
}

PiecewiseVector make_piecewise(InterfacePtr iface, VectorField plus, VectorField minus)
{
    require_same_grid(plus.grid, minus.grid, "piecewise vector");
    if (iface) require_same_grid(iface->grid(), plus.grid, "piecewise vector");
    return {std::move(iface), std::move(plus), std::move(minus)};
}

PiecewiseScalar smooth_piecewise(ScalarField f)
{
    ScalarField copy = f;
    return {nullptr, std::move(f), std::move(copy)};
}

PiecewiseVector smooth_piecewise(VectorField f)
{
    VectorField copy = f;
    return {nullptr, std::move(f), std::move(copy)};
}

ScalarField one_sided_extend(const ScalarField &field, const Interface &iface, Side side)
{
    require_same_grid(field.grid, iface.grid(), "one-sided extension");
    const auto &plan = iface.extension(side);
    ScalarField out = field;
    plan.apply(out.values);
    return out;
}

VectorField one_sided_extend(const VectorField &field, const Interface &iface, Side side)
{
    require_same_grid(field.grid, iface.grid(), "one-sided extension");
    const auto &plan = iface.extension(side);
    VectorField out = field;
    plan.apply(out.x);
    plan.apply(out.y);
    return out;
}

PiecewiseScalar from_composite(InterfacePtr iface, const ScalarField &composite)
{
    if (!iface) return smooth_piecewise(composite);
    ScalarField p = one_sided_extend(composite, *iface, Side::plus);
    ScalarField m = one_sided_extend(composite, *iface, Side::minus);
    return {std::move(iface), std::move(p), std::move(m)};
}

PiecewiseVector from_composite(InterfacePtr iface, const VectorField &composite)
{
    if (!iface) return smooth_piecewise(composite);
    VectorField p = one_sided_extend(composite, *iface, Side::plus);
    VectorField m = one_sided_extend(composite, *iface, Side::minus);
    return {std::move(iface), std::move(p), std::move(m)};
}

PiecewiseScalar reextend(const PiecewiseScalar &f, InterfacePtr iface)
{
    if (!iface) return smooth_piecewise(f.plus);
    ScalarField p = one_sided_extend(f.plus, *iface, Side::plus);
    ScalarField m = one_sided_extend(f.minus, *iface, Side::minus);
    return {std::move(iface), std::move(p), std::move(m)};
}

PiecewiseVector reextend(const PiecewiseVector &f, InterfacePtr iface)
{
    if (!iface) return smooth_piecewise(f.plus);
    VectorField p = one_sided_extend(f.plus, *iface, Side::plus);
    VectorField m = one_sided_extend(f.minus, *iface, Side::minus);
    return {std::move(iface), std::move(p), std::move(m)};
}

PiecewiseScalar operator+(const PiecewiseScalar &a, const PiecewiseScalar &b)
{
    require_same_iface(a.iface, b.iface, "piecewise add");
    return {a.iface, a.plus + b.plus, a.minus + b.minus};
}

PiecewiseVector operator+(const PiecewiseVector &a, const PiecewiseVector &b)
{
    require_same_iface(a.iface, b.iface, "piecewise add");
    return {a.iface, a.plus + b.plus, a.minus + b.minus};
}

PiecewiseVector operator-(const PiecewiseVector &a, const PiecewiseVector &b)
{
    require_same_iface(a.iface, b.iface, "piecewise subtract");
    return {a.iface, a.plus - b.plus, a.minus - b.minus};
}

PiecewiseScalar operator*(double s, PiecewiseScalar a)
{
    a.plus *= s;
    a.minus *= s;
    return a;
}

PiecewiseVector operator*(double s, PiecewiseVector a)
{
    a.plus *= s;
    a.minus *= s;
    return a;
}

PiecewiseScalar dot(const PiecewiseVector &a, const PiecewiseVector &b)
{
    require_same_iface(a.iface, b.iface, "piecewise dot");
    return {a.iface, dot(a.plus, b.plus), dot(a.minus, b.minus)};
}

PiecewiseVector scale(const PiecewiseScalar &s, const PiecewiseVector &v)
{
    require_same_iface(s.iface, v.iface, "piecewise scale");
    return {v.iface, scale(s.plus, v.plus), scale(s.minus, v.minus)};
}

// -- boundary functions ---------------------------------------------------

BoundaryFunction &BoundaryFunction::operator*=(double s)
{
    for (auto &v : values) v *= s;
    return *this;
}

BoundaryFunction operator+(BoundaryFunction a, const BoundaryFunction &b)
{
    require_same_iface(a.iface, b.iface, "boundary add");
    for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] += b.values[k];
    return a;
}

BoundaryFunction operator-(BoundaryFunction a, const BoundaryFunction &b)
{
    require_same_iface(a.iface, b.iface, "boundary subtract");
    for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] -= b.values[k];
    return a;
}

BoundaryFunction operator*(double s, BoundaryFunction a) { return a *= s; }

BoundaryFunction boundary_constant(InterfacePtr iface, double c)
{
    const std::size_t n = iface ? iface->samples().size() : 0;
    return {std::move(iface), std::vector<double>(n, c)};
}

std::vector<double> trace(const Interface &iface, const ScalarField &f, Side side)
{
    const auto &rows = iface.traces().rows(side);
    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (const auto &[k, w] : rows[s]) out[s] += w * f[k];
    return out;
}

std::vector<Vec2> trace(const Interface &iface, const VectorField &f, Side side)
{
    const auto &rows = iface.traces().rows(side);
    std::vector<Vec2> out(rows.size());
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (const auto &[k, w] : rows[s]) out[s] += w * f[k];
    return out;
}

BoundaryFunction jump(const PiecewiseScalar &f)
{
    if (!f.iface) return {};
    const auto tp = trace(*f.iface, f.plus, Side::plus);
    const auto tm = trace(*f.iface, f.minus, Side::minus);
    BoundaryFunction b{f.iface, std::vector<double>(tp.size())};
    for (std::size_t s = 0; s < tp.size(); ++s) b.values[s] = tp[s] - tm[s];
    return b;
}

PiecewiseVector reg_grad(const PiecewiseScalar &f)
{
    if (!f.iface) return smooth_piecewise(gradient(f.plus));
    return {f.iface, gradient(f.plus), gradient(f.minus)};
}

PiecewiseScalar reg_div(const PiecewiseVector &v)
{
    if (!v.iface) return smooth_piecewise(divergence(v.plus));
    return {v.iface, divergence(v.plus), divergence(v.minus)};
}

PiecewiseScalar reg_curl2(const PiecewiseVector &m)
{
    if (!m.iface) return smooth_piecewise(curl2(m.plus));
    return {m.iface, curl2(m.plus), curl2(m.minus)};
}

double boundary_integral(const BoundaryFunction &g, const VectorField &v)
{
    if (!g.iface) return 0.0;
    const auto &samples = g.iface->samples();
    double s = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k)
        s += g.values[k] * dot(samples[k].normal, interp(v, samples[k].point)) * samples[k].weight;
    return s;
}

double boundary_integral(const BoundaryFunction &g, const PiecewiseVector &v)
{
    if (!g.iface) return 0.0;
    if (!v.iface) return boundary_integral(g, v.plus);
    require_same_iface(g.iface, v.iface, "boundary integral");
    const auto &samples = g.iface->samples();
    const auto tp = trace(*v.iface, v.plus, Side::plus);
    const auto tm = trace(*v.iface, v.minus, Side::minus);
    double s = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k)
        s += g.values[k] * dot(samples[k].normal, 0.5 * (tp[k] + tm[k])) * samples[k].weight;
    return s;
}

std::vector<double> normal_jump(const PiecewiseVector &v)
{
    if (!v.iface) return {};
    const auto &samples = v.iface->samples();
    const auto tp = trace(*v.iface, v.plus, Side::plus);
    const auto tm = trace(*v.iface, v.minus, Side::minus);
    std::vector<double> out(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) out[k] = dot(samples[k].normal, tp[k] - tm[k]);
    return out;
}

// -- DVectField -----------------------------------------------------------

DVectField DVectField::zero(const Grid2 &g, InterfacePtr iface)
{
    if (!iface) return DVectField(smooth_piecewise(VectorField(g)));
    return DVectField(PiecewiseVector{std::move(iface), VectorField(g), VectorField(g)});
}

double DVectField::max_norm() const
{
    if (smooth()) return v_.plus.max_norm();
    return v_.composite().max_norm();
}

DVectField &DVectField::operator+=(const DVectField &o)
{
    v_ = v_ + o.v_;
    return *this;
}

DVectField &DVectField::operator*=(double s)
{
    v_ = s * v_;
    return *this;
}

DVectField operator+(DVectField a, const DVectField &b) { return a += b; }
DVectField operator-(DVectField a, const DVectField &b) { return a += (-1.0) * b; }
DVectField operator*(double s, DVectField a) { return a *= s; }

VectorField project_composite(const Interface &iface, const VectorField &composite)
{
    const auto &P = iface.projector();
    const Grid2 &g = iface.grid();
    std::vector<double> c(P.n, 0.0);
    for (std::size_t s = 0; s < P.n; ++s)
        for (const auto &[k, coef] : P.rows[s]) c[s] += dot(coef, composite[k]);
    std::vector<double> lambda(P.n, 0.0);
    for (std::size_t s = 0; s < P.n; ++s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < P.n; ++t) acc += P.pinv[s * P.n + t] * c[t];
        lambda[s] = acc;
    }
    VectorField out = composite;
    for (std::size_t s = 0; s < P.n; ++s) {
        if (lambda[s] == 0.0) continue;
        for (const auto &[k, coef] : P.rows[s]) {
            const double f = lambda[s] / g.weight(k);
            out.x[k] -= f * coef.x;
            out.y[k] -= f * coef.y;
        }
    }
    return out;
}

DVectField project_normal_continuity(const PiecewiseVector &v)
{
    if (!v.iface) return DVectField::assume_admissible(v);
    const Interface &iface = *v.iface;
    const VectorField comp = v.composite();
    const VectorField corr = project_composite(iface, comp) - comp;
    PiecewiseVector out = v;
    for (Side side : {Side::plus, Side::minus}) {
        VectorField c(corr.grid);
        const auto &sides = iface.masks().side;
        for (std::size_t k = 0; k < c.size(); ++k)
            if (sides[k] == side) c.set(k, corr[k]);
        out.part(side) += one_sided_extend(c, iface, side);
    }
    return DVectField::assume_admissible(std::move(out));
}

BoundaryFunction anchor(const DVectField &v)
{
    if (v.smooth()) return {};
    const auto &f = v.field();
    const auto &samples = f.iface->samples();
    const auto tp = trace(*f.iface, f.plus, Side::plus);
    const auto tm = trace(*f.iface, f.minus, Side::minus);
    BoundaryFunction b{f.iface, std::vector<double>(samples.size())};
    for (std::size_t k = 0; k < samples.size(); ++k) b.values[k] = dot(samples[k].normal, 0.5 * (tp[k] + tm[k]));
    return b;
}

ScalarField extend_boundary_values(const BoundaryFunction &n)
{
    if (!n.iface) fail(ErrorKind::invalid_argument, "boundary function without interface");
    const Interface &iface = *n.iface;
    const Grid2 &g = iface.grid();
    const auto &samples = iface.samples();
    const double h = g.hmax();
    ScalarField out(g);
    // Value at the foot point x - sdf * normal, smoothed over nearby samples
    // with a Gaussian of width h along the curve.
    parallel_for(static_cast<int>(g.size()), [&](int b, int e) {
        for (int k = b; k < e; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            const Vec2 q = g.node(kk) - iface.sdf()[kk] * iface.normals()[kk];
            double num = 0.0, den = 0.0, best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t s = 0; s < samples.size(); ++s) {
                const Vec2 d = samples[s].point - q;
                const double r2 = (d.x * d.x + d.y * d.y) / (h * h);
                if (r2 < best) {
                    best = r2;
                    arg = s;
                }
                if (r2 > 9.0) continue;
                const double w = samples[s].weight * std::exp(-r2);
                num += w * n.values[s];
                den += w;
            }
            out[kk] = den > 0.0 ? num / den : n.values[arg];
        }
    }, 64);
    return out;
}

VectorField interface_velocity(const DVectField &v)
{
    if (v.smooth()) return v.field().plus;
    return scale(extend_boundary_values(anchor(v)), v.iface()->normals());
}

InterfacePtr advect_interface(const Interface &iface, const VectorField &velocity, double dt)
{
    require_same_grid(iface.grid(), velocity.grid, "interface advection");
    const Grid2 &g = iface.grid();
    if (dt * velocity.max_norm() > g.hmin() * (1.0 + 1e-12)) fail(ErrorKind::numerical, "CFL violation in interface advection");
    ScalarField ls(g);
    for (std::size_t k = 0; k < g.size(); ++k) ls[k] = interp(iface.sdf(), g.node(k) - dt * velocity[k]);
    return build_interface(ls, iface.band_width());
}

InterfacePtr advect_interface(const Interface &iface, const DVectField &v, double dt)
{
    return advect_interface(iface, interface_velocity(v), dt);
}

} // namespace greg
