#include "greg/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <json.hpp>
#include <sstream>

namespace greg {

using json = nlohmann::json;

namespace {

[[noreturn]] void io_fail(const fs::path &p, const std::string &what) { fail(ErrorKind::io, p.string() + ": " + what); }

fs::path sidecar(const fs::path &p) { return fs::path(p.string() + ".json"); }

void make_parent(const fs::path &p)
{
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) io_fail(p.parent_path(), "cannot create directory: " + ec.message());
}

std::uint64_t swap64(std::uint64_t x)
{
    std::uint64_t r = 0;
    for (int k = 0; k < 8; ++k) r |= ((x >> (8 * k)) & 0xffu) << (8 * (7 - k));
    return r;
}

json grid_json(const Grid2 &g)
{
    return {{"nx", g.nx}, {"ny", g.ny}, {"hx", g.hx}, {"hy", g.hy}, {"origin", {g.origin.x, g.origin.y}}};
}

Grid2 grid_from_json(const json &j)
{
    Grid2 g;
    g.nx = j.at("nx").get<int>();
    g.ny = j.at("ny").get<int>();
    g.hx = j.at("hx").get<double>();
    g.hy = j.at("hy").get<double>();
    g.origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()};
    if (g.nx < 2 || g.ny < 2 || !(g.hx > 0.0) || !(g.hy > 0.0)) fail(ErrorKind::io, "invalid grid in sidecar");
    return g;
}

json read_json(const fs::path &p)
{
    try {
        return json::parse(read_text(p));
    } catch (const json::exception &e) {
        io_fail(p, std::string("invalid JSON: ") + e.what());
    }
}

std::string lower_ext(const fs::path &p)
{
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

// Image rows run top to bottom; grid rows bottom to top.
ScalarField image_to_field(int w, int h, const std::vector<double> &pixels)
{
    if (w < 4 || h < 4) fail(ErrorKind::io, "image must be at least 4x4 pixels");
    const double s = 1.0 / (std::max(w, h) - 1);
    const Grid2 g = make_grid(w, h, {(w - 1) * s, (h - 1) * s});
    ScalarField f(g);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) f.at(c, h - 1 - r) = pixels[static_cast<std::size_t>(r) * w + c];
    return f;
}

ScalarField read_png(const fs::path &path)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) io_fail(path, std::string("cannot read PNG: ") + img.message);
    img.format = PNG_FORMAT_GRAY;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) io_fail(path, std::string("cannot decode PNG: ") + img.message);
    std::vector<double> px(buf.size());
    for (std::size_t k = 0; k < buf.size(); ++k) px[k] = buf[k] / 255.0;
    return image_to_field(static_cast<int>(img.width), static_cast<int>(img.height), px);
}

ScalarField read_pgm(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open");
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t += c;
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "P2" && magic != "P5") io_fail(path, "not a PGM file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception &) {
        io_fail(path, "bad PGM header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) io_fail(path, "only 8-bit PGM is supported");
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    if (magic == "P5") {
        std::vector<unsigned char> raw(px.size());
        if (!in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()))) io_fail(path, "truncated PGM");
        for (std::size_t k = 0; k < px.size(); ++k) px[k] = static_cast<double>(raw[k]) / maxval;
    } else {
        for (auto &x : px) {
            const std::string t = token();
            if (t.empty()) io_fail(path, "truncated PGM");
            x = std::stod(t) / maxval;
        }
    }
    return image_to_field(w, h, px);
}

unsigned char to_byte(double x, double lo, double hi)
{
    const double t = hi > lo ? (x - lo) / (hi - lo) : 0.0;
    if (!(t > 0.0)) return 0;
    if (t >= 1.0) return 255;
    return static_cast<unsigned char>(std::lround(255.0 * t));
}

void draw_line(RgbImage &img, int x0, int y0, int x1, int y1, Rgb c)
{
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (x0 >= 0 && y0 >= 0 && x0 < img.width && y0 < img.height) img.at(x0, y0) = c;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void draw_contour(RgbImage &img, const Interface &iface, double zoom, Rgb c)
{
    const Grid2 &g = iface.grid();
    for (const BoundarySample &s : iface.samples()) {
        const int x = static_cast<int>(std::lround((s.point.x - g.origin.x) / g.hx * zoom));
        const int y = img.height - 1 - static_cast<int>(std::lround((s.point.y - g.origin.y) / g.hy * zoom));
        if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.at(x, y) = c;
    }
}

json density_manifest(const std::string &stem, const std::string &iface_file)
{
    return {{"plus", stem + "_plus.field"}, {"minus", stem + "_minus.field"}, {"interface", iface_file}};
}

std::string step_name(const char *prefix, std::size_t k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, k);
    return buf;
}

} // namespace

void write_text(const fs::path &path, const std::string &text)
{
    make_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) io_fail(path, "cannot open for writing");
    out << text;
    if (!out) io_fail(path, "write failed");
}

std::string read_text(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_raw(const fs::path &path, const RawField &f)
{
    if (f.components < 1 || f.values.size() != f.grid.size() * static_cast<std::size_t>(f.components))
        fail(ErrorKind::invalid_argument, "field size does not match its grid");
    make_parent(path);
    std::vector<std::uint64_t> bits(f.values.size());
    std::memcpy(bits.data(), f.values.data(), bits.size() * sizeof(double));
    if constexpr (std::endian::native == std::endian::big)
        for (auto &b : bits) b = swap64(b);
    std::ofstream out(path, std::ios::binary);
    if (!out) io_fail(path, "cannot open for writing");
    out.write(reinterpret_cast<const char *>(bits.data()), static_cast<std::streamsize>(bits.size() * sizeof(double)));
    if (!out) io_fail(path, "write failed");
    json meta = grid_json(f.grid);
    meta["components"] = f.components;
    write_text(sidecar(path), meta.dump(2) + "\n");
}

RawField read_raw(const fs::path &path)
{
    const json meta = read_json(sidecar(path));
    RawField f;
    try {
        f.grid = grid_from_json(meta);
        f.components = meta.at("components").get<int>();
    } catch (const json::exception &e) {
        io_fail(sidecar(path), std::string("bad sidecar: ") + e.what());
    }
    if (f.components < 1) io_fail(sidecar(path), "bad component count");
    const std::size_t n = f.grid.size() * static_cast<std::size_t>(f.components);
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) io_fail(path, "cannot open");
    if (static_cast<std::size_t>(in.tellg()) != n * sizeof(double)) io_fail(path, "size does not match the sidecar");
    in.seekg(0);
    std::vector<std::uint64_t> bits(n);
    in.read(reinterpret_cast<char *>(bits.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) io_fail(path, "read failed");
    if constexpr (std::endian::native == std::endian::big)
        for (auto &b : bits) b = swap64(b);
    f.values.resize(n);
    std::memcpy(f.values.data(), bits.data(), n * sizeof(double));
    return f;
}

void write_field(const fs::path &path, const ScalarField &f) { write_raw(path, {f.grid, 1, f.values}); }

void write_field(const fs::path &path, const VectorField &f)
{
    RawField r{f.grid, 2, f.x};
    r.values.insert(r.values.end(), f.y.begin(), f.y.end());
    write_raw(path, r);
}

ScalarField read_scalar_field(const fs::path &path)
{
    RawField r = read_raw(path);
    if (r.components != 1) io_fail(path, "expected a scalar field");
    return ScalarField(r.grid, std::move(r.values));
}

VectorField read_vector_field(const fs::path &path)
{
    RawField r = read_raw(path);
    if (r.components != 2) io_fail(path, "expected a vector field");
    const auto mid = r.values.begin() + static_cast<std::ptrdiff_t>(r.grid.size());
    return VectorField(ScalarField(r.grid, std::vector<double>(r.values.begin(), mid)), ScalarField(r.grid, std::vector<double>(mid, r.values.end())));
}

ScalarField read_image(const fs::path &path)
{
    if (!fs::exists(path)) io_fail(path, "no such file");
    const std::string ext = lower_ext(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm") return read_pgm(path);
    return read_scalar_field(path);
}

void write_png(const fs::path &path, const ScalarField &f, double lo, double hi)
{
    const Grid2 &g = f.grid;
    std::vector<png_byte> buf(g.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) buf[static_cast<std::size_t>(g.ny - 1 - j) * g.nx + i] = to_byte(f.at(i, j), lo, hi);
    make_parent(path);
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(g.nx);
    img.height = static_cast<png_uint_32>(g.ny);
    img.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) io_fail(path, std::string("cannot write PNG: ") + img.message);
}

void write_png(const fs::path &path, const RgbImage &rgb)
{
    std::vector<png_byte> buf;
    buf.reserve(rgb.pixels.size() * 3);
    for (const Rgb &p : rgb.pixels) buf.insert(buf.end(), {p.r, p.g, p.b});
    make_parent(path);
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(rgb.width);
    img.height = static_cast<png_uint_32>(rgb.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) io_fail(path, std::string("cannot write PNG: ") + img.message);
}

InterfacePtr read_interface(const fs::path &path)
{
    const std::string ext = lower_ext(path);
    if (ext == ".png" || ext == ".pgm") {
        ScalarField labels = read_image(path);
        for (double &x : labels.values) x -= 0.5;
        return interface_from_labels(labels);
    }
    return build_interface(read_scalar_field(path));
}

RgbImage render_overlay(const ScalarField &fixed, const ScalarField &warped, const InterfacePtr &iface)
{
    require_same_grid(fixed.grid, warped.grid, "overlay");
    const Grid2 &g = fixed.grid;
    RgbImage img(g.nx, g.ny);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const unsigned char f = to_byte(fixed.at(i, j), 0.0, 1.0), w = to_byte(warped.at(i, j), 0.0, 1.0);
            img.at(i, g.ny - 1 - j) = {w, f, w};
        }
    }
    if (iface) draw_contour(img, *iface, 1.0, {255, 255, 0});
    return img;
}

RgbImage render_quiver(const GroupoidElement &e, const ScalarField &background, int stride, int zoom)
{
    const Grid2 &g = e.grid;
    require_same_grid(g, background.grid, "quiver");
    stride = std::max(1, stride);
    zoom = std::max(1, zoom);
    RgbImage img((g.nx - 1) * zoom + 1, (g.ny - 1) * zoom + 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Vec2 p = g.origin + Vec2{x * g.hx / zoom, (img.height - 1 - y) * g.hy / zoom};
            const unsigned char v = static_cast<unsigned char>(to_byte(interp(background, p), 0.0, 1.0) / 2);
            img.at(x, y) = {v, v, v};
        }
    }
    const auto &trg = e.gamma_trg;
    if (trg) draw_contour(img, *trg, zoom, {255, 255, 0});
    for (int j = 0; j < g.ny; j += stride) {
        for (int i = 0; i < g.nx; i += stride) {
            const std::size_t k = g.index(i, j);
            const Side s = trg ? trg->masks().side[k] : Side::plus;
            const Vec2 d = g.node(k) - e.inverse(s)[k];
            const int x0 = i * zoom, y0 = img.height - 1 - j * zoom;
            const int x1 = x0 + static_cast<int>(std::lround(d.x / g.hx * zoom));
            const int y1 = y0 - static_cast<int>(std::lround(d.y / g.hy * zoom));
            const Rgb c = s == Side::plus ? Rgb{255, 80, 80} : Rgb{80, 160, 255};
            draw_line(img, x0, y0, x1, y1, c);
            img.at(x0, y0) = {255, 255, 255};
        }
    }
    return img;
}

void write_element(const fs::path &dir, const GroupoidElement &e)
{
    write_field(dir / "phi_plus.field", e.phi_plus);
    write_field(dir / "phi_minus.field", e.phi_minus);
    write_field(dir / "inv_phi_plus.field", e.inv_phi_plus);
    write_field(dir / "inv_phi_minus.field", e.inv_phi_minus);
    json m = {{"grid", grid_json(e.grid)},
              {"phi_plus", "phi_plus.field"},
              {"phi_minus", "phi_minus.field"},
              {"inv_phi_plus", "inv_phi_plus.field"},
              {"inv_phi_minus", "inv_phi_minus.field"},
              {"gamma_src", nullptr},
              {"gamma_trg", nullptr}};
    if (!e.smooth()) {
        write_field(dir / "gamma_src.sdf", e.gamma_src->sdf());
        write_field(dir / "gamma_trg.sdf", e.gamma_trg->sdf());
        m["gamma_src"] = "gamma_src.sdf";
        m["gamma_trg"] = "gamma_trg.sdf";
    }
    write_text(dir / "element.json", m.dump(2) + "\n");
}

GroupoidElement read_element(const fs::path &dir)
{
    const json m = read_json(dir / "element.json");
    GroupoidElement e;
    try {
        e.grid = grid_from_json(m.at("grid"));
        e.phi_plus = read_vector_field(dir / m.at("phi_plus").get<std::string>());
        e.phi_minus = read_vector_field(dir / m.at("phi_minus").get<std::string>());
        e.inv_phi_plus = read_vector_field(dir / m.at("inv_phi_plus").get<std::string>());
        e.inv_phi_minus = read_vector_field(dir / m.at("inv_phi_minus").get<std::string>());
        if (!m.at("gamma_src").is_null()) {
            e.gamma_src = build_interface(read_scalar_field(dir / m.at("gamma_src").get<std::string>()));
            e.gamma_trg = build_interface(read_scalar_field(dir / m.at("gamma_trg").get<std::string>()));
        }
    } catch (const json::exception &ex) {
        io_fail(dir / "element.json", std::string("bad manifest: ") + ex.what());
    }
    for (const VectorField *f : {&e.phi_plus, &e.phi_minus, &e.inv_phi_plus, &e.inv_phi_minus})
        if (!(f->grid == e.grid)) io_fail(dir, "map grid does not match the manifest");
    return e;
}

void write_density(const fs::path &dir, const std::string &stem, const OneFormDensity &m, const std::string &iface_file)
{
    write_field(dir / (stem + "_plus.field"), m.m.plus);
    write_field(dir / (stem + "_minus.field"), m.m.minus);
    write_text(dir / (stem + ".json"), density_manifest(stem, iface_file).dump(2) + "\n");
}

OneFormDensity read_density(const fs::path &path, const InterfacePtr &iface)
{
    if (lower_ext(path) != ".json") {
        const VectorField m = read_vector_field(path);
        if (iface) require_same_grid(m.grid, iface->grid(), "momentum and interface");
        return density_from_composite(iface, m);
    }
    const json j = read_json(path);
    const fs::path dir = path.parent_path();
    try {
        VectorField plus = read_vector_field(dir / j.at("plus").get<std::string>());
        VectorField minus = read_vector_field(dir / j.at("minus").get<std::string>());
        InterfacePtr gamma = iface;
        const std::string ref = j.value("interface", std::string());
        if (!gamma && !ref.empty()) gamma = build_interface(read_scalar_field(dir / ref));
        if (!gamma) return make_density(smooth_piecewise(std::move(plus)));
        return make_density(make_piecewise(gamma, std::move(plus), std::move(minus)));
    } catch (const json::exception &ex) {
        io_fail(path, std::string("bad manifest: ") + ex.what());
    }
}

std::vector<TrajectoryRow> trajectory_diagnostics(const MomentumTrajectory &traj)
{
    if (traj.momenta.empty() || traj.velocities.size() != traj.momenta.size()) fail(ErrorKind::invalid_argument, "empty trajectory");
    const std::vector<DVectField> steps(traj.velocities.begin(), traj.velocities.end() - 1);
    const InterfacePtr gamma0 = traj.interfaces.empty() ? nullptr : traj.interfaces.front();
    std::optional<FlowRecord> rec;
    if (!steps.empty()) rec = flow_integrate_recorded(steps, gamma0);
    std::vector<TrajectoryRow> rows;
    for (std::size_t k = 0; k < traj.momenta.size(); ++k) {
        TrajectoryRow r;
        r.time = traj.times[k];
        r.hamiltonian = hamiltonian(traj.momenta[k], traj.velocities[k]);
        r.max_speed = traj.velocities[k].max_norm();
        const InterfacePtr &iface = k < traj.interfaces.size() ? traj.interfaces[k] : nullptr;
        r.interface_length = iface ? iface->length() : 0.0;
        if (rec && k > 0) {
            const InterfacePtr &at = rec->interfaces[k];
            double jmin = INFINITY;
            for (Side s : {Side::plus, Side::minus}) {
                if (!at && s == Side::minus) break;
                const ScalarField jac = jacobian_determinant(s == Side::plus ? rec->inv_plus[k] : rec->inv_minus[k]);
                for (std::size_t n = 0; n < jac.size(); ++n)
                    if (!at || at->masks().side[n] == s) jmin = std::min(jmin, jac[n]);
            }
            r.min_jacobian = jmin;
        }
        rows.push_back(r);
    }
    return rows;
}

std::string diagnostics_csv(const std::vector<TrajectoryRow> &rows)
{
    std::string out = "time,hamiltonian,max_speed,interface_length,min_jacobian\n";
    char buf[256];
    for (const TrajectoryRow &r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.17g,%.17g,%.17g,%.17g\n", r.time, r.hamiltonian, r.max_speed, r.interface_length, r.min_jacobian);
        out += buf;
    }
    return out;
}

std::vector<TrajectoryRow> write_trajectory(const fs::path &dir, const MomentumTrajectory &traj)
{
    const std::vector<TrajectoryRow> rows = trajectory_diagnostics(traj);
    json steps = json::array();
    for (std::size_t k = 0; k < traj.momenta.size(); ++k) {
        const InterfacePtr &iface = k < traj.interfaces.size() ? traj.interfaces[k] : nullptr;
        const std::string m = step_name("m", k), v = step_name("v", k);
        std::string gamma;
        if (iface) {
            gamma = step_name("gamma", k) + ".sdf";
            write_field(dir / gamma, iface->sdf());
        }
        write_density(dir, m, traj.momenta[k], gamma);
        write_field(dir / (v + ".field"), traj.velocities[k].composite());
        steps.push_back({{"time", traj.times[k]}, {"momentum", m + ".json"}, {"velocity", v + ".field"}, {"interface", gamma.empty() ? json(nullptr) : json(gamma)}});
    }
    write_text(dir / "trajectory.json", json{{"steps", steps}}.dump(2) + "\n");
    write_text(dir / "diagnostics.csv", diagnostics_csv(rows));
    return rows;
}

std::string energy_trace_csv(const std::vector<EnergyTerms> &trace)
{
    std::string out = "iteration,total,similarity,regularizer\n";
    char buf[160];
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, trace[k].total, trace[k].similarity, trace[k].regularizer);
        out += buf;
    }
    return out;
}

} // namespace greg
