#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <unistd.h>

#include "greg/bench.hpp"
#include "greg/fixtures.hpp"
#include "greg/io.hpp"

using namespace greg;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("greg_io_" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string bytes(const fs::path &p) { return read_text(p); }

bool same_bits(const std::vector<double> &a, const std::vector<double> &b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

ErrorKind kind_of(const std::function<void()> &f)
{
    try {
        f();
    } catch (const Error &e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::invalid_argument;
}

} // namespace

TEST_CASE("raw field round trip")
{
    TempDir tmp;
    const Grid2 g = make_grid(7, 5, {1.2, 0.8}, {-0.1, 0.3});
    Rng rng(3);
    const VectorField v = random_smooth_field(g, rng);
    const ScalarField s = ScalarField::from_function(g, [](Vec2 p) { return std::sin(7 * p.x) / 3.0 + p.y; });
    write_field(tmp.path / "v.field", v);
    write_field(tmp.path / "sub/s.field", s);

    const VectorField v2 = read_vector_field(tmp.path / "v.field");
    CHECK(v2.grid == g);
    CHECK(same_bits(v2.x, v.x));
    CHECK(same_bits(v2.y, v.y));
    const ScalarField s2 = read_scalar_field(tmp.path / "sub/s.field");
    CHECK(same_bits(s2.values, s.values));

    write_field(tmp.path / "again.field", s2);
    CHECK(bytes(tmp.path / "again.field") == bytes(tmp.path / "sub/s.field"));
    CHECK(bytes(tmp.path / "again.field.json") == bytes(tmp.path / "sub/s.field.json"));

    CHECK(kind_of([&] { read_scalar_field(tmp.path / "v.field"); }) == ErrorKind::io);
    CHECK(kind_of([&] { read_scalar_field(tmp.path / "missing.field"); }) == ErrorKind::io);
}

TEST_CASE("raw layout is little-endian row-major with planes")
{
    TempDir tmp;
    const Grid2 g = make_grid(5, 4);
    VectorField v(g);
    v.x[1] = 1.0;
    v.y[0] = -2.0;
    write_field(tmp.path / "v.field", v);
    const std::string b = bytes(tmp.path / "v.field");
    REQUIRE(b.size() == 40 * 8);
    const unsigned char one[8] = {0, 0, 0, 0, 0, 0, 0xf0, 0x3f};
    CHECK(std::memcmp(b.data() + 8, one, 8) == 0);
    const unsigned char minus_two[8] = {0, 0, 0, 0, 0, 0, 0x00, 0xc0};
    CHECK(std::memcmp(b.data() + 20 * 8, minus_two, 8) == 0);

    const std::string meta = bytes(tmp.path / "v.field.json");
    CHECK(meta.find("\"components\": 2") != std::string::npos);
    CHECK(meta.find("\"nx\": 5") != std::string::npos);

    std::ofstream(tmp.path / "v.field", std::ios::binary | std::ios::app) << 'x';
    CHECK_THROWS_WITH_AS(read_vector_field(tmp.path / "v.field"), doctest::Contains("size does not match"), Error);
}

TEST_CASE("png round trip and orientation")
{
    TempDir tmp;
    const Grid2 g = make_grid(9, 6, {1.0, 5.0 / 8.0});
    ScalarField f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = static_cast<double>((k * 37) % 256) / 255.0;
    write_png(tmp.path / "f.png", f);
    const ScalarField r = read_image(tmp.path / "f.png");
    CHECK(r.grid == g);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(r[k] == f[k]);

    ScalarField clipped = f;
    clipped[0] = -3.0;
    clipped[1] = 7.0;
    write_png(tmp.path / "c.png", clipped);
    const ScalarField c = read_image(tmp.path / "c.png");
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 1.0);

    std::ofstream(tmp.path / "bad.png") << "not an image";
    CHECK(kind_of([&] { read_image(tmp.path / "bad.png"); }) == ErrorKind::io);
}

TEST_CASE("pgm reading")
{
    TempDir tmp;
    // first row is the top of the image
    std::ofstream(tmp.path / "a.pgm") << "P2\n# comment\n5 4\n255\n0 51 102 0 0\n0 0 0 0 0\n0 0 0 0 0\n153 204 255 0 0\n";
    const ScalarField a = read_image(tmp.path / "a.pgm");
    CHECK(a.grid.nx == 5);
    CHECK(a.grid.ny == 4);
    CHECK(a.grid.hx == 0.25);
    CHECK(a.grid.hy == 0.25);
    CHECK(a.at(0, 3) == 0.0);
    CHECK(a.at(2, 3) == doctest::Approx(0.4));
    CHECK(a.at(2, 0) == 1.0);

    {
        std::ofstream out(tmp.path / "b.pgm", std::ios::binary);
        out << "P5 4 4 100\n";
        unsigned char px[16] = {};
        px[1] = 25;
        px[13] = 100;
        out.write(reinterpret_cast<const char *>(px), 16);
    }
    const ScalarField b = read_image(tmp.path / "b.pgm");
    CHECK(b.at(1, 3) == 0.25);
    CHECK(b.at(1, 0) == 1.0);

    std::ofstream(tmp.path / "wide.pgm") << "P2 4 4 65535\n0 1 2 3\n";
    CHECK(kind_of([&] { read_image(tmp.path / "wide.pgm"); }) == ErrorKind::io);
    std::ofstream(tmp.path / "short.pgm") << "P2 4 4 255\n0 1 2\n";
    CHECK(kind_of([&] { read_image(tmp.path / "short.pgm"); }) == ErrorKind::io);
}

TEST_CASE("interfaces from level sets and label images")
{
    TempDir tmp;
    const Grid2 g = make_grid(32, 32);
    const auto iface = horizontal_interface(g, 0.4);
    write_field(tmp.path / "g.sdf", iface->sdf());
    const auto back = read_interface(tmp.path / "g.sdf");
    CHECK(band_distance(*back, *iface) <= 1e-12);

    const ScalarField labels = ScalarField::from_function(g, [](Vec2 p) { return p.y > 0.4 ? 1.0 : 0.0; });
    write_png(tmp.path / "labels.png", labels);
    const auto from_labels = read_interface(tmp.path / "labels.png");
    CHECK(from_labels->masks().count(Side::plus) == iface->masks().count(Side::plus));
}

TEST_CASE("element round trip")
{
    TempDir tmp;
    const Scenario s = gen_rectangle(32, 0.1);
    write_element(tmp.path / "e", *s.truth_element);
    const GroupoidElement e = read_element(tmp.path / "e");
    CHECK(same_bits(e.phi_plus.x, s.truth_element->phi_plus.x));
    CHECK(same_bits(e.inv_phi_minus.y, s.truth_element->inv_phi_minus.y));
    CHECK(band_distance(*e.gamma_src, *s.truth_interface) <= 1e-12);

    // the warp from the files matches the in-memory element
    const ScalarField a = act_on_image(e, s.moving), b = act_on_image(*s.truth_element, s.moving);
    CHECK((a - b).max_abs() == 0.0);

    write_element(tmp.path / "f", e);
    for (const char *name : {"phi_plus.field", "phi_minus.field", "inv_phi_plus.field", "inv_phi_minus.field"})
        CHECK(bytes(tmp.path / "e" / name) == bytes(tmp.path / "f" / name));

    write_element(tmp.path / "id", identity_element(make_grid(8, 8)));
    CHECK(read_element(tmp.path / "id").smooth());
    fs::remove(tmp.path / "e" / "phi_minus.field");
    CHECK(kind_of([&] { read_element(tmp.path / "e"); }) == ErrorKind::io);
}

TEST_CASE("momentum files")
{
    TempDir tmp;
    const Grid2 g = make_grid(32, 32);
    const auto iface = horizontal_interface(g);
    const OneFormDensity m = sliding_momentum(iface, 0.2);
    write_field(tmp.path / "g.sdf", iface->sdf());
    write_density(tmp.path, "m", m, "g.sdf");
    const OneFormDensity r = read_density(tmp.path / "m.json", nullptr);
    REQUIRE(r.iface());
    CHECK(same_bits(r.m.plus.x, m.m.plus.x));
    CHECK(same_bits(r.m.minus.y, m.m.minus.y));

    write_field(tmp.path / "c.field", m.composite());
    const OneFormDensity c = read_density(tmp.path / "c.field", iface);
    CHECK((c.composite() - m.composite()).max_norm() == 0.0);
    const OneFormDensity smooth = read_density(tmp.path / "c.field", nullptr);
    CHECK(!smooth.iface());
}

TEST_CASE("trajectory dump")
{
    TempDir tmp;
    const Grid2 g = make_grid(32, 32);
    const auto op = InertiaOperator::gaussian(0.08);

    const auto still = shoot(zero_density(g, nullptr), 3, op);
    const auto rows0 = trajectory_diagnostics(still);
    REQUIRE(rows0.size() == 4);
    for (const auto &r : rows0) {
        CHECK(r.hamiltonian == 0.0);
        CHECK(r.min_jacobian == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.interface_length == 0.0);
    }

    const auto iface = horizontal_interface(g);
    const auto traj = shoot(sliding_momentum(iface, 0.15), 6, op);
    write_trajectory(tmp.path / "t", traj);
    const std::string csv = bytes(tmp.path / "t" / "diagnostics.csv");
    CHECK(csv.rfind("time,hamiltonian,max_speed,interface_length,min_jacobian\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
    const auto rows = trajectory_diagnostics(traj);
    CHECK(rows.back().time == 1.0);
    CHECK(rows.back().interface_length == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(rows.back().min_jacobian > 0.0);
    CHECK(rows.back().min_jacobian < 1.0);

    const OneFormDensity last = read_density(tmp.path / "t" / "m_006.json", nullptr);
    CHECK(same_bits(last.m.plus.x, traj.momenta.back().m.plus.x));
    CHECK(fs::exists(tmp.path / "t" / "trajectory.json"));
    CHECK(fs::exists(tmp.path / "t" / "v_006.field"));
}

TEST_CASE("renders")
{
    const Scenario s = gen_wheel(32, 5.0);
    const RgbImage o = render_overlay(s.fixed, s.moving, s.truth_interface);
    CHECK(o.width == 32);
    const RgbImage q = render_quiver(*s.truth_element, s.moving, 4, 3);
    CHECK(q.width == 31 * 3 + 1);
    TempDir tmp;
    write_png(tmp.path / "q.png", q);
    CHECK(fs::file_size(tmp.path / "q.png") > 0);
}
