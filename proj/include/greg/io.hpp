#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "greg/mechanics.hpp"
#include "greg/registration.hpp"

namespace greg {

namespace fs = std::filesystem;

// -- raw fields -----------------------------------------------------------
//
// A field file holds little-endian float64 values, row-major with x fastest,
// one plane per component. `<path>.json` carries {nx, ny, hx, hy, origin,
// components}.

struct RawField {
    Grid2 grid;
    int components = 1;
    std::vector<double> values;
};

void write_raw(const fs::path &path, const RawField &f);
RawField read_raw(const fs::path &path);

void write_field(const fs::path &path, const ScalarField &f);
void write_field(const fs::path &path, const VectorField &f);
ScalarField read_scalar_field(const fs::path &path);
VectorField read_vector_field(const fs::path &path);

// -- images ---------------------------------------------------------------

/// Grayscale image from 8-bit PNG or PGM (P2/P5), or a one-component field
/// file for any other extension. Pixels map to [0, 1]; the first image row
/// becomes the top row of the grid (largest y) and the spacing is
/// 1 / (max(width, height) - 1) in both directions.
ScalarField read_image(const fs::path &path);
/// 8-bit grayscale PNG of f, clamped to [lo, hi].
void write_png(const fs::path &path, const ScalarField &f, double lo = 0.0, double hi = 1.0);

struct Rgb {
    unsigned char r = 0, g = 0, b = 0;
};
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;

    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}
    Rgb &at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};
void write_png(const fs::path &path, const RgbImage &img);

/// Level set from a field file, or from a label PNG/PGM (values above 0.5
/// are the plus side).
InterfacePtr read_interface(const fs::path &path);

// -- renders ----------------------------------------------------------------

/// Fixed in green, warped in magenta, interface contour in yellow.
RgbImage render_overlay(const ScalarField &fixed, const ScalarField &warped, const InterfacePtr &iface);
/// Warped image with arrows of the displacement x - inv_phi_s(x) every
/// `stride` nodes, on a canvas `zoom` times the grid.
RgbImage render_quiver(const GroupoidElement &e, const ScalarField &background, int stride = 4, int zoom = 4);

// -- composite objects ------------------------------------------------------

/// Four map files, the two interface level sets and element.json.
void write_element(const fs::path &dir, const GroupoidElement &e);
GroupoidElement read_element(const fs::path &dir);

/// `<stem>_plus.field`, `<stem>_minus.field` and `<stem>.json` naming the
/// interface file (empty for the smooth case).
void write_density(const fs::path &dir, const std::string &stem, const OneFormDensity &m, const std::string &iface_file);
/// Reads either such a manifest or a plain composite vector field, which is
/// then split along `iface`.
OneFormDensity read_density(const fs::path &path, const InterfacePtr &iface);

struct TrajectoryRow {
    double time = 0.0;
    double hamiltonian = 0.0;
    double max_speed = 0.0;
    double interface_length = 0.0;
    double min_jacobian = 1.0;
};

/// Per-step rows: H and max|v| from the trajectory, interface length, and the
/// smallest side Jacobian of the inverse flow maps at that time.
std::vector<TrajectoryRow> trajectory_diagnostics(const MomentumTrajectory &traj);
std::string diagnostics_csv(const std::vector<TrajectoryRow> &rows);
/// Momenta, velocities and level sets per step, trajectory.json and
/// diagnostics.csv. Returns the diagnostics rows.
std::vector<TrajectoryRow> write_trajectory(const fs::path &dir, const MomentumTrajectory &traj);

std::string energy_trace_csv(const std::vector<EnergyTerms> &trace);

/// Writes `text` to `path`, creating parent directories.
void write_text(const fs::path &path, const std::string &text);
std::string read_text(const fs::path &path);

} // namespace greg
