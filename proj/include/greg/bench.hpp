#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "greg/registration.hpp"

namespace greg {

struct Scenario {
    std::string name;
    ScalarField moving;
    ScalarField fixed;
    InterfacePtr truth_interface;
    std::optional<GroupoidElement> truth_element;
};

/// Textured rectangle crossing the line y = 0.5; in `fixed` the upper half is
/// moved right by `shift` and the lower half left.
Scenario gen_rectangle(int n, double shift);
/// Spoked wheel; in `fixed` the inner disk is turned by +degrees and the outer
/// annulus by -degrees about the centre.
Scenario gen_wheel(int n, double degrees);
Scenario make_scenario(const std::string &name, int n, double amount);

/// 100 * ssd(warped, fixed) / ssd(moving, fixed).
double re_ssd(const ScalarField &moving, const ScalarField &fixed, const ScalarField &warped);
/// Global centred cosine similarity over the pixels.
double ncc_metric(const ScalarField &fixed, const ScalarField &warped);
/// Mean SSIM over all 8x8 windows (Gaussian weights, std 1.5 px), dynamic
/// range 1.
double ssim(const ScalarField &fixed, const ScalarField &warped);

/// Mean over steps of |tangential jump| of the velocity across `iface` at
/// the sample closest to `at`, using one-sided traces of the composites.
double tangential_jump(const std::vector<DVectField> &velocities, const InterfacePtr &iface, Vec2 at);

struct TableConfig {
    InertiaOperator inertia = InertiaOperator::gaussian(0.05);
    int steps = 10;
    SimKind sim = SimKind::lncc;
    double lncc_window = 5.0;
    double reg_weight = 0.01;
    RegistrationOptions opt{.iters = 200, .tol = 1e-7};

    RegistrationProblem problem(const Scenario &s, bool sliding) const;
};

struct TableRow {
    std::string scenario;
    std::string method;
    double re_ssd = 0.0;
    double ncc = 0.0;
    double ssim = 0.0;
};

struct MethodRun {
    RegistrationResult lddmm;
    RegistrationResult groupoid;
};

/// Runs both methods on one scenario.
MethodRun run_methods(const Scenario &s, const TableConfig &cfg);
/// Before / LDDMM / Proposed rows for every scenario. `on_run` sees each
/// scenario's results.
std::vector<TableRow> run_table(const std::vector<Scenario> &scenarios, const TableConfig &cfg,
                                const std::function<void(const Scenario &, const MethodRun &)> &on_run = {});
std::string table_csv(const std::vector<TableRow> &rows);

} // namespace greg
