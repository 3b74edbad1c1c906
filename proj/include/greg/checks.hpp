#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace greg {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    /// Measured values against their thresholds.
    std::string detail;
    double seconds = 0.0;
};

/// Names of the acceptance checks in order: reduction, rectangle, wheel,
/// sharpness, jump_lemma, bracket, duality, conservation, gradient, groupoid,
/// diffeomorphism, metrics.
const std::vector<std::string> &check_names();

/// Runs the named checks ("all" expands to every check). `seed` shifts the
/// seeds of the random instances; 0 gives the reference instances. Results are
/// passed to `report` as they finish. Unknown names throw.
std::vector<CheckResult> run_checks(const std::vector<std::string> &names, std::uint64_t seed = 0,
                                    const std::function<void(const CheckResult &)> &report = {});

/// "PASS  3 wheel: ..." style line.
std::string format_check(const CheckResult &r);

} // namespace greg
