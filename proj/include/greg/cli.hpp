#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "greg/bench.hpp"

namespace greg {

/// Problem and optimizer settings shared by register, shoot and table.
struct Settings {
    int steps = 10;
    /// gaussian or helmholtz
    std::string inertia = "gaussian";
    double sigma = 0.05;
    double alpha = 0.01;
    double inertia_gamma = 1.0;
    int order = 1;
    /// lncc or ssd
    std::string sim = "lncc";
    double lncc_window = 5.0;
    double reg_weight = 1.0;
    RegistrationOptions opt;

    InertiaOperator inertia_operator() const;
    SimKind sim_kind() const;
};

struct CliConfig {
    /// synth, register, shoot, evaluate, table or check; empty after --help.
    std::string command;
    std::string out;
    std::string config_file;

    // synth
    std::string scenario = "rectangle";
    int n = 64;
    std::optional<double> shift;
    std::optional<double> degrees;
    double noise = 0.0;

    // register / evaluate
    std::string moving;
    std::string fixed;
    std::string boundary;
    /// groupoid or lddmm
    std::string method = "groupoid";
    std::string warped;
    std::string element;

    // shoot
    std::string m0;
    std::string gamma;

    // table / check
    std::vector<std::string> scenarios{"rectangle", "wheel"};
    std::string renders;
    std::vector<std::string> suites{"all"};

    std::uint64_t seed = 0;
    Settings settings;
    /// Resolved settings as config-file text (flags merged over the file).
    std::string resolved;
    /// Help or version text when parsing stopped early.
    std::string help;
};

/// Bad flags, missing inputs or an invalid config file.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses `greg <command> [flags]`. Flags override values from --config,
/// which override the defaults. Unknown flags or config keys throw
/// UsageError; --help fills `help` and leaves `command` empty.
CliConfig parse_args(int argc, const char *const *argv);

/// Executes a parsed command. Exit codes: 0 success, 1 usage, 2 I/O,
/// 3 numerical failure, 4 failed checks.
int run(const CliConfig &config);

/// parse_args + run with errors reported on stderr.
int cli_main(int argc, const char *const *argv);

} // namespace greg
