#include "greg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "greg/checks.hpp"
#include "greg/io.hpp"

namespace greg {

namespace {

constexpr int kUsage = 1, kIo = 2, kNumerical = 3, kChecks = 4;

void add_settings(CLI::App *app, Settings &s, bool registration)
{
    app->add_option("--steps", s.steps, "Time steps over unit time")->check(CLI::PositiveNumber);
    app->add_option("--inertia", s.inertia, "Inertia operator")->check(CLI::IsMember({"gaussian", "helmholtz"}));
    app->add_option("--sigma", s.sigma, "Gaussian kernel width (domain units)")->check(CLI::PositiveNumber);
    app->add_option("--alpha", s.alpha, "Helmholtz alpha")->check(CLI::NonNegativeNumber);
    app->add_option("--inertia_gamma", s.inertia_gamma, "Helmholtz gamma")->check(CLI::PositiveNumber);
    app->add_option("--order", s.order, "Helmholtz order")->check(CLI::PositiveNumber);
    if (!registration) return;
    app->add_option("--sim", s.sim, "Similarity measure")->check(CLI::IsMember({"lncc", "ssd"}));
    app->add_option("--lncc_window", s.lncc_window, "LNCC window std in pixels")->check(CLI::PositiveNumber);
    app->add_option("--reg_weight", s.reg_weight, "Weight of the kinetic energy term")->check(CLI::NonNegativeNumber);
    app->add_option("--iters", s.opt.iters, "Maximum optimizer iterations")->check(CLI::NonNegativeNumber);
    app->add_option("--step_size", s.opt.step_size, "First trial step in grid cells")->check(CLI::PositiveNumber);
    app->add_option("--line_search", s.opt.line_search, "Armijo backtracking");
    app->add_option("--tol", s.opt.tol, "Relative energy decrease to stop at")->check(CLI::NonNegativeNumber);
    app->add_option("--max_halvings", s.opt.max_halvings, "Line-search halvings per iteration")->check(CLI::NonNegativeNumber);
    app->add_option("--armijo_c", s.opt.armijo_c, "Sufficient-decrease constant")->check(CLI::Range(0.0, 1.0));
}

CLI::App *subcommand(CLI::App &app, const char *name, const char *desc, std::string &config)
{
    CLI::App *sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config, "Key-value config file (key = value per line, # comments); flags override its values")
        ->check(CLI::ExistingFile);
    return sub;
}

std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string unquote(std::string v)
{
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
    return v;
}

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

std::vector<ConfigEntry> read_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    std::vector<ConfigEntry> out;
    std::string line;
    for (int no = 1; std::getline(in, line); ++no) {
        const auto hash = line.find('#');
        if (hash != std::string::npos && line.find_first_of("\"'") > hash) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(no) + ": expected key = value");
        out.push_back({trim(line.substr(0, eq)), unquote(trim(line.substr(eq + 1))), no});
    }
    return out;
}

// Config values are added as results before the command line is parsed, for
// every key whose flag is not also given on the command line.
void apply_config(CLI::App *sub, const std::string &path, const std::vector<std::string> &args)
{
    for (const ConfigEntry &e : read_config(path)) {
        const std::string flag = "--" + e.key;
        CLI::Option *opt = e.key == "config" ? nullptr : sub->get_option_no_throw(flag);
        if (!opt) throw UsageError(path + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "' for " + sub->get_name());
        const bool on_command_line = std::any_of(args.begin(), args.end(), [&](const std::string &a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
        if (!on_command_line) opt->add_result(e.value);
    }
}

// Everything set for the command, in the format read_config accepts.
std::string resolved_config(const CLI::App *sub)
{
    std::string out;
    for (const CLI::Option *opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        std::string value;
        if (opt->count() > 0) {
            for (const std::string &r : opt->results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
            if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
        }
        if (!value.empty()) out += name + " = " + value + "\n";
    }
    return out;
}

double default_amount(const std::string &scenario) { return scenario == "wheel" ? 5.0 : 0.1; }

RegistrationProblem make_problem(const Settings &s, ScalarField moving, ScalarField fixed, InterfacePtr iface)
{
    RegistrationProblem p;
    p.moving = std::move(moving);
    p.fixed = std::move(fixed);
    p.interface = std::move(iface);
    p.inertia = s.inertia_operator();
    p.steps = s.steps;
    p.sim = s.sim_kind();
    p.lncc_window = s.lncc_window;
    p.reg_weight = s.reg_weight;
    return p;
}

std::string metrics_csv(const ScalarField &moving, const ScalarField &fixed, const ScalarField &warped)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "re_ssd_percent,ncc,ssim\n%.4f,%.6f,%.6f\n", re_ssd(moving, fixed, warped), ncc_metric(fixed, warped), ssim(fixed, warped));
    return buf;
}

ScalarField abs_difference(const ScalarField &a, const ScalarField &b)
{
    ScalarField d = a - b;
    for (double &x : d.values) x = std::abs(x);
    return d;
}

void write_renders(const fs::path &dir, const std::string &prefix, const ScalarField &fixed, const RegistrationResult &r)
{
    write_png(dir / (prefix + "warped.png"), r.warped);
    write_png(dir / (prefix + "difference.png"), abs_difference(fixed, r.warped));
    write_png(dir / (prefix + "overlay.png"), render_overlay(fixed, r.warped, r.element.gamma_trg));
    write_png(dir / (prefix + "quiver.png"), render_quiver(r.element, r.warped));
}

int cmd_synth(const CliConfig &c)
{
    if (c.scenario == "rectangle" && c.degrees) throw UsageError("--degrees applies to the wheel scenario");
    if (c.scenario == "wheel" && c.shift) throw UsageError("--shift applies to the rectangle scenario");
    const double amount = c.shift.value_or(c.degrees.value_or(default_amount(c.scenario)));
    Scenario s = make_scenario(c.scenario, c.n, amount);
    if (c.noise > 0.0) {
        std::mt19937_64 rng(c.seed);
        std::normal_distribution<double> nd(0.0, c.noise);
        for (double &x : s.moving.values) x += nd(rng);
        for (double &x : s.fixed.values) x += nd(rng);
    }
    const fs::path out = c.out;
    write_field(out / "moving.field", s.moving);
    write_field(out / "fixed.field", s.fixed);
    write_png(out / "moving.png", s.moving);
    write_png(out / "fixed.png", s.fixed);
    write_field(out / "boundary.sdf", s.truth_interface->sdf());
    if (s.truth_element) write_element(out / "truth", *s.truth_element);
    std::printf("wrote %s scenario (n %d, amount %g) to %s\n", s.name.c_str(), c.n, amount, out.string().c_str());
    return 0;
}

int cmd_register(const CliConfig &c)
{
    ScalarField moving = read_image(c.moving), fixed = read_image(c.fixed);
    require_same_grid(moving.grid, fixed.grid, "moving and fixed images");
    InterfacePtr iface;
    if (!c.boundary.empty()) {
        iface = read_interface(c.boundary);
        require_same_grid(iface->grid(), moving.grid, "boundary and images");
    }
    const bool lddmm = c.method == "lddmm";
    const RegistrationProblem p = make_problem(c.settings, moving, fixed, lddmm ? nullptr : iface);
    const RegistrationResult r = lddmm ? register_lddmm(p, c.settings.opt) : register_images(p, c.settings.opt);

    const fs::path out = c.out;
    write_field(out / "warped.field", r.warped);
    write_element(out / "element", r.element);
    write_text(out / "energy_trace.csv", energy_trace_csv(r.energy_trace));
    write_text(out / "config.cfg", c.resolved);
    write_renders(out, "", fixed, r);
    std::string metrics;
    try {
        metrics = metrics_csv(moving, fixed, r.warped);
        write_text(out / "metrics.csv", metrics);
    } catch (const Error &) {
        // identical or constant inputs leave the metrics undefined
    }
    std::printf("%s: %d iterations, energy %.6g -> %.6g%s\n", c.method.c_str(), r.iterations, r.energy_trace.front().total,
                r.energy_trace.back().total, r.converged ? ", converged" : "");
    if (!lddmm && iface) std::printf("max normal jump %.3g\n", r.max_normal_jump);
    std::fputs(metrics.c_str(), stdout);
    return 0;
}

int cmd_shoot(const CliConfig &c)
{
    const InterfacePtr iface = c.gamma.empty() ? nullptr : read_interface(c.gamma);
    const OneFormDensity m0 = read_density(c.m0, iface);
    const MomentumTrajectory traj = shoot(m0, c.settings.steps, c.settings.inertia_operator());
    const auto rows = write_trajectory(c.out, traj);
    double drift = 0.0;
    for (const auto &row : rows) drift = std::max(drift, std::abs(row.hamiltonian - rows.front().hamiltonian));
    std::printf("%zu steps, H %.6g, max drift %.3g, min jacobian %.4g\n", rows.size() - 1, rows.front().hamiltonian, drift,
                rows.back().min_jacobian);
    return 0;
}

int cmd_evaluate(const CliConfig &c)
{
    const ScalarField moving = read_image(c.moving), fixed = read_image(c.fixed);
    require_same_grid(moving.grid, fixed.grid, "moving and fixed images");
    ScalarField warped;
    if (!c.element.empty()) {
        const GroupoidElement e = read_element(c.element);
        require_same_grid(e.grid, moving.grid, "element and images");
        warped = act_on_image(e, moving);
    } else {
        warped = read_image(c.warped);
        require_same_grid(warped.grid, fixed.grid, "warped and fixed images");
    }
    const std::string csv = metrics_csv(moving, fixed, warped);
    if (!c.out.empty()) write_text(c.out, csv);
    std::fputs(csv.c_str(), stdout);
    return 0;
}

int cmd_table(const CliConfig &c)
{
    std::vector<Scenario> scenarios;
    for (const std::string &name : c.scenarios) scenarios.push_back(make_scenario(name, c.n, default_amount(name)));
    TableConfig cfg;
    cfg.inertia = c.settings.inertia_operator();
    cfg.steps = c.settings.steps;
    cfg.sim = c.settings.sim_kind();
    cfg.lncc_window = c.settings.lncc_window;
    cfg.reg_weight = c.settings.reg_weight;
    cfg.opt = c.settings.opt;
    const auto renders = [&](const Scenario &s, const MethodRun &run) {
        const fs::path dir = fs::path(c.renders) / s.name;
        write_png(dir / "moving.png", s.moving);
        write_png(dir / "fixed.png", s.fixed);
        write_renders(dir, "lddmm_", s.fixed, run.lddmm);
        write_renders(dir, "proposed_", s.fixed, run.groupoid);
    };
    const std::string csv = table_csv(run_table(scenarios, cfg, c.renders.empty() ? nullptr : std::function(renders)));
    write_text(c.out, csv);
    std::fputs(csv.c_str(), stdout);
    return 0;
}

int cmd_check(const CliConfig &c)
{
    bool ok = true;
    run_checks(c.suites, c.seed, [&](const CheckResult &r) {
        std::printf("%s\n", format_check(r).c_str());
        std::fflush(stdout);
        ok = ok && r.passed;
    });
    return ok ? 0 : kChecks;
}

} // namespace

InertiaOperator Settings::inertia_operator() const
{
    InertiaOperator op = inertia == "helmholtz" ? InertiaOperator::helmholtz(alpha, inertia_gamma, order) : InertiaOperator::gaussian(sigma);
    op.validate();
    return op;
}

SimKind Settings::sim_kind() const { return sim == "ssd" ? SimKind::ssd : SimKind::lncc; }

CliConfig parse_args(int argc, const char *const *argv)
{
    CliConfig c;
    Settings reg, shoot_settings, table_settings;
    shoot_settings.steps = 20;
    {
        const TableConfig t;
        table_settings.steps = t.steps;
        table_settings.sigma = t.inertia.sigma;
        table_settings.lncc_window = t.lncc_window;
        table_settings.reg_weight = t.reg_weight;
        table_settings.opt = t.opt;
    }

    CLI::App app{"Piecewise-diffeomorphic image registration with sliding interfaces", "greg"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Print help for every command");

    CLI::App *synth = subcommand(app, "synth", "Write a benchmark scenario", c.config_file);
    synth->add_option("--scenario", c.scenario, "Scenario name")->check(CLI::IsMember({"rectangle", "wheel"}));
    synth->add_option("--n", c.n, "Grid size")->check(CLI::Range(8, 4096));
    synth->add_option("--shift", c.shift, "Rectangle half shift (default 0.1)");
    synth->add_option("--degrees", c.degrees, "Wheel rotation (default 5)");
    synth->add_option("--noise", c.noise, "Std of additive Gaussian noise")->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", c.seed, "Noise seed");
    synth->add_option("--out", c.out, "Output directory")->required();

    CLI::App *reg_cmd = subcommand(app, "register", "Register a moving image to a fixed image", c.config_file);
    reg_cmd->add_option("--moving", c.moving, "Moving image (PNG, PGM or field file)")->required()->check(CLI::ExistingFile);
    reg_cmd->add_option("--fixed", c.fixed, "Fixed image")->required()->check(CLI::ExistingFile);
    reg_cmd->add_option("--boundary", c.boundary, "Sliding boundary: level-set field file or label image")->check(CLI::ExistingFile);
    reg_cmd->add_option("--method", c.method, "groupoid or lddmm")->check(CLI::IsMember({"groupoid", "lddmm"}));
    reg_cmd->add_option("--out", c.out, "Result directory")->required();
    add_settings(reg_cmd, reg, true);

    CLI::App *shoot_cmd = subcommand(app, "shoot", "Integrate the geodesic equations from an initial momentum", c.config_file);
    shoot_cmd->add_option("--m0", c.m0, "Initial momentum: vector field file or momentum manifest")->required()->check(CLI::ExistingFile);
    shoot_cmd->add_option("--gamma", c.gamma, "Interface level set")->check(CLI::ExistingFile);
    shoot_cmd->add_option("--out", c.out, "Trajectory directory")->required();
    add_settings(shoot_cmd, shoot_settings, false);

    CLI::App *eval = subcommand(app, "evaluate", "Re_SSD, NCC and SSIM of a registration result", c.config_file);
    eval->add_option("--moving", c.moving, "Moving image")->required()->check(CLI::ExistingFile);
    eval->add_option("--fixed", c.fixed, "Fixed image")->required()->check(CLI::ExistingFile);
    auto *warped = eval->add_option("--warped", c.warped, "Warped image")->check(CLI::ExistingFile);
    auto *element = eval->add_option("--element", c.element, "Element directory applied to the moving image")->check(CLI::ExistingDirectory);
    warped->excludes(element);
    eval->add_option("--out", c.out, "CSV file");

    CLI::App *table = subcommand(app, "table", "Before / LDDMM / Proposed comparison on the benchmark scenarios", c.config_file);
    table->add_option("--scenarios", c.scenarios, "Comma-separated scenario names")->delimiter(',')->check(CLI::IsMember({"rectangle", "wheel"}));
    table->add_option("--n", c.n, "Grid size")->check(CLI::Range(8, 4096));
    table->add_option("--out", c.out, "CSV report")->required();
    table->add_option("--renders", c.renders, "Directory for PNG renders of every run");
    add_settings(table, table_settings, true);

    CLI::App *check = subcommand(app, "check", "Run the acceptance checks", c.config_file);
    check->add_option("--suite", c.suites, "Comma-separated check names or all")->delimiter(',');
    check->add_option("--seed", c.seed, "Shift of the random instance seeds");

    const std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // the command is the first non-flag argument; its config file is read first
        const auto first = std::find_if(args.begin(), args.end(), [](const std::string &a) { return a.empty() || a[0] != '-'; });
        CLI::App *target = nullptr;
        if (first != args.end()) {
            try {
                target = app.get_subcommand(*first);
            } catch (const CLI::OptionNotFound &) {
            }
        }
        const bool wants_help = std::any_of(args.begin(), args.end(), [](const std::string &a) { return a == "-h" || a == "--help" || a == "--help-all"; });
        if (target && !wants_help) {
            for (auto it = first; it != args.end(); ++it) {
                if (*it == "--config" && it + 1 != args.end()) apply_config(target, *(it + 1), args);
                if (it->rfind("--config=", 0) == 0) apply_config(target, it->substr(9), args);
            }
        }
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp &) {
        c.help = app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help();
        return c;
    } catch (const CLI::CallForAllHelp &) {
        c.help = app.help("", CLI::AppFormatMode::All);
        return c;
    } catch (const CLI::ParseError &e) {
        throw UsageError(e.what());
    }

    CLI::App *sub = app.get_subcommands().front();
    c.command = sub->get_name();
    if (sub == reg_cmd && c.method == "groupoid" && c.boundary.empty())
        std::fprintf(stderr, "note: no --boundary given, registering without a sliding interface\n");
    if (sub == eval && c.warped.empty() && c.element.empty()) throw UsageError("evaluate needs --warped or --element");
    if (sub == reg_cmd) c.settings = reg;
    if (sub == shoot_cmd) c.settings = shoot_settings;
    if (sub == table) c.settings = table_settings;
    c.resolved = resolved_config(sub);
    return c;
}

int run(const CliConfig &c)
{
    if (c.command.empty()) {
        std::fputs(c.help.c_str(), stdout);
        return 0;
    }
    try {
        if (c.command == "synth") return cmd_synth(c);
        if (c.command == "register") return cmd_register(c);
        if (c.command == "shoot") return cmd_shoot(c);
        if (c.command == "evaluate") return cmd_evaluate(c);
        if (c.command == "table") return cmd_table(c);
        if (c.command == "check") return cmd_check(c);
        throw UsageError("unknown command: " + c.command);
    } catch (const UsageError &e) {
        std::fprintf(stderr, "greg: %s\n", e.what());
        return kUsage;
    } catch (const Error &e) {
        std::fprintf(stderr, "greg: %s\n", e.what());
        switch (e.kind()) {
        case ErrorKind::invalid_argument: return kUsage;
        case ErrorKind::io: return kIo;
        default: return kNumerical;
        }
    } catch (const fs::filesystem_error &e) {
        std::fprintf(stderr, "greg: %s\n", e.what());
        return kIo;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "greg: %s\n", e.what());
        return kNumerical;
    }
}

int cli_main(int argc, const char *const *argv)
{
    CliConfig c;
    try {
        c = parse_args(argc, argv);
    } catch (const UsageError &e) {
        std::fprintf(stderr, "greg: %s\nRun with --help for usage.\n", e.what());
        return kUsage;
    }
    return run(c);
}

} // namespace greg
