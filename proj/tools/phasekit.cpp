// phasekit command-line tool.
//
//   phasekit run|scan|converge|validate-config --config FILE [--set key=value]...
//            [--jobs N] [--output-dir DIR]
//
// Exit status: 0 success, 1 runtime error, 2 configuration error, 3 blow-up in run.

#include "phasekit/config.hpp"
#include "phasekit/phasekit.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
namespace pk = phasekit;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBlowup = 3;

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    int jobs = 0;  // 0: PHASEKIT_JOBS, then the config value
    std::string output_dir;
    bool quiet = false;
};

int env_jobs() {
    const char* v = std::getenv("PHASEKIT_JOBS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw pk::ConfigError("PHASEKIT_JOBS", "must be a positive integer");
    return static_cast<int>(n);
}

pk::ExperimentConfig load(const Options& opt) {
    auto cfg = pk::load_config(opt.config, opt.overrides);
    int jobs = opt.jobs > 0 ? opt.jobs : env_jobs();
    if (jobs > 0) {
        cfg.jobs = jobs;
        cfg.scan.jobs = jobs;
        cfg.converge.jobs = jobs;
    }
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    for (const auto* init : {&cfg.sim.init, &cfg.converge_sim.init})
        if (init->kind == pk::InitKind::file && !fs::is_regular_file(init->path))
            throw pk::ConfigError(opt.config, "initial-state file '" + init->path + "' does not exist");
    return cfg;
}

fs::path prepare_output(const pk::ExperimentConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    std::ofstream(dir / "resolved_config.json") << cfg.resolved.dump(2) << '\n';
    return dir;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

int cmd_run(const Options& opt) {
    const auto cfg = load(opt);
    const auto dir = prepare_output(cfg);
    const auto basis = std::make_shared<const pk::SpectralBasis1D>(pk::build_basis(cfg.sim.M));

    const auto t0 = std::chrono::steady_clock::now();
    const auto result = pk::run_simulation(cfg.sim, basis);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    result.ledger.write_csv((dir / "ledger.csv").string());
    for (const auto& snap : result.snapshots) {
        const std::string stem = "snapshot_" + std::to_string(snap.step);
        pk::write_snapshot((dir / (stem + ".pfk")).string(), snap);
        if (cfg.slices)
            pk::write_slices_csv((dir / ("slices_" + std::to_string(snap.step) + ".csv")).string(),
                                 pk::to_modal(snap.values, *basis), *basis);
    }

    if (result.blowup_step) {
        std::cerr << "blow-up at step " << *result.blowup_step << '\n';
        return kExitBlowup;
    }
    if (!opt.quiet) {
        const auto& rows = result.ledger.rows();
        std::cout << "scheme " << pk::to_string(cfg.sim.params.scheme) << ", A=" << fmt(cfg.sim.params.A)
                  << ", B=" << fmt(cfg.sim.params.B) << ", tau=" << fmt(cfg.sim.params.tau) << '\n'
                  << "steps " << rows.back().step << ", E_eps " << fmt(rows.front().E_eps) << " -> "
                  << fmt(rows.back().E_eps) << '\n'
                  << "dissipation " << (result.violations.empty() ? "certified" : "violated") << " ("
                  << result.violations.size() << " violations), " << fmt(secs) << " s\n";
    }
    return 0;
}

int cmd_scan(const Options& opt) {
    const auto cfg = load(opt);
    const auto dir = prepare_output(cfg);
    const auto basis = std::make_shared<const pk::SpectralBasis1D>(pk::build_basis(cfg.sim.M));
    for (const auto scheme : cfg.scan_schemes) {
        auto base = cfg.sim;
        base.params.scheme = scheme;
        const auto result = pk::scan_min_constant(base, cfg.scan, basis);
        const auto path = dir / ("scan_" + std::string(pk::to_string(scheme)) + ".csv");
        std::ofstream os(path);
        result.write_csv(os);
        if (!opt.quiet) std::cout << "wrote " << path.string() << '\n';
    }
    return 0;
}

int cmd_converge(const Options& opt) {
    const auto cfg = load(opt);
    const auto dir = prepare_output(cfg);
    const auto basis = std::make_shared<const pk::SpectralBasis1D>(pk::build_basis(cfg.converge_sim.M));
    for (const auto scheme : cfg.converge_schemes) {
        auto base = cfg.converge_sim;
        base.params.scheme = scheme;
        const auto table = pk::convergence_study(base, cfg.converge, basis);
        const auto path = dir / ("convergence_" + std::string(pk::to_string(scheme)) + ".csv");
        std::ofstream os(path);
        table.write_csv(os);
        if (!opt.quiet) std::cout << "wrote " << path.string() << '\n';
    }
    return 0;
}

int cmd_validate(const Options& opt) {
    load(opt);
    if (!opt.quiet) std::cout << opt.config << ": ok\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral Allen-Cahn solver with stabilized second-order schemes"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", opt.config, "JSON configuration file")->required();
        sub->add_option("--set", opt.overrides, "Override a config key, e.g. --set tau=0.01 or scan.vary=B");
        sub->add_option("-j,--jobs", opt.jobs, "Worker threads (default: PHASEKIT_JOBS, then config)")
            ->check(CLI::PositiveNumber);
        sub->add_option("-o,--output-dir", opt.output_dir, "Output directory (default: config output_dir)");
        sub->add_flag("-q,--quiet", opt.quiet, "Suppress the summary on stdout");
    };

    int (*handler)(const Options&) = nullptr;

    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Options&);
    };
    for (const Sub& s : {Sub{"run", "Run one simulation and write its energy ledger", cmd_run},
                         Sub{"scan", "Find minimal stabilization constants over a (tau, constant) grid", cmd_scan},
                         Sub{"converge", "Temporal convergence study against a fine reference", cmd_converge},
                         Sub{"validate-config", "Check a configuration without running", cmd_validate}}) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub);
        sub->callback([&handler, fn = s.fn] { handler = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        return handler(opt);
    } catch (const pk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
