#pragma once

#include "phasekit/diagnostics.hpp"
#include "phasekit/legendre.hpp"
#include "phasekit/potential.hpp"
#include "phasekit/schemes.hpp"
#include "phasekit/snapshot.hpp"
#include "phasekit/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace phasekit {

/// SplitMix64 (Steele, Lea, Flood 2014): state += 0x9E3779B97F4A7C15, then
/// z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB;
/// return z ^ z>>31. Fully specified, so seeds reproduce in any language.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in the open interval (-1, 1): top 53 bits, centred in their cell.
    double uniform_pm1() {
        const double u = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
        return 2.0 * u - 1.0;
    }

private:
    std::uint64_t state_;
};

/// i.i.d. uniform(-1, 1) samples at the (2M)^d Gauss grid, x fastest.
inline GridValues random_grid_values(int dim, int M, std::uint64_t seed) {
    GridValues g(dim, 2 * M);
    SplitMix64 rng(seed);
    for (double& v : g.data()) v = rng.uniform_pm1();
    return g;
}

inline Field random_initial(int dim, const SpectralBasis1D& basis, std::uint64_t seed) {
    return to_modal(random_grid_values(dim, basis.M, seed), basis);
}

/// Field from pointwise values of a function on the Gauss grid, projected.
template <class Fn>
Field project_function(int dim, const SpectralBasis1D& basis, Fn&& fn) {
    const int Q = basis.Q();
    const auto& x = basis.quad.nodes;
    GridValues g(dim, Q);
    if (dim == 2) {
        for (int j = 0; j < Q; ++j)
            for (int i = 0; i < Q; ++i) g.at(i, j) = fn(x[i], x[j], 0.0);
    } else {
        for (int k = 0; k < Q; ++k)
            for (int j = 0; j < Q; ++j)
                for (int i = 0; i < Q; ++i) g.at(i, j, k) = fn(x[i], x[j], x[k]);
    }
    return to_modal(g, basis);
}

enum class InitKind { random_uniform, preset, file };

struct InitSpec {
    InitKind kind = InitKind::random_uniform;
    // preset: "ones", "minus-ones", "zeros", "phi1", "tanh-circle"
    std::string preset;
    std::string path;
};

/// Parameters of the relaxed random state used as the accuracy-test initial
/// value: random data evolved to t = 0.64 with eps = 0.075, gamma = 1.
struct RelaxedStateRecipe {
    double eps = 0.075;
    double gamma = 1.0;
    double tau = 1e-3;
    double t_end = 0.64;
    int bootstrap_substeps = 16;
};

inline int default_bootstrap_substeps() { return 16; }

template <Potential P>
double default_bootstrap_A(double eps, double gamma, const P& potential) {
    const double L = potential.lipschitz();
    return gamma * L * L / (16.0 * eps * eps);
}

/// Random data at `seed` relaxed to t_end with SL-BDF2 and unconditional
/// stabilization. Cached per (dim, M, seed) for the life of the process.
template <Potential P = TruncatedDoubleWell>
Field relaxed_random_state(int dim, const std::shared_ptr<const SpectralBasis1D>& basis, std::uint64_t seed,
                           const P& potential = {}, const RelaxedStateRecipe& recipe = {}) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, std::uint64_t>, Field> cache;
    const auto key = std::make_tuple(dim, basis->M, seed);
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }

    SchemeParams params;
    params.eps = recipe.eps;
    params.gamma = recipe.gamma;
    params.tau = recipe.tau;
    params.scheme = Scheme::sl_bdf2;
    const auto ab = stability_constants_unconditional(params.eps, params.gamma, params.scheme, potential);
    params.A = ab.A;
    params.B = ab.B;

    Stepper<P> stepper(basis, params, potential);
    stepper.start(random_initial(dim, *basis, seed), recipe.bootstrap_substeps,
                  default_bootstrap_A(params.eps, params.gamma, potential));
    const long steps = std::lround(recipe.t_end / recipe.tau);
    while (stepper.step_index() < steps) stepper.advance();

    std::lock_guard lock(mutex);
    return cache.emplace(key, stepper.current()).first->second;
}

template <Potential P = TruncatedDoubleWell>
Field make_initial(const InitSpec& init, int dim, const std::shared_ptr<const SpectralBasis1D>& basis,
                   std::uint64_t seed, const P& potential = {}) {
    const int M = basis->M;
    switch (init.kind) {
        case InitKind::random_uniform: return random_initial(dim, *basis, seed);
        case InitKind::file: {
            Snapshot snap = read_snapshot(init.path);
            if (snap.values.dim() != dim || snap.values.extent() != 2 * M)
                throw std::invalid_argument(init.path + ": snapshot shape does not match dim/M");
            return to_modal(snap.values, *basis);
        }
        case InitKind::preset: break;
    }
    if (init.preset == "ones") return constant_field(dim, M, 1.0);
    if (init.preset == "minus-ones") return constant_field(dim, M, -1.0);
    if (init.preset == "zeros") return constant_field(dim, M, 0.0);
    if (init.preset == "phi1") return relaxed_random_state(dim, basis, seed, potential);
    if (init.preset == "tanh-circle") {
        // circle of radius 0.5 with the equilibrium profile for eps = 0.075
        const double width = std::sqrt(2.0) * 0.075;
        return project_function(dim, *basis, [&](double x, double y, double z) {
            const double r = std::sqrt(x * x + y * y + z * z);
            return std::tanh((0.5 - r) / width);
        });
    }
    throw std::invalid_argument("unknown init preset '" + init.preset + "'");
}

struct SimulationSpec {
    int dim = 2;
    int M = 63;
    SchemeParams params;
    long steps = 1024;
    std::uint64_t seed = 1;
    InitSpec init;
    int bootstrap_substeps = 16;
    std::optional<double> bootstrap_A;  // default gamma L^2 / (16 eps^2)
    std::vector<long> snapshot_steps;
    double rel_tol = kDefaultDissipationRelTol;
    bool stop_on_violation = false;
};

struct SimulationResult {
    Field final_field;
    EnergyLedger ledger;
    std::vector<Snapshot> snapshots;
    std::optional<long> blowup_step;
    std::vector<DissipationViolation> violations;

    /// Finite throughout and modified energy non-increasing.
    [[nodiscard]] bool certified() const { return !blowup_step && violations.empty(); }
};

inline constexpr double kBlowupMagnitude = 1e100;

/// Bootstraps phi^1, then marches until step `spec.steps`. The ledger has one
/// row per level n = 1..steps (the modified energy needs two levels).
template <Potential P = TruncatedDoubleWell>
SimulationResult run_simulation(const SimulationSpec& spec, const std::shared_ptr<const SpectralBasis1D>& basis,
                                const P& potential = {}, std::optional<Field> initial = std::nullopt) {
    if (spec.steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (basis->M != spec.M) throw std::invalid_argument("basis does not match M");
    spec.params.validate();

    SimulationResult result;
    Field phi0 = initial ? std::move(*initial) : make_initial(spec.init, spec.dim, basis, spec.seed, potential);
    const double boot_A =
        spec.bootstrap_A.value_or(default_bootstrap_A(spec.params.eps, spec.params.gamma, potential));

    auto wants_snapshot = [&](long n) {
        return std::find(spec.snapshot_steps.begin(), spec.snapshot_steps.end(), n) != spec.snapshot_steps.end();
    };
    auto snapshot = [&](long n, const Field& u) {
        if (wants_snapshot(n)) result.snapshots.push_back({n, n * spec.params.tau, to_grid(u, *basis)});
    };
    snapshot(0, phi0);

    Stepper<P> stepper(basis, spec.params, potential);
    stepper.start(std::move(phi0), spec.bootstrap_substeps, boot_A);

    auto blown = [](const Field& u) { return !u.all_finite() || u.max_abs() > kBlowupMagnitude; };
    std::optional<Field> prev2;
    for (;;) {
        const long n = stepper.step_index();
        if (blown(stepper.current())) {
            result.blowup_step = n;
            break;
        }
        result.ledger.append(ledger_row(stepper.current(), stepper.previous(), prev2 ? &*prev2 : nullptr, n,
                                        spec.params, potential, *basis));
        snapshot(n, stepper.current());
        const auto& rows = result.ledger.rows();
        if (spec.stop_on_violation && rows.size() >= 2) {
            const double floor = 1e-12 * std::abs(rows.front().E_mod);
            const auto& a = rows[rows.size() - 2];
            const auto& b = rows.back();
            if (!std::isfinite(b.E_mod) || b.E_mod > a.E_mod * (1.0 + spec.rel_tol) + floor) break;
        }
        if (n >= spec.steps) break;
        prev2 = stepper.previous();
        stepper.advance();
    }
    result.final_field = stepper.current();
    result.violations = check_dissipation(result.ledger, spec.rel_tol);
    return result;
}

/// Runs fn(i) for i in [0, n) on `jobs` worker threads. The first exception
/// thrown by any job is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
    }
    if (error) std::rethrow_exception(error);
}

enum class ScanTarget { A, B };

/// A: {0..5} u {10,15..50} u {100,150..500}
inline std::vector<double> default_A_candidates() {
    std::vector<double> c;
    for (int a = 0; a <= 5; ++a) c.push_back(a);
    for (int a = 10; a <= 50; a += 5) c.push_back(a);
    for (int a = 100; a <= 500; a += 50) c.push_back(a);
    return c;
}

/// B: {0..5} u {10,15..50}
inline std::vector<double> default_B_candidates() {
    std::vector<double> c;
    for (int b = 0; b <= 5; ++b) c.push_back(b);
    for (int b = 10; b <= 50; b += 5) c.push_back(b);
    return c;
}

struct ScanSpec {
    ScanTarget target = ScanTarget::A;
    std::vector<double> taus{10.0, 1.0, 0.1, 0.01};
    std::vector<double> fixed_values{0.0, 5.0, 10.0};  // values of the other constant
    std::vector<double> candidates;                     // empty: default set for target
    int jobs = 1;
};

inline constexpr double kScanNonePassed = -1.0;

struct ScanCell {
    double tau;
    double fixed_value;
    double min_constant;  // kScanNonePassed when no candidate passes
};

struct ScanResult {
    Scheme scheme;
    ScanTarget target;
    std::vector<ScanCell> cells;  // ordered by (tau, fixed_value) as given

    [[nodiscard]] const ScanCell& at(double tau, double fixed) const {
        for (const auto& c : cells)
            if (c.tau == tau && c.fixed_value == fixed) return c;
        throw std::out_of_range("ScanResult: no such cell");
    }

    void write_csv(std::ostream& os) const {
        os << "tau,fixed_name,fixed_value,min_constant\n";
        char buf[160];
        for (const auto& c : cells) {
            std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g\n", c.tau, target == ScanTarget::A ? "B" : "A",
                          c.fixed_value, c.min_constant);
            os << buf;
        }
    }
};

/// True when the run stays finite and its modified energy never rises.
template <Potential P = TruncatedDoubleWell>
bool passes_certificate(SimulationSpec spec, const std::shared_ptr<const SpectralBasis1D>& basis, const Field& phi0,
                        const P& potential = {}) {
    spec.stop_on_violation = true;
    spec.snapshot_steps.clear();
    return run_simulation(spec, basis, potential, phi0).certified();
}

/// For each (tau, fixed value) the least candidate, in increasing order, whose
/// run passes the dissipation certificate over `base.steps` steps.
template <Potential P = TruncatedDoubleWell>
ScanResult scan_min_constant(const SimulationSpec& base, const ScanSpec& scan,
                             const std::shared_ptr<const SpectralBasis1D>& basis, const P& potential = {}) {
    if (scan.taus.empty() || scan.fixed_values.empty()) throw std::invalid_argument("scan grids must be non-empty");
    std::vector<double> candidates = scan.candidates;
    if (candidates.empty())
        candidates = scan.target == ScanTarget::A ? default_A_candidates() : default_B_candidates();
    std::sort(candidates.begin(), candidates.end());

    const Field phi0 = make_initial(base.init, base.dim, basis, base.seed, potential);

    ScanResult result{base.params.scheme, scan.target, {}};
    for (double tau : scan.taus)
        for (double fixed : scan.fixed_values) result.cells.push_back({tau, fixed, kScanNonePassed});

    parallel_for(result.cells.size(), scan.jobs, [&](std::size_t i) {
        ScanCell& cell = result.cells[i];
        for (double c : candidates) {
            SimulationSpec spec = base;
            spec.params.tau = cell.tau;
            spec.params.A = scan.target == ScanTarget::A ? c : cell.fixed_value;
            spec.params.B = scan.target == ScanTarget::A ? cell.fixed_value : c;
            if (passes_certificate(spec, basis, phi0, potential)) {
                cell.min_constant = c;
                break;
            }
        }
    });
    return result;
}

struct ConvergenceRow {
    double tau;
    double l2_error;
    std::optional<double> l2_order;
    double h1_error;
    std::optional<double> h1_order;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;

    void write_csv(std::ostream& os) const {
        os << "tau,l2_error,l2_order,h1_error,h1_order\n";
        char buf[200];
        auto opt = [](std::optional<double> v) {
            if (!v) return std::string();
            char b[40];
            std::snprintf(b, sizeof b, "%.17g", *v);
            return std::string(b);
        };
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%.17g,%s\n", r.tau, r.l2_error, opt(r.l2_order).c_str(),
                          r.h1_error, opt(r.h1_order).c_str());
            os << buf;
        }
    }
};

struct ConvergenceSpec {
    std::vector<double> taus{0.032, 0.016, 0.008, 0.004, 0.002, 0.001};
    double T = 1.28;
    std::optional<double> reference_tau;  // default min(taus) / 8
    int jobs = 1;
};

/// Number of steps of size tau that reach T, or nullopt when T/tau is not an
/// integer to 1e-9 relative.
inline std::optional<long> commensurate_steps(double T, double tau) {
    const double r = T / tau;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r)) return std::nullopt;
    return static_cast<long>(n);
}

/// State at T reached with steps of size base.params.tau from phi0.
template <Potential P = TruncatedDoubleWell>
Field evolve_to(const SimulationSpec& base, double T, const std::shared_ptr<const SpectralBasis1D>& basis,
                const Field& phi0, const P& potential = {}) {
    const auto steps = commensurate_steps(T, base.params.tau);
    if (!steps) throw std::invalid_argument("final time is not a multiple of tau");
    Stepper<P> stepper(basis, base.params, potential);
    const Field& start = phi0;
    if (*steps == 0) return start;
    stepper.start(start, base.bootstrap_substeps,
                  base.bootstrap_A.value_or(default_bootstrap_A(base.params.eps, base.params.gamma, potential)));
    while (stepper.step_index() < *steps) stepper.advance();
    return stepper.current();
}

/// Errors at T against a run with reference_tau, and observed orders
/// log(e_i / e_{i+1}) / log(tau_i / tau_{i+1}) between consecutive rows.
template <Potential P = TruncatedDoubleWell>
ConvergenceTable convergence_study(const SimulationSpec& base, const ConvergenceSpec& conv,
                                   const std::shared_ptr<const SpectralBasis1D>& basis, const P& potential = {}) {
    if (conv.taus.empty()) throw std::invalid_argument("tau list must be non-empty");
    const double ref_tau = conv.reference_tau.value_or(*std::min_element(conv.taus.begin(), conv.taus.end()) / 8.0);
    if (!commensurate_steps(conv.T, ref_tau))
        throw std::invalid_argument("final time is not a multiple of the reference tau");
    for (double tau : conv.taus)
        if (!commensurate_steps(conv.T, tau)) throw std::invalid_argument("final time is not a multiple of every tau");

    const Field phi0 = make_initial(base.init, base.dim, basis, base.seed, potential);

    // index 0: reference
    std::vector<double> taus{ref_tau};
    taus.insert(taus.end(), conv.taus.begin(), conv.taus.end());
    std::vector<Field> finals(taus.size());
    parallel_for(taus.size(), conv.jobs, [&](std::size_t i) {
        SimulationSpec spec = base;
        spec.params.tau = taus[i];
        finals[i] = evolve_to(spec, conv.T, basis, phi0, potential);
    });

    ConvergenceTable table;
    for (std::size_t i = 1; i < taus.size(); ++i) {
        const Field err = finals[i] - finals[0];
        ConvergenceRow row{taus[i], norm_L2(err, *basis), std::nullopt, norm_H1(err, *basis), std::nullopt};
        if (!table.rows.empty()) {
            const auto& p = table.rows.back();
            const double ratio = std::log(p.tau / row.tau);
            if (ratio != 0.0 && p.l2_error > 0.0 && row.l2_error > 0.0)
                row.l2_order = std::log(p.l2_error / row.l2_error) / ratio;
            if (ratio != 0.0 && p.h1_error > 0.0 && row.h1_error > 0.0)
                row.h1_order = std::log(p.h1_error / row.h1_error) / ratio;
        }
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace phasekit
