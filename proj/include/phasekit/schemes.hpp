#pragma once

#include "phasekit/legendre.hpp"
#include "phasekit/potential.hpp"
#include "phasekit/tensor.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace phasekit {

enum class Scheme { sl_bdf2, sl_cn, bootstrap1 };

inline std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::sl_bdf2: return "sl-bdf2";
        case Scheme::sl_cn: return "sl-cn";
        case Scheme::bootstrap1: return "bootstrap1";
    }
    return "?";
}

inline Scheme scheme_from_string(std::string_view s) {
    if (s == "sl-bdf2") return Scheme::sl_bdf2;
    if (s == "sl-cn") return Scheme::sl_cn;
    if (s == "bootstrap1") return Scheme::bootstrap1;
    throw std::invalid_argument("unknown scheme '" + std::string(s) + "' (expected sl-bdf2 or sl-cn)");
}

/// Physical and numerical parameters of one time integrator.
struct SchemeParams {
    double eps = 0.075;
    double gamma = 1.0;
    double tau = 0.01;
    double A = 0.0;
    double B = 0.0;
    Scheme scheme = Scheme::sl_bdf2;

    void validate() const {
        if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
        if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
        if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
        if (!(A >= 0.0)) throw std::invalid_argument("A must be >= 0");
        if (!(B >= 0.0)) throw std::invalid_argument("B must be >= 0");
    }

    /// Mass and stiffness coefficients of the constant left-hand side.
    [[nodiscard]] std::pair<double, double> lhs_coefficients() const {
        switch (scheme) {
            case Scheme::sl_bdf2: return {3.0 / (2.0 * tau * gamma) + A * tau + B, eps};
            case Scheme::sl_cn: return {1.0 / (tau * gamma) + A * tau + B, 0.5 * eps};
            case Scheme::bootstrap1: return {1.0 / (tau * gamma) + A, eps};
        }
        return {0.0, 0.0};
    }
};

struct StabilizationConstants {
    double A;
    double B;
};

/// (A, B) for which the energy law holds for every tau.
template <Potential P>
StabilizationConstants stability_constants_unconditional(double eps, double gamma, Scheme scheme, const P& potential) {
    if (!(eps > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("eps and gamma must be > 0");
    const double L = potential.lipschitz();
    const double A = gamma * L * L / (16.0 * eps * eps);
    switch (scheme) {
        case Scheme::sl_bdf2: return {A, L / eps};
        case Scheme::sl_cn: return {A, L / (2.0 * eps)};
        case Scheme::bootstrap1: break;
    }
    throw std::invalid_argument("no unconditional constants for the bootstrap scheme");
}

struct TauThresholds {
    double bdf2_any_B;   // SL-BDF2, A = 0 admissible
    double bdf2_zero;    // SL-BDF2 with A = B = 0
    double cn_zero;      // SL-CN with A = B = 0
};

template <Potential P>
TauThresholds stable_tau_thresholds(double eps, double gamma, const P& potential) {
    if (!(eps > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("eps and gamma must be > 0");
    const double L = potential.lipschitz();
    return {2.0 * eps / (L * gamma), eps / (2.0 * L * gamma), 2.0 * eps / (3.0 * L * gamma)};
}

/// (f(u), test function) for every basis product, evaluated on the 2M-point
/// tensor grid.
template <Potential P>
Field nonlinear_term(const Field& u, const P& potential, const SpectralBasis1D& basis) {
    GridValues g = to_grid(u, basis);
    for (double& v : g.data()) v = potential.f(v);
    return load_vector(g, basis);
}

/// Weak-form source term at time t (a load vector), for manufactured problems.
using Forcing = std::function<Field(double t)>;

/// Two-level history of a second-order scheme plus its factored left-hand side.
struct StepperState {
    Field phi_curr;
    Field phi_prev;
    long step_index = 1;
    DiagonalizedOperator factored_op;
};

inline DiagonalizedOperator factor_for(const SchemeParams& params, const SpectralBasis1D& basis, int dim) {
    auto [sigma, eta] = params.lhs_coefficients();
    return factor(sigma, eta, basis, dim);
}

inline StepperState make_state(Field phi0, Field phi1, const SchemeParams& params, const SpectralBasis1D& basis) {
    if (!phi0.same_shape(phi1)) throw std::invalid_argument("make_state: history shape mismatch");
    check_conforms(phi1, basis);
    params.validate();
    StepperState s;
    s.factored_op = factor_for(params, basis, phi1.dim());
    s.phi_prev = std::move(phi0);
    s.phi_curr = std::move(phi1);
    s.step_index = 1;
    return s;
}

namespace detail {

inline void check_factorization(const StepperState& state, const SchemeParams& params) {
    auto [sigma, eta] = params.lhs_coefficients();
    const auto& op = state.factored_op;
    if (op.sigma() != sigma || op.eta() != eta)
        throw std::logic_error("stepper: factored operator does not match scheme parameters");
}

}  // namespace detail

/// One SL-BDF2 step:
///   (3 phi^{n+1} - 4 phi^n + phi^{n-1}) / (2 tau gamma)
///     = eps Lap phi^{n+1} - f(2 phi^n - phi^{n-1}) / eps
///       - A tau (phi^{n+1} - phi^n) - B (phi^{n+1} - 2 phi^n + phi^{n-1})
template <Potential P>
Field step_sl_bdf2(const StepperState& state, const SchemeParams& params, const P& potential,
                   const SpectralBasis1D& basis, const Field* forcing = nullptr) {
    detail::check_factorization(state, params);
    const Field& cur = state.phi_curr;
    const Field& prev = state.phi_prev;
    const double tg = params.tau * params.gamma;

    Field combo = (2.0 / tg + params.A * params.tau + 2.0 * params.B) * cur;
    combo.axpy(-(0.5 / tg + params.B), prev);
    Field rhs = apply_mass(combo, basis);

    Field extrap = 2.0 * cur;
    extrap -= prev;
    rhs.axpy(-1.0 / params.eps, nonlinear_term(extrap, potential, basis));
    if (forcing) rhs += *forcing;
    return solve(state.factored_op, rhs);
}

/// One SL-CN step:
///   (phi^{n+1} - phi^n) / (tau gamma) = eps Lap (phi^{n+1} + phi^n) / 2
///     - f(3/2 phi^n - 1/2 phi^{n-1}) / eps
///     - A tau (phi^{n+1} - phi^n) - B (phi^{n+1} - 2 phi^n + phi^{n-1})
template <Potential P>
Field step_sl_cn(const StepperState& state, const SchemeParams& params, const P& potential,
                 const SpectralBasis1D& basis, const Field* forcing = nullptr) {
    detail::check_factorization(state, params);
    const Field& cur = state.phi_curr;
    const Field& prev = state.phi_prev;
    const double tg = params.tau * params.gamma;

    Field combo = (1.0 / tg + params.A * params.tau + 2.0 * params.B) * cur;
    combo.axpy(-params.B, prev);
    Field rhs = apply_mass(combo, basis);
    rhs.axpy(-0.5 * params.eps, apply_stiffness(cur, basis));

    Field extrap = 1.5 * cur;
    extrap.axpy(-0.5, prev);
    rhs.axpy(-1.0 / params.eps, nonlinear_term(extrap, potential, basis));
    if (forcing) rhs += *forcing;
    return solve(state.factored_op, rhs);
}

/// First-order stabilized scheme run for m substeps of tau/m:
///   (u^{k+1} - u^k) / (tau_sub gamma) = eps Lap u^{k+1} - f(u^k) / eps - A (u^{k+1} - u^k)
/// Returns u^m, the approximation of phi at time tau. `A` is taken from
/// params.A; forcing (if any) is evaluated at t0 + (k+1) tau_sub.
template <Potential P>
Field bootstrap_first_step(const Field& phi0, const SchemeParams& params, const P& potential,
                           const SpectralBasis1D& basis, int m, const Forcing& forcing = {}, double t0 = 0.0) {
    if (m < 1) throw std::invalid_argument("bootstrap_first_step: substep count must be >= 1");
    params.validate();
    check_conforms(phi0, basis);
    SchemeParams sub = params;
    sub.scheme = Scheme::bootstrap1;
    sub.tau = params.tau / m;
    auto [sigma, eta] = sub.lhs_coefficients();
    const DiagonalizedOperator op = factor(sigma, eta, basis, phi0.dim());

    Field u = phi0;
    for (int k = 0; k < m; ++k) {
        Field rhs = apply_mass(sigma * u, basis);
        rhs.axpy(-1.0 / params.eps, nonlinear_term(u, potential, basis));
        if (forcing) rhs += forcing(t0 + (k + 1) * sub.tau);
        u = solve(op, rhs);
    }
    return u;
}

/// Owns a simulation's history and cached factorization; advances one step
/// at a time with the selected second-order scheme.
template <Potential P = TruncatedDoubleWell>
class Stepper {
public:
    Stepper(std::shared_ptr<const SpectralBasis1D> basis, SchemeParams params, P potential = {})
        : basis_(std::move(basis)), params_(params), potential_(potential) {
        if (!basis_) throw std::invalid_argument("Stepper: null basis");
        params_.validate();
        if (params_.scheme == Scheme::bootstrap1)
            throw std::invalid_argument("Stepper: scheme must be sl-bdf2 or sl-cn");
    }

    /// phi^1 from the first-order bootstrap with `substeps` substeps and
    /// stabilization `bootstrap_A`.
    void start(Field phi0, int substeps, double bootstrap_A) {
        SchemeParams boot = params_;
        boot.A = bootstrap_A;
        Field phi1 = bootstrap_first_step(phi0, boot, potential_, *basis_, substeps, forcing_, 0.0);
        start_with_history(std::move(phi0), std::move(phi1));
    }

    void start_with_history(Field phi0, Field phi1) {
        const bool reuse = state_ && state_->factored_op.dim() == phi1.dim();
        if (reuse) {
            state_->phi_prev = std::move(phi0);
            state_->phi_curr = std::move(phi1);
            state_->step_index = 1;
        } else {
            state_ = make_state(std::move(phi0), std::move(phi1), params_, *basis_);
        }
    }

    void advance() {
        if (!state_) throw std::logic_error("Stepper: start() has not been called");
        std::optional<Field> load;
        if (forcing_) {
            const double t_eval = params_.scheme == Scheme::sl_bdf2 ? (state_->step_index + 1) * params_.tau
                                                                     : (state_->step_index + 0.5) * params_.tau;
            load = forcing_(t_eval);
        }
        const Field* fp = load ? &*load : nullptr;
        Field next = params_.scheme == Scheme::sl_bdf2 ? step_sl_bdf2(*state_, params_, potential_, *basis_, fp)
                                                       : step_sl_cn(*state_, params_, potential_, *basis_, fp);
        state_->phi_prev = std::move(state_->phi_curr);
        state_->phi_curr = std::move(next);
        ++state_->step_index;
    }

    /// Changes parameters; the left-hand side is refactored only if its
    /// coefficients change.
    void set_params(const SchemeParams& params) {
        params.validate();
        params_ = params;
        if (state_ && params_.lhs_coefficients() != std::make_pair(state_->factored_op.sigma(),
                                                                   state_->factored_op.eta()))
            state_->factored_op = factor_for(params_, *basis_, state_->phi_curr.dim());
    }

    void set_forcing(Forcing forcing) { forcing_ = std::move(forcing); }

    [[nodiscard]] const Field& current() const { return state().phi_curr; }
    [[nodiscard]] const Field& previous() const { return state().phi_prev; }
    [[nodiscard]] long step_index() const { return state().step_index; }
    [[nodiscard]] double time() const { return state().step_index * params_.tau; }
    [[nodiscard]] const SchemeParams& params() const { return params_; }
    [[nodiscard]] const P& potential() const { return potential_; }
    [[nodiscard]] const SpectralBasis1D& basis() const { return *basis_; }
    [[nodiscard]] const StepperState& state() const {
        if (!state_) throw std::logic_error("Stepper: start() has not been called");
        return *state_;
    }

private:
    std::shared_ptr<const SpectralBasis1D> basis_;
    SchemeParams params_;
    P potential_;
    Forcing forcing_;
    std::optional<StepperState> state_;
};

}  // namespace phasekit
