#pragma once

#include "phasekit/potential.hpp"
#include "phasekit/schemes.hpp"
#include "phasekit/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasekit {

/// Discrete L2 inner product (u, v) = u^T Mass_d v.
inline double inner_l2(const Field& u, const Field& v, const SpectralBasis1D& basis) {
    return dot(apply_mass(u, basis), v);
}

/// (grad u, grad v) = u^T Stiff_d v.
inline double inner_grad(const Field& u, const Field& v, const SpectralBasis1D& basis) {
    return dot(apply_stiffness(u, basis), v);
}

inline double norm_L2(const Field& u, const SpectralBasis1D& basis) {
    return std::sqrt(std::max(0.0, inner_l2(u, u, basis)));
}

inline double norm_H1(const Field& u, const SpectralBasis1D& basis) {
    return std::sqrt(std::max(0.0, inner_l2(u, u, basis) + inner_grad(u, u, basis)));
}

/// Integral of F(u) over the domain by the tensor Gauss rule.
template <Potential P>
double bulk_integral(const Field& u, const P& potential, const SpectralBasis1D& basis) {
    GridValues g = to_grid(u, basis);
    for (double& v : g.data()) v = potential.F(v);
    // (F(u), 1) is the phi_0 x ... x phi_0 entry of the load vector
    const auto& w = basis.quad.weights;
    const int Q = basis.Q();
    double sum = 0.0;
    if (g.dim() == 2) {
        for (int j = 0; j < Q; ++j)
            for (int i = 0; i < Q; ++i) sum += w[i] * w[j] * g.at(i, j);
    } else {
        for (int k = 0; k < Q; ++k)
            for (int j = 0; j < Q; ++j)
                for (int i = 0; i < Q; ++i) sum += w[i] * w[j] * w[k] * g.at(i, j, k);
    }
    return sum;
}

/// Ginzburg-Landau energy (eps/2)|grad u|^2 + (1/eps) int F(u).
template <Potential P>
double energy_eps(const Field& u, double eps, const P& potential, const SpectralBasis1D& basis) {
    return 0.5 * eps * inner_grad(u, u, basis) + bulk_integral(u, potential, basis) / eps;
}

/// Coefficient of ||phi^{n+1} - phi^n||^2 in the scheme's modified energy.
template <Potential P>
double modified_energy_penalty(const SchemeParams& params, const P& potential) {
    const double L = potential.lipschitz();
    switch (params.scheme) {
        case Scheme::sl_bdf2: return 1.0 / (4.0 * params.tau * params.gamma) + L / (2.0 * params.eps) + 0.5 * params.B;
        case Scheme::sl_cn: return L / (4.0 * params.eps) + 0.5 * params.B;
        case Scheme::bootstrap1: break;
    }
    throw std::invalid_argument("modified energy is defined for sl-bdf2 and sl-cn only");
}

/// E_B (SL-BDF2) or E_C (SL-CN) at level n+1.
template <Potential P>
double energy_modified(const Field& phi_curr, const Field& phi_prev, const SchemeParams& params, const P& potential,
                       const SpectralBasis1D& basis) {
    const Field dt = phi_curr - phi_prev;
    return energy_eps(phi_curr, params.eps, potential, basis) +
           modified_energy_penalty(params, potential) * inner_l2(dt, dt, basis);
}

struct LedgerRow {
    long step = 0;
    double time = 0.0;
    double E_eps = 0.0;
    double E_mod = 0.0;
    double dt_norm = 0.0;
    double dtt_norm = 0.0;
};

class EnergyLedger {
public:
    void append(const LedgerRow& row) {
        if (!rows_.empty() && row.step <= rows_.back().step)
            throw std::invalid_argument("EnergyLedger: steps must be strictly increasing");
        rows_.push_back(row);
    }

    [[nodiscard]] const std::vector<LedgerRow>& rows() const { return rows_; }
    [[nodiscard]] std::size_t size() const { return rows_.size(); }
    [[nodiscard]] bool empty() const { return rows_.empty(); }
    [[nodiscard]] const LedgerRow& back() const { return rows_.back(); }

    void write_csv(std::ostream& os) const {
        os << "step,time,E_eps,E_mod,dt_norm,dtt_norm\n";
        char buf[256];
        for (const auto& r : rows_) {
            std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.time, r.E_eps, r.E_mod,
                          r.dt_norm, r.dtt_norm);
            os << buf;
        }
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        write_csv(out);
    }

    friend bool operator==(const EnergyLedger& a, const EnergyLedger& b) {
        if (a.rows_.size() != b.rows_.size()) return false;
        for (std::size_t i = 0; i < a.rows_.size(); ++i) {
            const auto& x = a.rows_[i];
            const auto& y = b.rows_[i];
            if (x.step != y.step || x.time != y.time || x.E_eps != y.E_eps || x.E_mod != y.E_mod ||
                x.dt_norm != y.dt_norm || x.dtt_norm != y.dtt_norm)
                return false;
        }
        return true;
    }

private:
    std::vector<LedgerRow> rows_;
};

/// Ledger row for the current level of a running stepper.
template <Potential P>
LedgerRow ledger_row(const Field& phi_curr, const Field& phi_prev, const Field* phi_prev2, long step,
                     const SchemeParams& params, const P& potential, const SpectralBasis1D& basis) {
    LedgerRow row;
    row.step = step;
    row.time = step * params.tau;
    row.E_eps = energy_eps(phi_curr, params.eps, potential, basis);
    const Field dt = phi_curr - phi_prev;
    const double dt2 = inner_l2(dt, dt, basis);
    row.E_mod = row.E_eps + modified_energy_penalty(params, potential) * dt2;
    row.dt_norm = std::sqrt(std::max(0.0, dt2));
    if (phi_prev2) {
        Field dtt = phi_curr - 2.0 * phi_prev;
        dtt += *phi_prev2;
        row.dtt_norm = norm_L2(dtt, basis);
    }
    return row;
}

struct DissipationViolation {
    long step;        // step whose modified energy rose
    double previous;  // E_mod at the preceding row
    double current;
};

inline constexpr double kDefaultDissipationRelTol = 1e-10;

/// Steps where E_mod^{n+1} > E_mod^n (1 + rel_tol) + abs_floor; abs_floor
/// defaults to 1e-12 |E_mod| of the first row.
inline std::vector<DissipationViolation> check_dissipation(const EnergyLedger& ledger,
                                                           double rel_tol = kDefaultDissipationRelTol,
                                                           std::optional<double> abs_floor = std::nullopt) {
    std::vector<DissipationViolation> out;
    const auto& rows = ledger.rows();
    if (rows.size() < 2) return out;
    const double floor = abs_floor.value_or(1e-12 * std::abs(rows.front().E_mod));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double prev = rows[i - 1].E_mod;
        const double cur = rows[i].E_mod;
        if (!std::isfinite(cur) || cur > prev * (1.0 + rel_tol) + floor) out.push_back({rows[i].step, prev, cur});
    }
    return out;
}

}  // namespace phasekit
