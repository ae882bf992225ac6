#pragma once

#include <cmath>
#include <concepts>

namespace phasekit {

/// Bulk potential F with derivative f = F' and bounds on f', f''.
template <class P>
concept Potential = requires(const P p, double phi) {
    { p.F(phi) } -> std::convertible_to<double>;
    { p.f(phi) } -> std::convertible_to<double>;
    { p.df(phi) } -> std::convertible_to<double>;
    { p.lipschitz() } -> std::convertible_to<double>;
    { p.second_lipschitz() } -> std::convertible_to<double>;
};

struct LipschitzConstants {
    double L;   // sup |f'|
    double L2;  // ess sup |f''|
};

/// Double well (phi^2 - 1)^2 / 4 on [-2, 2], continued by quadratics with
/// matching value, slope and curvature outside. C^2 with |f'| <= 11 and
/// |f''| <= 12 everywhere.
struct TruncatedDoubleWell {
    static constexpr double cut = 2.0;

    [[nodiscard]] constexpr double F(double phi) const {
        if (phi > cut) {
            const double s = phi - cut;
            return 5.5 * s * s + 6.0 * s + 2.25;
        }
        if (phi < -cut) {
            const double s = phi + cut;
            return 5.5 * s * s - 6.0 * s + 2.25;
        }
        const double q = phi * phi - 1.0;
        return 0.25 * q * q;
    }

    [[nodiscard]] constexpr double f(double phi) const {
        if (phi > cut) return 11.0 * (phi - cut) + 6.0;
        if (phi < -cut) return 11.0 * (phi + cut) - 6.0;
        return phi * phi * phi - phi;
    }

    [[nodiscard]] constexpr double df(double phi) const {
        if (phi > cut || phi < -cut) return 11.0;
        return 3.0 * phi * phi - 1.0;
    }

    [[nodiscard]] constexpr double lipschitz() const { return 11.0; }
    [[nodiscard]] constexpr double second_lipschitz() const { return 12.0; }
    [[nodiscard]] constexpr LipschitzConstants lipschitz_constants() const { return {lipschitz(), second_lipschitz()}; }
};

static_assert(Potential<TruncatedDoubleWell>);

}  // namespace phasekit
