#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phasekit {

/// Legendre polynomial L_k(x) by the three-term recurrence.
inline double legendre_eval(int k, double x) {
    if (k < 0) throw std::invalid_argument("legendre_eval: negative degree");
    if (k == 0) return 1.0;
    double prev = 1.0, curr = x;
    for (int n = 1; n < k; ++n) {
        const double next = ((2.0 * n + 1.0) * x * curr - n * prev) / (n + 1.0);
        prev = curr;
        curr = next;
    }
    return curr;
}

/// (L_k(x), L_k'(x)). The derivative uses L'_{n+1} = L'_{n-1} + (2n+1) L_n,
/// which stays regular at x = +-1.
inline std::pair<double, double> legendre_eval_with_derivative(int k, double x) {
    if (k < 0) throw std::invalid_argument("legendre_eval: negative degree");
    if (k == 0) return {1.0, 0.0};
    double p_prev = 1.0, p_curr = x;
    double d_prev = 0.0, d_curr = 1.0;
    for (int n = 1; n < k; ++n) {
        const double p_next = ((2.0 * n + 1.0) * x * p_curr - n * p_prev) / (n + 1.0);
        const double d_next = d_prev + (2.0 * n + 1.0) * p_curr;
        p_prev = p_curr;
        p_curr = p_next;
        d_prev = d_curr;
        d_curr = d_next;
    }
    return {p_curr, d_curr};
}

struct QuadratureRule {
    std::vector<double> nodes;    // strictly increasing in (-1, 1)
    std::vector<double> weights;  // positive, sum to 2

    [[nodiscard]] int order() const { return static_cast<int>(nodes.size()); }

    template <class F>
    [[nodiscard]] double integrate(F&& fn) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * fn(nodes[i]);
        return sum;
    }
};

/// Gauss-Legendre rule with Q points. Roots of L_Q are refined by Newton's
/// method from the Tricomi asymptotic guess; the negative half is mirrored so
/// that the rule is exactly symmetric.
inline QuadratureRule gauss_rule(int Q) {
    if (Q < 1) throw std::invalid_argument("gauss_rule: Q must be >= 1");
    constexpr int max_iterations = 50;
    constexpr double step_tolerance = 1e-14;

    QuadratureRule rule;
    rule.nodes.assign(Q, 0.0);
    rule.weights.assign(Q, 0.0);

    const int half = (Q + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // i-th largest root
        const double theta = std::numbers::pi * (i + 0.75) / (Q + 0.5);
        double x = (1.0 - (Q - 1.0) / (8.0 * Q * Q * Q)) * std::cos(theta);
        if (Q % 2 == 1 && i == half - 1) x = 0.0;

        bool converged = false;
        double deriv = 0.0;
        for (int it = 0; it < max_iterations; ++it) {
            auto [p, dp] = legendre_eval_with_derivative(Q, x);
            const double step = p / dp;
            x -= step;
            deriv = dp;
            if (std::abs(step) <= step_tolerance * std::max(1.0, std::abs(x))) {
                deriv = legendre_eval_with_derivative(Q, x).second;
                converged = true;
                break;
            }
        }
        if (!converged)
            throw std::runtime_error("gauss_rule: Newton refinement failed for Q=" + std::to_string(Q));
        if (Q % 2 == 1 && i == half - 1) x = 0.0;

        const double w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        rule.nodes[Q - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[Q - 1 - i] = w;
        rule.weights[i] = w;
    }
    return rule;
}

/// Modal basis phi_0 = L_0, phi_1 = L_1, phi_k = L_k - L_{k+2} (k >= 2).
inline double basis_eval(int k, double x) {
    if (k < 2) return legendre_eval(k, x);
    return legendre_eval(k, x) - legendre_eval(k + 2, x);
}

inline double basis_derivative(int k, double x) {
    if (k < 2) return legendre_eval_with_derivative(k, x).second;
    return legendre_eval_with_derivative(k, x).second - legendre_eval_with_derivative(k + 2, x).second;
}

/// One spatial direction of the Galerkin discretization: M modes sampled on
/// a Q = 2M point Gauss rule.
struct SpectralBasis1D {
    int M = 0;
    QuadratureRule quad;
    Eigen::MatrixXd basis_at_nodes;   // M x Q, phi_k(x_i)
    Eigen::MatrixXd dbasis_at_nodes;  // M x Q, phi_k'(x_i)
    Eigen::MatrixXd mass;             // (phi_j, phi_k)
    Eigen::MatrixXd stiffness;        // (phi_j', phi_k')

    // Derived operators used by the transforms.
    Eigen::MatrixXd synthesis;        // Q x M, transpose of basis_at_nodes
    Eigen::MatrixXd weighted_basis;   // M x Q, phi_k(x_i) w_i: load vectors
    Eigen::MatrixXd projection;       // M x Q, mass^{-1} * weighted_basis

    [[nodiscard]] int Q() const { return quad.order(); }
};

inline SpectralBasis1D build_basis(int M) {
    if (M < 2) throw std::invalid_argument("build_basis: M must be >= 2");
    SpectralBasis1D b;
    b.M = M;
    b.quad = gauss_rule(2 * M);
    const int Q = b.Q();

    b.basis_at_nodes.resize(M, Q);
    b.dbasis_at_nodes.resize(M, Q);
    for (int i = 0; i < Q; ++i) {
        const double x = b.quad.nodes[i];
        // L_0 .. L_{M+1} and derivatives in one sweep
        std::vector<double> p(M + 2), dp(M + 2);
        p[0] = 1.0;
        dp[0] = 0.0;
        p[1] = x;
        dp[1] = 1.0;
        for (int n = 1; n + 1 < M + 2; ++n) {
            p[n + 1] = ((2.0 * n + 1.0) * x * p[n] - n * p[n - 1]) / (n + 1.0);
            dp[n + 1] = dp[n - 1] + (2.0 * n + 1.0) * p[n];
        }
        for (int k = 0; k < M; ++k) {
            b.basis_at_nodes(k, i) = k < 2 ? p[k] : p[k] - p[k + 2];
            b.dbasis_at_nodes(k, i) = k < 2 ? dp[k] : dp[k] - dp[k + 2];
        }
    }

    const Eigen::Map<const Eigen::VectorXd> w(b.quad.weights.data(), Q);
    b.weighted_basis = b.basis_at_nodes * w.asDiagonal();
    b.mass = b.weighted_basis * b.basis_at_nodes.transpose();
    b.stiffness = b.dbasis_at_nodes * w.asDiagonal() * b.dbasis_at_nodes.transpose();
    // exact symmetry
    b.mass = 0.5 * (b.mass + b.mass.transpose()).eval();
    b.stiffness = 0.5 * (b.stiffness + b.stiffness.transpose()).eval();

    b.synthesis = b.basis_at_nodes.transpose();
    b.projection = b.mass.llt().solve(b.weighted_basis);
    return b;
}

/// L2 projection of nodal samples onto span{phi_k}.
inline Eigen::VectorXd forward_transform(std::span<const double> values, const SpectralBasis1D& basis) {
    if (static_cast<int>(values.size()) != basis.Q())
        throw std::invalid_argument("forward_transform: expected Q samples");
    const Eigen::Map<const Eigen::VectorXd> v(values.data(), basis.Q());
    return basis.projection * v;
}

inline Eigen::VectorXd backward_transform(std::span<const double> coeffs, const SpectralBasis1D& basis) {
    if (static_cast<int>(coeffs.size()) != basis.M)
        throw std::invalid_argument("backward_transform: expected M coefficients");
    const Eigen::Map<const Eigen::VectorXd> c(coeffs.data(), basis.M);
    return basis.synthesis * c;
}

}  // namespace phasekit
