#pragma once

#include "phasekit/legendre.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasekit {

/// Dense rank-d tensor (d = 2 or 3) with a common extent per direction,
/// stored with the x index fastest. The tag separates modal coefficients from
/// nodal (physical grid) values at the type level.
template <class Tag>
class Tensor {
public:
    Tensor() = default;
    Tensor(int dim, int extent, double fill = 0.0) : dim_(dim), extent_(extent) {
        if (dim != 2 && dim != 3) throw std::invalid_argument("Tensor: dim must be 2 or 3");
        if (extent < 1) throw std::invalid_argument("Tensor: extent must be positive");
        data_.assign(ipow(extent, dim), fill);
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int extent() const { return extent_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }

    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::vector<double>& storage() { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(int i, int j) { return data_[i + static_cast<std::size_t>(extent_) * j]; }
    [[nodiscard]] double at(int i, int j) const { return data_[i + static_cast<std::size_t>(extent_) * j]; }
    double& at(int i, int j, int k) {
        return data_[i + static_cast<std::size_t>(extent_) * (j + static_cast<std::size_t>(extent_) * k)];
    }
    [[nodiscard]] double at(int i, int j, int k) const {
        return data_[i + static_cast<std::size_t>(extent_) * (j + static_cast<std::size_t>(extent_) * k)];
    }

    [[nodiscard]] bool same_shape(const Tensor& o) const { return dim_ == o.dim_ && extent_ == o.extent_; }

    Tensor& operator+=(const Tensor& o) {
        check_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        check_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }
    /// this += a * x
    Tensor& axpy(double a, const Tensor& x) {
        check_shape(x);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(double s, Tensor a) { return a *= s; }
    friend Tensor operator-(Tensor a) { return a *= -1.0; }
    friend bool operator==(const Tensor&, const Tensor&) = default;

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }
    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    static std::size_t ipow(int base, int exp) {
        std::size_t r = 1;
        for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
        return r;
    }

private:
    void check_shape(const Tensor& o) const {
        if (!same_shape(o)) throw std::invalid_argument("Tensor: shape mismatch");
    }

    int dim_ = 0;
    int extent_ = 0;
    std::vector<double> data_;
};

struct ModalTag {};
struct NodalTag {};

/// Modal coefficients (and weak-form load vectors) on V_M^d.
using Field = Tensor<ModalTag>;
/// Values on the (2M)^d tensor Gauss grid.
using GridValues = Tensor<NodalTag>;

/// Euclidean coefficient pairing sum_i a_i b_i.
template <class Tag>
double dot(const Tensor<Tag>& a, const Tensor<Tag>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

namespace detail {

/// out = A applied along `axis` of a tensor with per-direction extents `ext`.
/// A is m x ext[axis]; the output has ext[axis] replaced by m.
inline void contract_axis(std::span<const double> in, const std::array<Eigen::Index, 3>& ext, int dim, int axis,
                          const Eigen::MatrixXd& A, std::span<double> out) {
    Eigen::Index pre = 1, post = 1;
    for (int a = 0; a < axis; ++a) pre *= ext[a];
    for (int a = axis + 1; a < dim; ++a) post *= ext[a];
    const Eigen::Index n = ext[axis];
    const Eigen::Index m = A.rows();
    if (pre == 1) {
        Eigen::Map<const Eigen::MatrixXd> X(in.data(), n, post);
        Eigen::Map<Eigen::MatrixXd> Y(out.data(), m, post);
        Y.noalias() = A * X;
        return;
    }
    for (Eigen::Index p = 0; p < post; ++p) {
        Eigen::Map<const Eigen::MatrixXd> X(in.data() + p * pre * n, pre, n);
        Eigen::Map<Eigen::MatrixXd> Y(out.data() + p * pre * m, pre, m);
        Y.noalias() = X * A.transpose();
    }
}

/// Applies ops[a] along every axis a in turn (a Kronecker-product action).
/// All ops must share one shape (m x n); input extent n, output extent m.
inline std::vector<double> apply_kron(std::span<const double> in, int dim, int n,
                                      std::span<const Eigen::MatrixXd* const> ops) {
    std::array<Eigen::Index, 3> ext{1, 1, 1};
    for (int a = 0; a < dim; ++a) ext[a] = n;
    std::vector<double> cur(in.begin(), in.end());
    std::vector<double> next;
    for (int a = 0; a < dim; ++a) {
        const Eigen::MatrixXd& A = *ops[a];
        if (A.cols() != ext[a]) throw std::invalid_argument("apply_kron: operator shape mismatch");
        std::size_t out_size = 1;
        for (int b = 0; b < dim; ++b) out_size *= static_cast<std::size_t>(b == a ? A.rows() : ext[b]);
        next.assign(out_size, 0.0);
        contract_axis(cur, ext, dim, a, A, next);
        ext[a] = A.rows();
        cur.swap(next);
    }
    return cur;
}

template <class OutTag, class InTag>
Tensor<OutTag> apply_same(const Tensor<InTag>& in, const Eigen::MatrixXd& A) {
    std::array<const Eigen::MatrixXd*, 3> ops{&A, &A, &A};
    Tensor<OutTag> out(in.dim(), static_cast<int>(A.rows()));
    auto v = apply_kron(in.data(), in.dim(), in.extent(), std::span(ops.data(), in.dim()));
    std::copy(v.begin(), v.end(), out.data().begin());
    return out;
}

}  // namespace detail

inline void check_conforms(const Field& u, const SpectralBasis1D& basis) {
    if (u.extent() != basis.M)
        throw std::invalid_argument("field has " + std::to_string(u.extent()) + " modes, basis has " +
                                    std::to_string(basis.M));
}

/// Mass_d u: the 1-D mass matrix contracted along every direction.
inline Field apply_mass(const Field& u, const SpectralBasis1D& basis) {
    check_conforms(u, basis);
    return detail::apply_same<ModalTag>(u, basis.mass);
}

/// Stiff_d u = sum over directions of Stiff there and Mass elsewhere.
inline Field apply_stiffness(const Field& u, const SpectralBasis1D& basis) {
    check_conforms(u, basis);
    Field out(u.dim(), u.extent());
    for (int d = 0; d < u.dim(); ++d) {
        std::array<const Eigen::MatrixXd*, 3> ops{&basis.mass, &basis.mass, &basis.mass};
        ops[d] = &basis.stiffness;
        auto v = detail::apply_kron(u.data(), u.dim(), u.extent(), std::span(ops.data(), u.dim()));
        for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
    }
    return out;
}

/// (sigma Mass_d + eta Stiff_d) u
inline Field apply_operator(const Field& u, double sigma, double eta, const SpectralBasis1D& basis) {
    Field out = apply_mass(u, basis);
    out *= sigma;
    if (eta != 0.0) out.axpy(eta, apply_stiffness(u, basis));
    return out;
}

/// Nodal values at the tensor Gauss grid.
inline GridValues to_grid(const Field& u, const SpectralBasis1D& basis) {
    check_conforms(u, basis);
    return detail::apply_same<NodalTag>(u, basis.synthesis);
}

/// L2 projection of nodal values onto V_M^d.
inline Field to_modal(const GridValues& g, const SpectralBasis1D& basis) {
    if (g.extent() != basis.Q()) throw std::invalid_argument("to_modal: grid extent must be 2M");
    return detail::apply_same<ModalTag>(g, basis.projection);
}

/// Weak-form load vector (g, phi_k x phi_l [x phi_m]) by tensor quadrature.
inline Field load_vector(const GridValues& g, const SpectralBasis1D& basis) {
    if (g.extent() != basis.Q()) throw std::invalid_argument("load_vector: grid extent must be 2M");
    return detail::apply_same<ModalTag>(g, basis.weighted_basis);
}

/// Field with constant value c (c * phi_0 x ... x phi_0).
inline Field constant_field(int dim, int M, double c) {
    Field u(dim, M);
    u[0] = c;
    return u;
}

class SingularOperatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (sigma Mass_d + eta Stiff_d) in the per-direction eigenbasis of the
/// generalized problem Stiff v = lambda Mass v with V^T Mass V = I. The
/// operator becomes V^{-T} diag(sigma + eta sum lambda) V^{-1} per Kronecker
/// factor, so a solve costs d + d contractions and one diagonal scaling.
class DiagonalizedOperator {
public:
    DiagonalizedOperator() = default;

    [[nodiscard]] double sigma() const { return sigma_; }
    [[nodiscard]] double eta() const { return eta_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int modes() const { return static_cast<int>(eigenvalues_.size()); }
    [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const { return V_; }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    [[nodiscard]] const std::vector<double>& denominators() const { return denom_; }

    friend DiagonalizedOperator factor(double sigma, double eta, const SpectralBasis1D& basis, int dim);
    friend Field solve(const DiagonalizedOperator& op, const Field& b);

private:
    double sigma_ = 0.0;
    double eta_ = 0.0;
    int dim_ = 0;
    Eigen::MatrixXd V_;
    Eigen::MatrixXd Vt_;
    Eigen::VectorXd eigenvalues_;
    std::vector<double> denom_;  // composed, same layout as a Field
};

inline constexpr double kZeroEigenvalue = 1e-10;
inline constexpr double kSingularDenominator = 1e-14;

inline DiagonalizedOperator factor(double sigma, double eta, const SpectralBasis1D& basis, int dim) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("factor: dim must be 2 or 3");
    if (!(sigma >= 0.0) || !(eta >= 0.0) || (sigma == 0.0 && eta == 0.0))
        throw std::invalid_argument("factor: need sigma, eta >= 0, not both zero");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(basis.stiffness, basis.mass);
    if (ges.info() != Eigen::Success) throw std::runtime_error("factor: generalized eigensolver failed");

    DiagonalizedOperator op;
    op.sigma_ = sigma;
    op.eta_ = eta;
    op.dim_ = dim;
    op.V_ = ges.eigenvectors();
    op.Vt_ = op.V_.transpose();
    op.eigenvalues_ = ges.eigenvalues();

    int zero_count = 0;
    for (Eigen::Index k = 0; k < op.eigenvalues_.size(); ++k) {
        double& lam = op.eigenvalues_[k];
        if (std::abs(lam) < kZeroEigenvalue) {
            lam = 0.0;
            ++zero_count;
        } else if (lam < 0.0) {
            throw std::runtime_error("factor: stiffness has a negative eigenvalue");
        }
    }
    if (zero_count != 1) throw std::runtime_error("factor: stiffness null space is not one-dimensional");

    const int M = basis.M;
    Field denom(dim, M);
    const auto& lam = op.eigenvalues_;
    if (dim == 2) {
        for (int j = 0; j < M; ++j)
            for (int i = 0; i < M; ++i) denom.at(i, j) = sigma + eta * (lam[i] + lam[j]);
    } else {
        for (int k = 0; k < M; ++k)
            for (int j = 0; j < M; ++j)
                for (int i = 0; i < M; ++i) denom.at(i, j, k) = sigma + eta * (lam[i] + lam[j] + lam[k]);
    }
    op.denom_.assign(denom.data().begin(), denom.data().end());
    for (double d : op.denom_)
        if (d < -kSingularDenominator) throw SingularOperatorError("factor: indefinite operator");
    return op;
}

/// Solves (sigma Mass_d + eta Stiff_d) u = b. Singular modes (only possible
/// when sigma = 0) are admissible only when b has no component along them;
/// the corresponding solution component is set to zero.
inline Field solve(const DiagonalizedOperator& op, const Field& b) {
    if (b.dim() != op.dim_ || b.extent() != op.modes()) throw std::invalid_argument("solve: shape mismatch");
    Field w = detail::apply_same<ModalTag>(b, op.Vt_);
    const double scale = std::max(b.max_abs(), 1e-300);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = op.denom_[i];
        if (std::abs(d) <= kSingularDenominator) {
            if (std::abs(w[i]) > 1e-12 * scale)
                throw SingularOperatorError("solve: right-hand side has a component in the operator null space");
            w[i] = 0.0;
        } else {
            w[i] /= d;
        }
    }
    return detail::apply_same<ModalTag>(w, op.V_);
}

}  // namespace phasekit
