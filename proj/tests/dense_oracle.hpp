#pragma once

// Dense Kronecker assembly used as an independent check of the tensor
// contractions and the diagonalization solver. Test-only.

#include "phasekit/legendre.hpp"
#include "phasekit/tensor.hpp"

#include <Eigen/Dense>

namespace phasekit::testing {

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// With x fastest, the flattened tensor index is i + M j (+ M^2 k), so an
// operator A_x (x) A_y (x) A_z acts as kron(A_z, kron(A_y, A_x)).
inline Eigen::MatrixXd dense_mass(const SpectralBasis1D& b, int dim) {
    Eigen::MatrixXd m = kron(b.mass, b.mass);
    return dim == 2 ? m : kron(b.mass, m);
}

inline Eigen::MatrixXd dense_stiffness(const SpectralBasis1D& b, int dim) {
    const auto& M = b.mass;
    const auto& S = b.stiffness;
    if (dim == 2) return kron(M, S) + kron(S, M);
    return kron(M, kron(M, S)) + kron(M, kron(S, M)) + kron(S, kron(M, M));
}

inline Eigen::VectorXd as_vector(const Field& u) {
    return Eigen::Map<const Eigen::VectorXd>(u.data().data(), static_cast<Eigen::Index>(u.size()));
}

inline Field as_field(const Eigen::VectorXd& v, int dim, int M) {
    Field u(dim, M);
    for (Eigen::Index i = 0; i < v.size(); ++i) u[static_cast<std::size_t>(i)] = v[i];
    return u;
}

}  // namespace phasekit::testing
