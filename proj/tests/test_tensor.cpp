#include "phasekit/tensor.hpp"

#include "dense_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

namespace pk = phasekit;
using pk::testing::as_field;
using pk::testing::as_vector;

namespace {

pk::Field random_field(int dim, int M, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    pk::Field u(dim, M);
    for (double& v : u.data()) v = U(rng);
    return u;
}

double rel_inf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace

TEST(Tensor, ShapeAndArithmetic) {
    pk::Field a(3, 4, 1.0), b(3, 4, 2.0);
    EXPECT_EQ(a.size(), 64u);
    auto c = a + 2.0 * b;
    EXPECT_DOUBLE_EQ(c.at(1, 2, 3), 5.0);
    EXPECT_THROW(pk::Field(1, 4), std::invalid_argument);
    EXPECT_THROW(a += pk::Field(2, 4), std::invalid_argument);
}

TEST(ApplyMass, ConstantAndZero) {
    const auto b = pk::build_basis(5);
    const auto u = pk::constant_field(2, 5, 0.7);
    const auto m = pk::apply_mass(u, b);
    EXPECT_NEAR(m.at(0, 0), 0.7 * 4.0, 1e-14);
    EXPECT_EQ(pk::apply_mass(pk::Field(2, 5), b), pk::Field(2, 5));
}

TEST(ApplyMass, MatchesDenseOracle) {
    std::mt19937_64 rng(7);
    for (int dim : {2, 3}) {
        const auto b = pk::build_basis(4);
        const auto u = random_field(dim, 4, rng);
        const Eigen::VectorXd expect = pk::testing::dense_mass(b, dim) * as_vector(u);
        EXPECT_LE((as_vector(pk::apply_mass(u, b)) - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(ApplyStiffness, ConstantAndLinear) {
    const auto b = pk::build_basis(5);
    EXPECT_LE(pk::apply_stiffness(pk::constant_field(3, 5, 2.0), b).max_abs(), 1e-13);

    pk::Field x(2, 5);
    x.at(1, 0) = 1.0;  // phi_1(x) phi_0(y) = x
    EXPECT_NEAR(pk::dot(x, pk::apply_stiffness(x, b)), 4.0, 1e-13);
}

TEST(ApplyStiffness, MatchesDenseOracle) {
    std::mt19937_64 rng(8);
    const auto b = pk::build_basis(4);
    for (int dim : {2, 3}) {
        const auto u = random_field(dim, 4, rng);
        const Eigen::VectorXd expect = pk::testing::dense_stiffness(b, dim) * as_vector(u);
        EXPECT_LE((as_vector(pk::apply_stiffness(u, b)) - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Factor, EigenbasisIsMassOrthonormal) {
    const auto b = pk::build_basis(12);
    const auto op = pk::factor(1.0, 1.0, b, 2);
    const auto& V = op.eigenvectors();
    EXPECT_LE((V.transpose() * b.mass * V - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-11);
    int zeros = 0;
    for (double l : op.eigenvalues()) {
        EXPECT_GE(l, 0.0);
        zeros += l == 0.0;
    }
    EXPECT_EQ(zeros, 1);
}

TEST(Factor, RejectsBadCoefficients) {
    const auto b = pk::build_basis(4);
    EXPECT_THROW(pk::factor(0.0, 0.0, b, 2), std::invalid_argument);
    EXPECT_THROW(pk::factor(-1.0, 1.0, b, 2), std::invalid_argument);
    EXPECT_THROW(pk::factor(1.0, 1.0, b, 4), std::invalid_argument);
}

TEST(Solve, MassOnlyInvertsApplyMass) {
    std::mt19937_64 rng(9);
    const auto b = pk::build_basis(6);
    const auto op = pk::factor(1.0, 0.0, b, 3);
    const auto u = random_field(3, 6, rng);
    const auto back = pk::solve(op, pk::apply_mass(u, b));
    EXPECT_LE((back - u).max_abs(), 1e-11);
}

TEST(Solve, PureStiffnessIsSingularOnMeanMode) {
    std::mt19937_64 rng(10);
    const auto b = pk::build_basis(5);
    const auto op = pk::factor(0.0, 1.0, b, 2);
    EXPECT_THROW(pk::solve(op, pk::constant_field(2, 5, 1.0)), pk::SingularOperatorError);

    // a stiffness image has zero mean and is solvable
    auto u = random_field(2, 5, rng);
    u[0] = 0.0;
    const auto rhs = pk::apply_stiffness(u, b);
    const auto sol = pk::solve(op, rhs);
    EXPECT_LE((pk::apply_stiffness(sol, b) - rhs).max_abs(), 1e-10 * rhs.max_abs());
}

TEST(Solve, MatchesDenseLU) {
    std::mt19937_64 rng(11);
    const auto b = pk::build_basis(6);
    const double sigma = 15.0, eta = 0.05;
    const auto op = pk::factor(sigma, eta, b, 2);
    const auto rhs = random_field(2, 6, rng);
    const Eigen::MatrixXd A = sigma * pk::testing::dense_mass(b, 2) + eta * pk::testing::dense_stiffness(b, 2);
    const Eigen::VectorXd expect = A.partialPivLu().solve(as_vector(rhs));
    EXPECT_LE(rel_inf(as_vector(pk::solve(op, rhs)), expect), 1e-10);

    const auto b5 = pk::build_basis(5);
    const auto op3 = pk::factor(2.5, 0.3, b5, 3);
    const auto rhs3 = random_field(3, 5, rng);
    const Eigen::MatrixXd A3 = 2.5 * pk::testing::dense_mass(b5, 3) + 0.3 * pk::testing::dense_stiffness(b5, 3);
    EXPECT_LE(rel_inf(as_vector(pk::solve(op3, rhs3)), A3.partialPivLu().solve(as_vector(rhs3))), 1e-9);
}

TEST(Solve, ZeroRightHandSide) {
    const auto b = pk::build_basis(5);
    const auto op = pk::factor(3.0, 0.1, b, 3);
    EXPECT_EQ(pk::solve(op, pk::Field(3, 5)).max_abs(), 0.0);
}

TEST(Solve, ResidualAndRoundTripProperty) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> sig(0.01, 100.0), et(0.0, 2.0);
    for (int M = 3; M <= 8; ++M) {
        const auto b = pk::build_basis(M);
        for (int dim : {2, 3}) {
            const double sigma = sig(rng), eta = et(rng);
            const auto op = pk::factor(sigma, eta, b, dim);
            const auto u = random_field(dim, M, rng);
            const auto Au = pk::apply_operator(u, sigma, eta, b);
            const auto back = pk::solve(op, Au);
            EXPECT_LE((back - u).max_abs(), 1e-10) << "M=" << M << " d=" << dim;

            const auto rhs = random_field(dim, M, rng);
            const auto x = pk::solve(op, rhs);
            EXPECT_LE((pk::apply_operator(x, sigma, eta, b) - rhs).max_abs(), 1e-10 * rhs.max_abs());
        }
    }
}

TEST(Operator, SymmetricAndPositiveDefinite) {
    std::mt19937_64 rng(13);
    for (int M : {3, 6}) {
        const auto b = pk::build_basis(M);
        for (int dim : {2, 3}) {
            const double sigma = 0.7, eta = 1.3;
            const auto u = random_field(dim, M, rng);
            const auto v = random_field(dim, M, rng);
            const double uv = pk::dot(pk::apply_operator(u, sigma, eta, b), v);
            const double vu = pk::dot(u, pk::apply_operator(v, sigma, eta, b));
            EXPECT_NEAR(uv, vu, 1e-11 * std::abs(uv) + 1e-13);
            const double energy = pk::dot(pk::apply_operator(u, sigma, eta, b), u);
            const double mass_part = sigma * pk::dot(pk::apply_mass(u, b), u);
            EXPECT_GE(energy, mass_part * (1 - 1e-12));
            EXPECT_GT(mass_part, 0.0);
        }
    }
}

TEST(GridTransforms, RoundTrip) {
    std::mt19937_64 rng(14);
    const auto b = pk::build_basis(7);
    for (int dim : {2, 3}) {
        const auto u = random_field(dim, 7, rng);
        EXPECT_LE((pk::to_modal(pk::to_grid(u, b), b) - u).max_abs(), 1e-12);
    }
}
