#pragma once

#include <cstdint>
#include <vector>

#include "wquant/matrix.hpp"

namespace wquant {

/// Upper-triangular Cholesky factor with Sigma = U^T U.
struct UpperCholesky {
    std::size_t n = 0;
    Matrix U;            // U(i,j) = 0 for i > j, diagonal strictly positive
    double logdet = 0.0; // sum of log U(i,i)

    double diag(std::size_t i) const { return U(i, i); }
};

/// Eigendecomposition Sigma = V diag(lambdas) V^T, eigenvalues descending.
struct Spectrum {
    std::vector<double> lambdas;
    Matrix V; // columns are eigenvectors
};

/// Cholesky in the U^T U convention: standard lower factor, transposed.
/// A pivot at or below the jitter floor triggers one retry on
/// Sigma + eps*I with eps = 1e-8 * (trace/n); a second failure raises
/// NotPositiveDefinite (the caller decides whether to skip or regularize).
UpperCholesky cholesky_upper(const SymMatrix& sigma);

/// Cyclic Jacobi sweeps until the off-diagonal Frobenius norm drops below
/// 1e-12 * trace; at most 100 sweeps, then NoConvergence.
Spectrum sym_eigen(const SymMatrix& sigma);

/// Haar-distributed orthogonal matrix: QR of an iid Gaussian matrix with the
/// R-diagonal sign correction. Deterministic per seed.
Matrix random_orthogonal(std::size_t n, std::uint64_t seed);

/// V^T Sigma V, re-symmetrized.
SymMatrix rotate_covariance(const SymMatrix& sigma, const Matrix& v);

/// n x a matrix of iid N(0, sigma_w^2) entries, deterministic per seed.
Matrix gaussian_matrix(std::size_t n, std::size_t a, double sigma_w, std::uint64_t seed);

/// log e_k of the elementary symmetric polynomials e_0..e_n of
/// exp(log_lambdas), via the Newton triangle recursion carried in log domain.
std::vector<double> elem_sym_log(const std::vector<double>& log_lambdas);

} // namespace wquant
