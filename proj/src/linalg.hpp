#pragma once

// Internal numerical kernels shared by the Hamiltonian builders.

#include <Eigen/Dense>

namespace fluxonium::detail {

/// Real and imaginary parts of <m| exp(i beta (a + a^dag)) |n>, i.e. the
/// matrices of cos(beta x) and sin(beta x) with x = a + a^dag, truncated to
/// `dim` Fock states. Computed along diagonals with a scaled Laguerre
/// recurrence, which stays accurate for beta up to ~40.
void displacement_parts(double beta, int dim, Eigen::MatrixXd& cos_part,
                        Eigen::MatrixXd& sin_part);

/// Central-difference weights w_1..w_m for the second (even) or first (odd)
/// derivative with 2m+1 points; the centre weight of the second derivative is
/// -2 sum w_k.
Eigen::VectorXd second_derivative_weights(int half_width);
Eigen::VectorXd first_derivative_weights(int half_width);

struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

/// Lowest `count` eigenpairs of a dense symmetric matrix (LAPACK dsyevr).
EigenPairs lowest_eigenpairs_dense(const Eigen::MatrixXd& a, int count, bool want_vectors);

/// Lowest `count` eigenpairs of a symmetric band matrix in LAPACK upper band
/// storage: eigenvalues by dsbevx, eigenvectors by shifted inverse iteration
/// with re-orthogonalization inside near-degenerate clusters.
EigenPairs lowest_eigenpairs_band(const Eigen::MatrixXd& band, int bandwidth, int count,
                                  bool want_vectors);

/// y = H x for upper band storage.
Eigen::VectorXd band_multiply(const Eigen::MatrixXd& band, int bandwidth, const Eigen::VectorXd& x);

}  // namespace fluxonium::detail
