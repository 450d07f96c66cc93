#pragma once

// Small dense complex linear algebra for unitary propagators.
//
// Everything here works on Eigen's dynamic complex matrices. The matrices of
// interest are tiny (N = 2 or 8), so the spectral route is used throughout:
// one Hermitian eigendecomposition per segment serves both the propagator and
// all of its control derivatives.

#include "bgrape/types.hpp"

namespace bgrape {

enum class PauliAxis { kX, kY, kZ };

/// Eigenpairs of a Hermitian matrix; eigenvalues ascending, eigenvectors as
/// the columns of a unitary matrix.
struct HermitianEigen {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;
};

ComplexMatrix identity(Eigen::Index dim);
ComplexMatrix pauli(PauliAxis axis);
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

bool is_hermitian(const ComplexMatrix& m, double tol);
bool is_unitary(const ComplexMatrix& m, double tol);

/// Frobenius norm of U^dagger U - I.
double unitarity_defect(const ComplexMatrix& u);

/// Decomposes (h + h^dagger)/2. Throws ContractError when h is not square or
/// is further than 1e-9 from Hermitian, NumericError if the solver fails.
HermitianEigen hermitian_eig(const ComplexMatrix& h);

/// exp(-i h dt) through the spectral decomposition.
ComplexMatrix expm_unitary(const ComplexMatrix& h, double dt);
ComplexMatrix expm_unitary(const HermitianEigen& eig, double dt);

/// Divided-difference matrix of f(x) = exp(-i x dt) on the spectrum:
/// Phi_pq = (f(l_p) - f(l_q)) / (l_p - l_q), Phi_pp = f'(l_p).
/// Pairs closer than kDegeneracyThreshold take the derivative branch.
ComplexMatrix exp_divided_differences(const RealVector& eigenvalues, double dt);

inline constexpr double kDegeneracyThreshold = 1e-12;

/// d/ds exp(-i (h + s a) dt) at s = 0.
ComplexMatrix expm_directional_derivative(const ComplexMatrix& h,
                                          const ComplexMatrix& a, double dt);
ComplexMatrix expm_directional_derivative(const HermitianEigen& eig,
                                          const ComplexMatrix& a, double dt);

}  // namespace bgrape
