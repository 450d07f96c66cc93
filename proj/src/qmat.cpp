#include "bgrape/qmat.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace bgrape {

namespace {

constexpr double kHermitianInputTol = 1e-9;

void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows()
       << "x" << m.cols();
    throw ContractError(os.str());
  }
}

}  // namespace

ComplexMatrix identity(Eigen::Index dim) {
  return ComplexMatrix::Identity(dim, dim);
}

ComplexMatrix pauli(PauliAxis axis) {
  const Complex i(0.0, 1.0);
  ComplexMatrix s = ComplexMatrix::Zero(2, 2);
  switch (axis) {
    case PauliAxis::kX:
      s(0, 1) = 1.0;
      s(1, 0) = 1.0;
      break;
    case PauliAxis::kY:
      s(0, 1) = -i;
      s(1, 0) = i;
      break;
    case PauliAxis::kZ:
      s(0, 0) = 1.0;
      s(1, 1) = -1.0;
      break;
  }
  return s;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

bool is_hermitian(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).norm() <= tol;
}

double unitarity_defect(const ComplexMatrix& u) {
  return (u.adjoint() * u - identity(u.rows())).norm();
}

bool is_unitary(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return unitarity_defect(m) <= tol;
}

HermitianEigen hermitian_eig(const ComplexMatrix& h) {
  require_square(h, "hermitian_eig");
  const double asym = (h - h.adjoint()).norm();
  if (asym > kHermitianInputTol * std::max(1.0, h.norm())) {
    std::ostringstream os;
    os << "hermitian_eig: input is not Hermitian (||h - h^dagger||_F = "
       << asym << ")";
    throw ContractError(os.str());
  }
  const ComplexMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    const double residual =
        (sym * solver.eigenvectors() -
         solver.eigenvectors() * solver.eigenvalues().asDiagonal())
            .norm();
    std::ostringstream os;
    os << "hermitian_eig: eigensolver did not converge (residual " << residual
       << ")";
    throw NumericError(os.str(), residual);
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

ComplexMatrix expm_unitary(const HermitianEigen& eig, double dt) {
  const auto& v = eig.eigenvectors;
  Eigen::VectorXcd phases(eig.eigenvalues.size());
  for (Eigen::Index p = 0; p < phases.size(); ++p) {
    phases(p) = std::polar(1.0, -eig.eigenvalues(p) * dt);
  }
  return v * phases.asDiagonal() * v.adjoint();
}

ComplexMatrix expm_unitary(const ComplexMatrix& h, double dt) {
  return expm_unitary(hermitian_eig(h), dt);
}

ComplexMatrix exp_divided_differences(const RealVector& eigenvalues,
                                      double dt) {
  const Eigen::Index n = eigenvalues.size();
  const Complex minus_i_dt(0.0, -dt);
  Eigen::VectorXcd f(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    f(p) = std::polar(1.0, -eigenvalues(p) * dt);
  }
  ComplexMatrix phi(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index q = 0; q < n; ++q) {
      const double gap = eigenvalues(p) - eigenvalues(q);
      if (std::abs(gap) < kDegeneracyThreshold) {
        phi(p, q) = minus_i_dt * f(p);
      } else {
        phi(p, q) = (f(p) - f(q)) / gap;
      }
    }
  }
  return phi;
}

ComplexMatrix expm_directional_derivative(const HermitianEigen& eig,
                                          const ComplexMatrix& a, double dt) {
  const auto& v = eig.eigenvectors;
  if (a.rows() != v.rows() || a.cols() != v.cols()) {
    throw ContractError("expm_directional_derivative: direction shape mismatch");
  }
  const ComplexMatrix phi = exp_divided_differences(eig.eigenvalues, dt);
  const ComplexMatrix rotated = v.adjoint() * a * v;
  return v * phi.cwiseProduct(rotated) * v.adjoint();
}

ComplexMatrix expm_directional_derivative(const ComplexMatrix& h,
                                          const ComplexMatrix& a, double dt) {
  return expm_directional_derivative(hermitian_eig(h), a, dt);
}

}  // namespace bgrape
