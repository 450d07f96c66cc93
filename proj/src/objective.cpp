#include "bgrape/objective.hpp"

#include <cmath>
#include <sstream>

#include "bgrape/parallel.hpp"

namespace bgrape {

namespace {

void require_target_shape(const ComplexMatrix& u, const GateTarget& target) {
  if (u.rows() != target.matrix.rows() || u.cols() != target.matrix.cols()) {
    std::ostringstream os;
    os << "infidelity: propagator is " << u.rows() << "x" << u.cols()
       << " but target '" << target.label << "' is " << target.matrix.rows()
       << "x" << target.matrix.cols();
    throw ContractError(os.str());
  }
}

void require_batch(std::span<const UncertaintySample> batch) {
  if (batch.empty()) throw ContractError("empty uncertainty batch");
}

double mean_in_order(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

GateTarget make_target(ComplexMatrix matrix, std::string label) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw ContractError("target '" + label + "' must be a non-empty square matrix");
  }
  if (!is_unitary(matrix, 1e-10)) {
    std::ostringstream os;
    os << "target '" << label << "' is not unitary (defect "
       << unitarity_defect(matrix) << ")";
    throw ContractError(os.str());
  }
  return {std::move(matrix), std::move(label)};
}

GateTarget toffoli_target() {
  ComplexMatrix m = identity(8);
  m(6, 6) = 0.0;
  m(7, 7) = 0.0;
  m(6, 7) = 1.0;
  m(7, 6) = 1.0;
  return make_target(std::move(m), "toffoli");
}

GateTarget rx_pi_target() {
  return make_target(Complex(0.0, -1.0) * pauli(PauliAxis::kX), "rx_pi");
}

GateTarget special_unitary_representative(const GateTarget& target) {
  const Complex det = target.matrix.determinant();
  const double n = static_cast<double>(target.matrix.rows());
  const Complex phase = std::polar(1.0, -std::arg(det) / n);
  return make_target(phase * target.matrix, target.label + "_su");
}

double unnormalized_scale(FidelityKind kind, Eigen::Index dim) {
  const double n = static_cast<double>(dim);
  return kind == FidelityKind::kPhaseSensitive ? 2.0 * n : n;
}

double infidelity(const ComplexMatrix& u, const GateTarget& target,
                  FidelityKind kind) {
  require_target_shape(u, target);
  const double n = static_cast<double>(u.rows());
  const Complex tau = (target.matrix.adjoint() * u).trace();
  if (kind == FidelityKind::kPhaseSensitive) return 1.0 - tau.real() / n;
  return 1.0 - std::norm(tau) / (n * n);
}

std::vector<double> sample_losses(const HamiltonianModel& model,
                                  const ControlField& field,
                                  const GateTarget& target,
                                  std::span<const UncertaintySample> batch,
                                  const LossOptions& options) {
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), options.threads, [&](std::size_t i) {
    losses[i] = infidelity(propagate(model, field, batch[i]), target,
                           options.fidelity);
  });
  return losses;
}

double batch_loss(const HamiltonianModel& model, const ControlField& field,
                  const GateTarget& target,
                  std::span<const UncertaintySample> batch,
                  const LossOptions& options) {
  require_batch(batch);
  return mean_in_order(sample_losses(model, field, target, batch, options));
}

LossAndGradient sample_gradient(const HamiltonianModel& model,
                                const ControlField& field,
                                const GateTarget& target,
                                const UncertaintySample& eps,
                                FidelityKind fidelity) {
  const SegmentDecomposition d = decompose(model, field, eps);
  const ComplexMatrix& u = d.final_propagator();
  require_target_shape(u, target);

  const double n = static_cast<double>(model.dim());
  const Complex tau = (target.matrix.adjoint() * u).trace();
  // dL = -Re(weight * dTau)
  Complex weight;
  LossAndGradient out;
  if (fidelity == FidelityKind::kPhaseSensitive) {
    out.loss = 1.0 - tau.real() / n;
    weight = 1.0 / n;
  } else {
    out.loss = 1.0 - std::norm(tau) / (n * n);
    weight = 2.0 * std::conj(tau) / (n * n);
  }

  const Eigen::Index segments = field.num_segments();
  const Eigen::Index controls = model.num_controls();
  out.grad = GradientField::Zero(segments, controls);

  // back = U_f^dagger V_{M-1} ... V_{m+1} while visiting segment m.
  ComplexMatrix back = target.matrix.adjoint();
  for (Eigen::Index m = segments - 1; m >= 0; --m) {
    const auto idx = static_cast<std::size_t>(m);
    const ComplexMatrix& v = d.eigen[idx].eigenvectors;
    const ComplexMatrix phi = exp_divided_differences(d.eigen[idx].eigenvalues, d.dt);
    // Tr(back * dV * P_m) for dV = V (Phi o V^dagger A V) V^dagger equals
    // Tr(Z A) with Z = V (X o Phi^T) V^dagger and X = V^dagger P_m back V.
    const ComplexMatrix x = v.adjoint() * (d.forward[idx] * back) * v;
    const ComplexMatrix z = v * x.cwiseProduct(phi.transpose()) * v.adjoint();
    for (Eigen::Index k = 0; k < controls; ++k) {
      const ComplexMatrix& a = model.control_operator(k);
      const Complex dtau = d.scale[idx] * z.cwiseProduct(a.transpose()).sum();
      out.grad(m, k) = -(weight * dtau).real();
    }
    back = back * d.unitaries[idx];
  }
  return out;
}

LossAndGradient batch_gradient(const HamiltonianModel& model,
                               const ControlField& field,
                               const GateTarget& target,
                               std::span<const UncertaintySample> batch,
                               const LossOptions& options) {
  require_batch(batch);
  std::vector<LossAndGradient> parts(batch.size());
  parallel_for(batch.size(), options.threads, [&](std::size_t i) {
    parts[i] = sample_gradient(model, field, target, batch[i], options.fidelity);
  });
  std::vector<double> losses(parts.size());
  LossAndGradient out;
  out.grad = GradientField::Zero(field.num_segments(), field.num_controls());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    losses[i] = parts[i].loss;
    out.grad += parts[i].grad;
  }
  out.loss = mean_in_order(losses);
  out.grad /= static_cast<double>(parts.size());
  return out;
}

GradientField finite_difference_gradient(const HamiltonianModel& model,
                                         const ControlField& field,
                                         const GateTarget& target,
                                         std::span<const UncertaintySample> batch,
                                         double step,
                                         const LossOptions& options) {
  if (!(step > 0.0)) throw ContractError("finite_difference_gradient: step must be > 0");
  require_batch(batch);
  GradientField grad(field.num_segments(), field.num_controls());
  ControlField probe(field.amplitudes(), field.duration());
  for (Eigen::Index m = 0; m < field.num_segments(); ++m) {
    for (Eigen::Index k = 0; k < field.num_controls(); ++k) {
      const double base = field(m, k);
      probe(m, k) = base + step;
      const double plus = batch_loss(model, probe, target, batch, options);
      probe(m, k) = base - step;
      const double minus = batch_loss(model, probe, target, batch, options);
      probe(m, k) = base;
      grad(m, k) = (plus - minus) / (2.0 * step);
    }
  }
  return grad;
}

}  // namespace bgrape
