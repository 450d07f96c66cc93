#pragma once

// Gate infidelity, the empirical batch risk and its exact gradient.

#include <span>
#include <string>
#include <vector>

#include "bgrape/dynamics.hpp"

namespace bgrape {

struct GateTarget {
  ComplexMatrix matrix;
  std::string label;
};

/// Throws ContractError unless the matrix is unitary within 1e-10.
GateTarget make_target(ComplexMatrix matrix, std::string label);
GateTarget toffoli_target();
/// exp(-i (pi/2) X) = -i X, the qubit flip.
GateTarget rx_pi_target();

/// The target times exp(-i arg(det U_f) / N), so that its determinant is 1.
/// Traceless Hamiltonians only generate unitaries of determinant 1; the
/// phase-sensitive infidelity of Toffoli (det -1) is bounded below by
/// 1 - cos(pi/8) for them, while the rephased gate is exactly reachable.
GateTarget special_unitary_representative(const GateTarget& target);

enum class FidelityKind {
  /// ||U - U_f||_F^2 / (2N) = 1 - Re Tr(U_f^dagger U) / N.
  kPhaseSensitive,
  /// 1 - |Tr(U_f^dagger U)|^2 / N^2.
  kPhaseInvariant,
};

using GradientField = RealMatrix;

/// Factor relating the normalized infidelity to the unnormalized squared
/// distance: 2N for the phase-sensitive kind (exact), N for the
/// phase-invariant kind (to leading order near a phase-aligned optimum).
double unnormalized_scale(FidelityKind kind, Eigen::Index dim);

double infidelity(const ComplexMatrix& u, const GateTarget& target,
                  FidelityKind kind = FidelityKind::kPhaseSensitive);

struct LossOptions {
  FidelityKind fidelity = FidelityKind::kPhaseSensitive;
  /// Worker-count hint. Results do not depend on it: per-sample values are
  /// reduced in batch order.
  int threads = 1;
};

double batch_loss(const HamiltonianModel& model, const ControlField& field,
                  const GateTarget& target,
                  std::span<const UncertaintySample> batch,
                  const LossOptions& options = {});

/// Per-sample infidelities in batch order.
std::vector<double> sample_losses(const HamiltonianModel& model,
                                  const ControlField& field,
                                  const GateTarget& target,
                                  std::span<const UncertaintySample> batch,
                                  const LossOptions& options = {});

struct LossAndGradient {
  double loss = 0.0;
  GradientField grad;
};

/// Exact loss and gradient for one sample via a forward/backward sweep.
LossAndGradient sample_gradient(const HamiltonianModel& model,
                                const ControlField& field,
                                const GateTarget& target,
                                const UncertaintySample& eps,
                                FidelityKind fidelity = FidelityKind::kPhaseSensitive);

/// Batch mean of sample_gradient. The returned loss is bit-identical to
/// batch_loss on the same inputs.
LossAndGradient batch_gradient(const HamiltonianModel& model,
                               const ControlField& field,
                               const GateTarget& target,
                               std::span<const UncertaintySample> batch,
                               const LossOptions& options = {});

/// Central differences of batch_loss, one amplitude at a time. Bounds are
/// ignored while probing.
GradientField finite_difference_gradient(const HamiltonianModel& model,
                                         const ControlField& field,
                                         const GateTarget& target,
                                         std::span<const UncertaintySample> batch,
                                         double step,
                                         const LossOptions& options = {});

}  // namespace bgrape
