#pragma once

// Uncertain control-affine Hamiltonians and piecewise-constant propagation.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bgrape/qmat.hpp"

namespace bgrape {

/// Piecewise-constant controls: amplitudes(m, k) is channel k on segment m.
/// All segments have length duration / num_segments.
class ControlField {
 public:
  ControlField(Eigen::Index num_segments, Eigen::Index num_controls,
               double duration, std::optional<double> bound = std::nullopt);
  ControlField(RealMatrix amplitudes, double duration,
               std::optional<double> bound = std::nullopt);

  Eigen::Index num_segments() const { return amplitudes_.rows(); }
  Eigen::Index num_controls() const { return amplitudes_.cols(); }
  double duration() const { return duration_; }
  double dt() const { return duration_ / static_cast<double>(num_segments()); }
  /// Midpoint of segment m (zero-based), where time-dependent terms are sampled.
  double segment_time(Eigen::Index m) const {
    return (static_cast<double>(m) + 0.5) * dt();
  }
  const std::optional<double>& bound() const { return bound_; }

  const RealMatrix& amplitudes() const { return amplitudes_; }
  RealMatrix& amplitudes() { return amplitudes_; }
  double operator()(Eigen::Index m, Eigen::Index k) const { return amplitudes_(m, k); }
  double& operator()(Eigen::Index m, Eigen::Index k) { return amplitudes_(m, k); }

  /// Clamps every amplitude into [-bound, bound]; no-op without a bound.
  void project_to_bounds();
  bool within_bounds() const;

 private:
  RealMatrix amplitudes_;
  double duration_;
  std::optional<double> bound_;
};

/// A family of Hamiltonians of the control-affine form
///   H[u, eps, t] = drift(eps) + control_scale(eps, t) * sum_k u_k A_k.
/// New uncertainty families only need to supply these pieces.
class HamiltonianModel {
 public:
  virtual ~HamiltonianModel() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual Eigen::Index num_controls() const = 0;
  virtual Eigen::Index uncertainty_dim() const = 0;

  virtual ComplexMatrix drift(const UncertaintySample& eps) const = 0;
  virtual double control_scale(const UncertaintySample& eps, double t) const = 0;
  virtual const ComplexMatrix& control_operator(Eigen::Index k) const = 0;

  /// Throws ContractError unless eps has length uncertainty_dim().
  void check_sample(const UncertaintySample& eps) const;
  void check_field(const ControlField& field) const;
};

/// (1 + e1) Z1 Z2 + (1 + e2) Z2 Z3 + sum_q (u_qx X_q + u_qy Y_q) on three
/// qubits. Basis index of |abc> is 4a + 2b + c; channel 2q is X on qubit q,
/// channel 2q + 1 is Y on qubit q.
class ThreeQubitCoupling final : public HamiltonianModel {
 public:
  ThreeQubitCoupling();

  std::string name() const override { return "three_qubit"; }
  Eigen::Index dim() const override { return 8; }
  Eigen::Index num_controls() const override { return 6; }
  Eigen::Index uncertainty_dim() const override { return 2; }

  ComplexMatrix drift(const UncertaintySample& eps) const override;
  double control_scale(const UncertaintySample&, double) const override {
    return 1.0;
  }
  const ComplexMatrix& control_operator(Eigen::Index k) const override;

 private:
  ComplexMatrix z12_;
  ComplexMatrix z23_;
  std::vector<ComplexMatrix> controls_;
};

/// [1 + n(t)] (u_x X + u_y Y) on one qubit, with n(t) the packed Fourier
/// noise sample (see noise_value).
class NoisyQubit final : public HamiltonianModel {
 public:
  explicit NoisyQubit(int num_modes = 10);

  std::string name() const override { return "noisy_qubit"; }
  Eigen::Index dim() const override { return 2; }
  Eigen::Index num_controls() const override { return 2; }
  Eigen::Index uncertainty_dim() const override { return 3 * num_modes_; }

  ComplexMatrix drift(const UncertaintySample& eps) const override;
  double control_scale(const UncertaintySample& eps, double t) const override;
  const ComplexMatrix& control_operator(Eigen::Index k) const override;

 private:
  int num_modes_;
  std::vector<ComplexMatrix> controls_;
};

ComplexMatrix hamiltonian_at(const HamiltonianModel& model,
                             const RealVector& u, const UncertaintySample& eps,
                             double t);

/// dH/du_k; independent of u for control-affine models.
ComplexMatrix control_derivative_at(const HamiltonianModel& model,
                                    Eigen::Index k,
                                    const UncertaintySample& eps, double t);

/// U(T, eps) = V_M ... V_1 with V_m = exp(-i H_m dt), H_m taken at the
/// segment midpoint.
ComplexMatrix propagate(const HamiltonianModel& model, const ControlField& field,
                        const UncertaintySample& eps);

/// Forward-pass cache for the gradient engine.
struct SegmentDecomposition {
  double dt = 0.0;
  std::vector<HermitianEigen> eigen;      // of H_m
  std::vector<ComplexMatrix> unitaries;   // V_m
  std::vector<ComplexMatrix> forward;     // P_0 = I, P_m = V_m P_{m-1}
  std::vector<double> scale;              // control_scale at t_m

  const ComplexMatrix& final_propagator() const { return forward.back(); }
};

SegmentDecomposition decompose(const HamiltonianModel& model,
                               const ControlField& field,
                               const UncertaintySample& eps);

}  // namespace bgrape
