#include "bgrape/dynamics.hpp"

#include <algorithm>
#include <sstream>

#include "bgrape/sampling.hpp"

namespace bgrape {

ControlField::ControlField(Eigen::Index num_segments, Eigen::Index num_controls,
                           double duration, std::optional<double> bound)
    : ControlField(RealMatrix::Zero(std::max<Eigen::Index>(num_segments, 0),
                                    std::max<Eigen::Index>(num_controls, 0)),
                   duration, bound) {}

ControlField::ControlField(RealMatrix amplitudes, double duration,
                           std::optional<double> bound)
    : amplitudes_(std::move(amplitudes)), duration_(duration), bound_(bound) {
  if (amplitudes_.rows() < 1 || amplitudes_.cols() < 1) {
    throw ContractError("ControlField: need at least one segment and one control");
  }
  if (!(duration_ > 0.0)) throw ContractError("ControlField: duration must be > 0");
  if (bound_ && !(*bound_ >= 0.0)) {
    throw ContractError("ControlField: amplitude bound must be >= 0");
  }
}

void ControlField::project_to_bounds() {
  if (!bound_) return;
  const double b = *bound_;
  amplitudes_ = amplitudes_.cwiseMax(-b).cwiseMin(b);
}

bool ControlField::within_bounds() const {
  if (!bound_) return true;
  return amplitudes_.cwiseAbs().maxCoeff() <= *bound_;
}

void HamiltonianModel::check_sample(const UncertaintySample& eps) const {
  if (eps.size() != uncertainty_dim()) {
    std::ostringstream os;
    os << name() << ": uncertainty sample has length " << eps.size()
       << ", expected " << uncertainty_dim();
    throw ContractError(os.str());
  }
}

void HamiltonianModel::check_field(const ControlField& field) const {
  if (field.num_controls() != num_controls()) {
    std::ostringstream os;
    os << name() << ": control field has " << field.num_controls()
       << " channels, expected " << num_controls();
    throw ContractError(os.str());
  }
}

ThreeQubitCoupling::ThreeQubitCoupling() {
  const ComplexMatrix i2 = identity(2);
  const ComplexMatrix z = pauli(PauliAxis::kZ);
  z12_ = kron(kron(z, z), i2);
  z23_ = kron(i2, kron(z, z));
  for (int q = 0; q < 3; ++q) {
    for (PauliAxis axis : {PauliAxis::kX, PauliAxis::kY}) {
      ComplexMatrix op = q == 0 ? pauli(axis) : i2;
      for (int r = 1; r < 3; ++r) op = kron(op, r == q ? pauli(axis) : i2);
      controls_.push_back(std::move(op));
    }
  }
}

ComplexMatrix ThreeQubitCoupling::drift(const UncertaintySample& eps) const {
  check_sample(eps);
  return (1.0 + eps(0)) * z12_ + (1.0 + eps(1)) * z23_;
}

const ComplexMatrix& ThreeQubitCoupling::control_operator(Eigen::Index k) const {
  if (k < 0 || k >= num_controls()) {
    throw ContractError("three_qubit: control index out of range");
  }
  return controls_[static_cast<std::size_t>(k)];
}

NoisyQubit::NoisyQubit(int num_modes) : num_modes_(num_modes) {
  if (num_modes_ < 1) throw ContractError("noisy_qubit: need at least one noise mode");
  controls_ = {pauli(PauliAxis::kX), pauli(PauliAxis::kY)};
}

ComplexMatrix NoisyQubit::drift(const UncertaintySample& eps) const {
  check_sample(eps);
  return ComplexMatrix::Zero(2, 2);
}

double NoisyQubit::control_scale(const UncertaintySample& eps, double t) const {
  check_sample(eps);
  return 1.0 + noise_value(eps, t);
}

const ComplexMatrix& NoisyQubit::control_operator(Eigen::Index k) const {
  if (k < 0 || k >= num_controls()) {
    throw ContractError("noisy_qubit: control index out of range");
  }
  return controls_[static_cast<std::size_t>(k)];
}

namespace {

ComplexMatrix segment_hamiltonian(const HamiltonianModel& model,
                                  const ComplexMatrix& drift,
                                  const ControlField& field, Eigen::Index m,
                                  double scale) {
  ComplexMatrix h = drift;
  for (Eigen::Index k = 0; k < model.num_controls(); ++k) {
    const double u = field(m, k);
    if (u != 0.0) h += (scale * u) * model.control_operator(k);
  }
  return h;
}

}  // namespace

ComplexMatrix hamiltonian_at(const HamiltonianModel& model, const RealVector& u,
                             const UncertaintySample& eps, double t) {
  model.check_sample(eps);
  if (u.size() != model.num_controls()) {
    throw ContractError(model.name() + ": control vector length mismatch");
  }
  ComplexMatrix h = model.drift(eps);
  const double scale = model.control_scale(eps, t);
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    h += (scale * u(k)) * model.control_operator(k);
  }
  return h;
}

ComplexMatrix control_derivative_at(const HamiltonianModel& model,
                                    Eigen::Index k,
                                    const UncertaintySample& eps, double t) {
  return model.control_scale(eps, t) * model.control_operator(k);
}

ComplexMatrix propagate(const HamiltonianModel& model, const ControlField& field,
                        const UncertaintySample& eps) {
  model.check_field(field);
  const ComplexMatrix drift = model.drift(eps);
  const double dt = field.dt();
  ComplexMatrix p = identity(model.dim());
  for (Eigen::Index m = 0; m < field.num_segments(); ++m) {
    const double scale = model.control_scale(eps, field.segment_time(m));
    const HermitianEigen eig =
        hermitian_eig(segment_hamiltonian(model, drift, field, m, scale));
    const ComplexMatrix v = expm_unitary(eig, dt);
    p = v * p;
  }
  return p;
}

SegmentDecomposition decompose(const HamiltonianModel& model,
                               const ControlField& field,
                               const UncertaintySample& eps) {
  model.check_field(field);
  const ComplexMatrix drift = model.drift(eps);
  const auto segments = static_cast<std::size_t>(field.num_segments());
  SegmentDecomposition d;
  d.dt = field.dt();
  d.eigen.reserve(segments);
  d.unitaries.reserve(segments);
  d.scale.reserve(segments);
  d.forward.reserve(segments + 1);
  d.forward.push_back(identity(model.dim()));
  for (Eigen::Index m = 0; m < field.num_segments(); ++m) {
    const double scale = model.control_scale(eps, field.segment_time(m));
    d.eigen.push_back(
        hermitian_eig(segment_hamiltonian(model, drift, field, m, scale)));
    d.unitaries.push_back(expm_unitary(d.eigen.back(), d.dt));
    d.forward.push_back(d.unitaries.back() * d.forward.back());
    d.scale.push_back(scale);
  }
  return d;
}

}  // namespace bgrape
