#include "bgrape/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bgrape/parallel.hpp"

namespace bgrape {

double test_loss(const HamiltonianModel& model, const ControlField& field,
                 const GateTarget& target,
                 std::span<const UncertaintySample> test_set,
                 const LossOptions& options) {
  return batch_loss(model, field, target, test_set, options);
}

double GridAxis::spacing() const {
  return (hi - lo) / static_cast<double>(points - 1);
}

double GridAxis::node(std::size_t i) const {
  if (i + 1 == points) return hi;
  return lo + static_cast<double>(i) * spacing();
}

namespace {

void validate_axis(const GridAxis& axis, const char* name) {
  if (axis.points < 2) {
    throw ContractError(std::string("landscape: axis ") + name +
                        " needs at least 2 points");
  }
  if (!(axis.lo <= axis.hi)) {
    throw ContractError(std::string("landscape: axis ") + name + " has lo > hi");
  }
}

double edge_weight(std::size_t i, std::size_t points) {
  return (i == 0 || i + 1 == points) ? 0.5 : 1.0;
}

}  // namespace

RobustnessLandscape landscape(const HamiltonianModel& model,
                              const ControlField& field,
                              const GateTarget& target, const GridSpec& grid,
                              double threshold, const LossOptions& options) {
  if (model.uncertainty_dim() != 2) {
    std::ostringstream os;
    os << "landscape: model '" << model.name() << "' has "
       << model.uncertainty_dim() << " uncertainty parameters, need 2";
    throw ContractError(os.str());
  }
  validate_axis(grid.eps1, "eps1");
  validate_axis(grid.eps2, "eps2");
  const std::size_t n1 = grid.eps1.points;
  const std::size_t n2 = grid.eps2.points;

  std::vector<UncertaintySample> nodes;
  nodes.reserve(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      UncertaintySample eps(2);
      eps << grid.eps1.node(i), grid.eps2.node(j);
      nodes.push_back(std::move(eps));
    }
  }
  const std::vector<double> losses =
      sample_losses(model, field, target, nodes, options);

  RobustnessLandscape out;
  out.grid = grid;
  out.values.resize(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n2));
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          losses[i * n2 + j];
    }
  }
  out.threshold = threshold;
  out.area = levelset_area(out, threshold);
  return out;
}

double levelset_area(const RobustnessLandscape& landscape, double threshold) {
  if (!(threshold > 0.0)) throw ContractError("levelset_area: threshold must be > 0");
  const GridAxis& a1 = landscape.grid.eps1;
  const GridAxis& a2 = landscape.grid.eps2;
  if (landscape.values.rows() != static_cast<Eigen::Index>(a1.points) ||
      landscape.values.cols() != static_cast<Eigen::Index>(a2.points)) {
    throw ContractError("levelset_area: values do not match the grid");
  }
  double cells = 0.0;
  for (std::size_t i = 0; i < a1.points; ++i) {
    for (std::size_t j = 0; j < a2.points; ++j) {
      if (landscape.values(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(j)) < threshold) {
        cells += edge_weight(i, a1.points) * edge_weight(j, a2.points);
      }
    }
  }
  return cells * a1.spacing() * a2.spacing();
}

double ErrorDistribution::probability_below(double threshold) const {
  if (errors.empty()) return 0.0;
  const auto below = std::lower_bound(errors.begin(), errors.end(), threshold);
  return static_cast<double>(below - errors.begin()) /
         static_cast<double>(errors.size());
}

ErrorDistribution summarize_errors(std::vector<double> errors) {
  ErrorDistribution out;
  out.errors = std::move(errors);
  std::sort(out.errors.begin(), out.errors.end());
  const std::size_t n = out.errors.size();
  if (n == 0) return out;
  double sum = 0.0;
  for (double e : out.errors) sum += e;
  out.mean = sum / static_cast<double>(n);
  out.median = n % 2 == 1 ? out.errors[n / 2]
                          : 0.5 * (out.errors[n / 2 - 1] + out.errors[n / 2]);
  return out;
}

ErrorDistribution error_distribution(const HamiltonianModel& model,
                                     const ControlField& field,
                                     const GateTarget& target,
                                     const UncertaintyDistribution& dist,
                                     std::size_t num_samples, RandomSource& rng,
                                     const LossOptions& options) {
  if (num_samples < 1) throw ContractError("error_distribution: need >= 1 sample");
  validate(dist);
  const std::vector<UncertaintySample> samples = draw_many(dist, num_samples, rng);
  return summarize_errors(sample_losses(model, field, target, samples, options));
}

ControlField baseline_pulse(BaselineKind kind, double duration,
                            Eigen::Index num_segments,
                            std::optional<double> gaussian_width) {
  if (!(duration > 0.0)) throw ContractError("baseline_pulse: duration must be > 0");
  if (num_segments < 1) throw ContractError("baseline_pulse: need >= 1 segment");
  ControlField field(num_segments, 2, duration);
  const double dt = field.dt();
  // Rotation angle 2 * integral(u_x) = pi.
  const double area = std::numbers::pi / 2.0;
  if (kind == BaselineKind::kRectangular) {
    field.amplitudes().col(0).setConstant(area / duration);
    return field;
  }
  const double sigma = gaussian_width.value_or(kGaussianWidthFraction * duration);
  if (!(sigma > 0.0)) throw ContractError("baseline_pulse: Gaussian width must be > 0");
  double sum = 0.0;
  for (Eigen::Index m = 0; m < num_segments; ++m) {
    const double x = (field.segment_time(m) - 0.5 * duration) / sigma;
    field(m, 0) = std::exp(-0.5 * x * x);
    sum += field(m, 0);
  }
  field.amplitudes().col(0) *= area / (sum * dt);
  return field;
}

}  // namespace bgrape
