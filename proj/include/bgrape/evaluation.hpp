#pragma once

// Robustness measures for a fixed control: held-out loss, landscapes over a
// two-parameter uncertainty box, level-set areas, Monte-Carlo error
// distributions, and the textbook pi-pulses used as baselines.

#include <cstddef>
#include <map>
#include <vector>

#include "bgrape/objective.hpp"
#include "bgrape/sampling.hpp"

namespace bgrape {

double test_loss(const HamiltonianModel& model, const ControlField& field,
                 const GateTarget& target,
                 std::span<const UncertaintySample> test_set,
                 const LossOptions& options = {});

struct GridAxis {
  double lo = -0.2;
  double hi = 0.2;
  std::size_t points = 41;

  double spacing() const;
  double node(std::size_t i) const;
};

struct GridSpec {
  GridAxis eps1;
  GridAxis eps2;
};

struct RobustnessLandscape {
  GridSpec grid;
  /// values(i, j) is the infidelity at (eps1.node(i), eps2.node(j)).
  RealMatrix values;
  double threshold = 1e-3;
  double area = 0.0;
};

/// Requires a model with a two-dimensional uncertainty and >= 2 points per
/// axis. The area is filled in for `threshold`.
RobustnessLandscape landscape(const HamiltonianModel& model,
                              const ControlField& field,
                              const GateTarget& target, const GridSpec& grid,
                              double threshold = 1e-3,
                              const LossOptions& options = {});

/// Area of {eps : infidelity(eps) < threshold} by trapezoid-weighted node
/// counting: interior nodes carry one cell, edge nodes half a cell, corner
/// nodes a quarter. A landscape entirely below threshold yields the box area.
double levelset_area(const RobustnessLandscape& landscape, double threshold);

struct ErrorDistribution {
  std::vector<double> errors;  // ascending
  double mean = 0.0;
  double median = 0.0;

  /// Empirical P(error < threshold).
  double probability_below(double threshold) const;
};

ErrorDistribution summarize_errors(std::vector<double> errors);

ErrorDistribution error_distribution(const HamiltonianModel& model,
                                     const ControlField& field,
                                     const GateTarget& target,
                                     const UncertaintyDistribution& dist,
                                     std::size_t num_samples, RandomSource& rng,
                                     const LossOptions& options = {});

enum class BaselineKind { kRectangular, kGaussian };

/// Default Gaussian width as a fraction of the duration.
inline constexpr double kGaussianWidthFraction = 1.0 / 6.0;

/// Two-channel (x, y) pi-pulse with u_y = 0 and 2 * sum_m u_x(m) dt = pi, so
/// the noiseless pulse realizes exp(-i (pi/2) X). The Gaussian is centred at
/// T/2 with standard deviation `gaussian_width` (defaults to T/6) and
/// rescaled on the discrete grid.
ControlField baseline_pulse(BaselineKind kind, double duration,
                            Eigen::Index num_segments,
                            std::optional<double> gaussian_width = std::nullopt);

}  // namespace bgrape
