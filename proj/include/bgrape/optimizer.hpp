#pragma once

// The b-GRAPE training loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bgrape/objective.hpp"
#include "bgrape/sampling.hpp"

namespace bgrape {

enum class MomentumKind {
  kNone,
  /// u -= alpha (lambda g_j + (1 - lambda) g_{j-1}); plain SGD on the first step.
  kBlend,
  /// v_j = lambda g_j + (1 - lambda) v_{j-1}; u -= alpha v_j.
  kAccumulated,
};

/// Substream indices derived from OptimizerConfig::seed.
namespace streams {
inline constexpr std::uint64_t kBatches = 1;
inline constexpr std::uint64_t kTestSet = 2;
inline constexpr std::uint64_t kInitialGuess = 3;
inline constexpr std::uint64_t kEvaluation = 4;
}  // namespace streams

enum class StepScale {
  /// Steps follow the gradient of unnormalized_scale() * loss, so learning
  /// rates refer to the squared distance ||U - U_f||^2.
  kUnnormalized,
  /// Steps follow the gradient of the normalized loss itself.
  kNormalized,
};

struct OptimizerConfig {
  double learning_rate = 0.02;
  StepScale step_scale = StepScale::kUnnormalized;
  MomentumKind momentum = MomentumKind::kBlend;
  double momentum_lambda = 0.1;
  /// Training stops once B * iterations reaches this.
  std::size_t sample_budget = 100000;
  std::size_t test_set_size = 1000;
  std::size_t test_every = 100;
  std::uint64_t seed = 0;
  /// Stop early once a batch loss falls below this value.
  std::optional<double> stop_loss;
  /// Step decay: alpha_j = learning_rate * decay_factor^floor((j-1)/decay_every).
  std::size_t decay_every = 0;
  double decay_factor = 1.0;
  FidelityKind fidelity = FidelityKind::kPhaseSensitive;
  int threads = 1;
};

/// Throws ContractError on out-of-range values. batch_size is the scheduler's.
void validate(const OptimizerConfig& config, std::size_t batch_size);

double learning_rate_at(const OptimizerConfig& config, std::size_t iteration);

struct TraceRow {
  std::size_t iteration = 0;  // 1-based
  std::size_t samples = 0;    // B * iteration
  double batch_loss = 0.0;    // at the field before this iteration's update
  std::optional<double> test_loss;
  double wall_seconds = 0.0;
};

struct Checkpoint {
  ControlField field;
  double test_loss = 0.0;
  /// Iterations completed when the snapshot was taken.
  std::size_t iteration = 0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  std::optional<Checkpoint> best;
};

struct OptimizationResult {
  ControlField final_field;
  ControlField best_field;
  double final_test_loss = 0.0;
  double best_test_loss = 0.0;
  std::size_t iterations = 0;
  std::size_t samples = 0;
  bool diverged = false;
  bool stop_loss_reached = false;
  TrainingTrace trace;
  OptimizerConfig config;
};

/// Receives each trace row as soon as it is complete.
using TraceSink = std::function<void(const TraceRow&)>;

ControlField sgd_step(const ControlField& field, const GradientField& grad,
                      double alpha);

/// Without a previous gradient this is sgd_step.
ControlField momentum_step(const ControlField& field, const GradientField& grad,
                           const GradientField* grad_prev, double alpha,
                           double lambda);

/// Uniform amplitudes on [-a, a] with a = min(0.5, bound).
ControlField random_initial_field(const HamiltonianModel& model,
                                  Eigen::Index num_segments, double duration,
                                  std::optional<double> bound,
                                  RandomSource& rng);

/// Batch loss exceeding this multiple of the first batch loss for
/// kDivergenceWindow consecutive rows flags the run as diverged.
inline constexpr double kDivergenceFactor = 10.0;
inline constexpr std::size_t kDivergenceWindow = 100;

OptimizationResult run(const HamiltonianModel& model, const GateTarget& target,
                       const ControlField& initial_field,
                       BatchScheduler& scheduler, const OptimizerConfig& config,
                       const TraceSink& sink = {});

}  // namespace bgrape
