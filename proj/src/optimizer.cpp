#include "bgrape/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace bgrape {

namespace {

void require_same_shape(const ControlField& field, const GradientField& grad) {
  if (grad.rows() != field.num_segments() || grad.cols() != field.num_controls()) {
    std::ostringstream os;
    os << "gradient shape " << grad.rows() << "x" << grad.cols()
       << " does not match control field " << field.num_segments() << "x"
       << field.num_controls();
    throw ContractError(os.str());
  }
}

}  // namespace

void validate(const OptimizerConfig& config, std::size_t batch_size) {
  if (!(config.learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (!(config.momentum_lambda > 0.0 && config.momentum_lambda <= 1.0)) {
    throw ContractError("momentum lambda must lie in (0, 1]");
  }
  if (config.sample_budget < batch_size) {
    throw ContractError("sample_budget must be at least the batch size");
  }
  if (config.test_every < 1) throw ContractError("test_every must be >= 1");
  if (config.test_set_size < 1) throw ContractError("test_set_size must be >= 1");
  if (config.decay_every > 0 && !(config.decay_factor > 0.0)) {
    throw ContractError("decay_factor must be > 0");
  }
  if (config.threads < 1) throw ContractError("threads must be >= 1");
}

double learning_rate_at(const OptimizerConfig& config, std::size_t iteration) {
  if (config.decay_every == 0 || iteration == 0) return config.learning_rate;
  const auto drops = static_cast<double>((iteration - 1) / config.decay_every);
  return config.learning_rate * std::pow(config.decay_factor, drops);
}

ControlField sgd_step(const ControlField& field, const GradientField& grad,
                      double alpha) {
  require_same_shape(field, grad);
  if (!(alpha > 0.0)) throw ContractError("sgd_step: alpha must be > 0");
  ControlField next = field;
  next.amplitudes() -= alpha * grad;
  next.project_to_bounds();
  return next;
}

ControlField momentum_step(const ControlField& field, const GradientField& grad,
                           const GradientField* grad_prev, double alpha,
                           double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw ContractError("momentum_step: lambda must lie in (0, 1]");
  }
  if (grad_prev == nullptr) return sgd_step(field, grad, alpha);
  require_same_shape(field, *grad_prev);
  return sgd_step(field, lambda * grad + (1.0 - lambda) * *grad_prev, alpha);
}

ControlField random_initial_field(const HamiltonianModel& model,
                                  Eigen::Index num_segments, double duration,
                                  std::optional<double> bound,
                                  RandomSource& rng) {
  ControlField field(num_segments, model.num_controls(), duration, bound);
  const double a = bound ? std::min(0.5, *bound) : 0.5;
  for (Eigen::Index m = 0; m < field.num_segments(); ++m) {
    for (Eigen::Index k = 0; k < field.num_controls(); ++k) {
      field(m, k) = rng.uniform(-a, a);
    }
  }
  return field;
}

OptimizationResult run(const HamiltonianModel& model, const GateTarget& target,
                       const ControlField& initial_field,
                       BatchScheduler& scheduler, const OptimizerConfig& config,
                       const TraceSink& sink) {
  validate(config, scheduler.batch_size());
  model.check_field(initial_field);
  if (target.matrix.rows() != model.dim()) {
    throw ContractError("target dimension does not match the model");
  }
  if (!initial_field.within_bounds()) {
    throw ContractError("initial field violates its amplitude bound");
  }

  const auto started = std::chrono::steady_clock::now();
  const LossOptions loss_options{config.fidelity, config.threads};
  const double grad_scale = config.step_scale == StepScale::kUnnormalized
                                ? unnormalized_scale(config.fidelity, model.dim())
                                : 1.0;

  RandomSource test_rng(config.seed, streams::kTestSet);
  const std::vector<UncertaintySample> test_set =
      draw_many(scheduler.distribution(), config.test_set_size, test_rng);
  auto evaluate = [&](const ControlField& f) {
    return batch_loss(model, f, target, test_set, loss_options);
  };

  OptimizationResult result{
      initial_field, initial_field, 0.0, 0.0, 0, 0, false, false, {}, config};
  TrainingTrace& trace = result.trace;
  auto consider_best = [&](const ControlField& f, double test_loss,
                           std::size_t iteration) {
    if (!trace.best || test_loss < trace.best->test_loss) {
      trace.best = Checkpoint{f, test_loss, iteration};
    }
  };

  ControlField field = initial_field;
  GradientField previous;
  bool have_previous = false;
  double first_loss = 0.0;
  std::size_t over_run = 0;
  std::size_t samples = 0;
  std::size_t j = 0;

  while (samples < config.sample_budget) {
    ++j;
    const auto& batch = scheduler.next_batch();
    samples += batch.size();
    LossAndGradient lg = batch_gradient(model, field, target, batch, loss_options);
    if (grad_scale != 1.0) lg.grad *= grad_scale;

    TraceRow row;
    row.iteration = j;
    row.samples = samples;
    row.batch_loss = lg.loss;
    if (j % config.test_every == 0) {
      row.test_loss = evaluate(field);
      consider_best(field, *row.test_loss, j - 1);
    }

    if (j == 1) first_loss = lg.loss;
    over_run = lg.loss > kDivergenceFactor * first_loss ? over_run + 1 : 0;
    if (over_run >= kDivergenceWindow) result.diverged = true;

    const double alpha = learning_rate_at(config, j);
    switch (config.momentum) {
      case MomentumKind::kNone:
        field = sgd_step(field, lg.grad, alpha);
        break;
      case MomentumKind::kBlend:
        field = momentum_step(field, lg.grad, have_previous ? &previous : nullptr,
                              alpha, config.momentum_lambda);
        previous = lg.grad;
        break;
      case MomentumKind::kAccumulated:
        previous = have_previous ? GradientField(config.momentum_lambda * lg.grad +
                                                 (1.0 - config.momentum_lambda) *
                                                     previous)
                                 : lg.grad;
        field = sgd_step(field, previous, alpha);
        break;
    }
    have_previous = true;

    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    trace.rows.push_back(row);
    if (sink) sink(row);

    if (config.stop_loss && lg.loss < *config.stop_loss) {
      result.stop_loss_reached = true;
      break;
    }
  }

  result.iterations = j;
  result.samples = samples;
  result.final_field = field;
  result.final_test_loss = evaluate(field);
  consider_best(field, result.final_test_loss, j);
  result.best_field = trace.best->field;
  result.best_test_loss = trace.best->test_loss;
  return result;
}

}  // namespace bgrape
