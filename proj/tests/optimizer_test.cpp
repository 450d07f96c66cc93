#include "bgrape/optimizer.hpp"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace bgrape {
namespace {

using std::numbers::pi;

UniformBox box02() {
  return {RealVector::Constant(2, -0.2), RealVector::Constant(2, 0.2)};
}

TEST(SgdStep, Examples) {
  ControlField f(2, 2, 1.0);
  f.amplitudes().setConstant(0.5);
  EXPECT_EQ(sgd_step(f, GradientField::Zero(2, 2), 0.1).amplitudes(), f.amplitudes());
  const ControlField g = sgd_step(f, GradientField::Constant(2, 2, 1.0), 0.1);
  EXPECT_NEAR(g(0, 0), 0.4, 1e-15);

  ControlField bounded(1, 2, 1.0, pi);
  bounded(0, 0) = pi - 0.01;
  const ControlField h = sgd_step(bounded, GradientField::Constant(1, 2, -1.0), 0.1);
  EXPECT_EQ(h(0, 0), pi);
  EXPECT_TRUE(h.within_bounds());
}

TEST(SgdStep, Errors) {
  ControlField f(2, 2, 1.0);
  EXPECT_THROW(sgd_step(f, GradientField::Zero(3, 2), 0.1), ContractError);
  EXPECT_THROW(sgd_step(f, GradientField::Zero(2, 2), 0.0), ContractError);
}

TEST(MomentumStep, Examples) {
  RandomSource rng(1);
  const ControlField f = testing::random_field(3, 2, 1.0, rng);
  const GradientField g = GradientField::Random(3, 2);
  const GradientField p = GradientField::Random(3, 2);
  EXPECT_EQ(momentum_step(f, g, &p, 0.3, 1.0).amplitudes(),
            sgd_step(f, g, 0.3).amplitudes());
  EXPECT_LT((momentum_step(f, g, &g, 0.3, 0.1).amplitudes() -
             sgd_step(f, g, 0.3).amplitudes())
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
  EXPECT_EQ(momentum_step(f, g, nullptr, 0.3, 0.1).amplitudes(),
            sgd_step(f, g, 0.3).amplitudes());

  ControlField zero(1, 1, 1.0);
  const GradientField gj = GradientField::Constant(1, 1, 1.0);
  const GradientField gp = GradientField::Constant(1, 1, -1.0);
  EXPECT_NEAR(momentum_step(zero, gj, &gp, 1.0, 0.1)(0, 0), 0.8, 1e-15);

  EXPECT_THROW(momentum_step(zero, gj, &gp, 1.0, 0.0), ContractError);
  const GradientField wrong = GradientField::Zero(2, 1);
  EXPECT_THROW(momentum_step(zero, gj, &wrong, 1.0, 0.5), ContractError);
}

TEST(LearningRate, StepDecay) {
  OptimizerConfig c;
  c.learning_rate = 0.2;
  EXPECT_EQ(learning_rate_at(c, 1), 0.2);
  EXPECT_EQ(learning_rate_at(c, 1000), 0.2);
  c.decay_every = 10;
  c.decay_factor = 0.5;
  EXPECT_EQ(learning_rate_at(c, 10), 0.2);
  EXPECT_EQ(learning_rate_at(c, 11), 0.1);
  EXPECT_EQ(learning_rate_at(c, 25), 0.05);
}

TEST(RandomInitialField, RespectsRangeAndBound) {
  NoisyQubit model;
  RandomSource rng(2);
  const ControlField f = random_initial_field(model, 40, 2.0, std::nullopt, rng);
  EXPECT_LE(f.amplitudes().cwiseAbs().maxCoeff(), 0.5);
  EXPECT_GT(f.amplitudes().cwiseAbs().maxCoeff(), 0.4);
  const ControlField g = random_initial_field(model, 40, 2.0, 0.1, rng);
  EXPECT_LE(g.amplitudes().cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(g.bound(), 0.1);
}

OptimizerConfig small_config(std::size_t budget) {
  OptimizerConfig c;
  c.learning_rate = 0.05;
  c.step_scale = StepScale::kNormalized;
  c.sample_budget = budget;
  c.test_set_size = 20;
  c.test_every = 5;
  c.seed = 99;
  return c;
}

TEST(Run, SingleIterationBudget) {
  ThreeQubitCoupling model;
  RandomSource init(1);
  const ControlField f0 = random_initial_field(model, 4, 2.0, std::nullopt, init);
  BatchScheduler sched(BatchMode::kFresh, 3, box02(), RandomSource(5, streams::kBatches));
  const OptimizationResult r = run(model, toffoli_target(), f0, sched, small_config(3));
  EXPECT_EQ(r.iterations, 1u);
  ASSERT_EQ(r.trace.rows.size(), 1u);
  EXPECT_EQ(r.trace.rows[0].samples, 3u);
  EXPECT_NE(r.final_field.amplitudes(), f0.amplitudes());
}

TEST(Run, DeterministicForEqualSeeds) {
  ThreeQubitCoupling model;
  auto once = [&] {
    RandomSource init(1);
    const ControlField f0 = random_initial_field(model, 4, 2.0, std::nullopt, init);
    BatchScheduler sched(BatchMode::kFresh, 2, box02(), RandomSource(5, streams::kBatches));
    return run(model, toffoli_target(), f0, sched, small_config(40));
  };
  const OptimizationResult a = once();
  const OptimizationResult b = once();
  ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    EXPECT_EQ(a.trace.rows[i].batch_loss, b.trace.rows[i].batch_loss);
    EXPECT_EQ(a.trace.rows[i].test_loss, b.trace.rows[i].test_loss);
  }
  EXPECT_EQ(a.final_field.amplitudes(), b.final_field.amplitudes());
}

TEST(Run, TraceInvariants) {
  NoisyQubit model;
  RandomSource init(3);
  const ControlField f0 = random_initial_field(model, 10, 2.0, 0.3, init);
  BatchScheduler sched(BatchMode::kFresh, 4, FourierNoise{}, RandomSource(7));
  OptimizerConfig c = small_config(200);
  c.learning_rate = 2.0;
  std::size_t streamed = 0;
  const OptimizationResult r = run(model, rx_pi_target(), f0, sched, c,
                                   [&](const TraceRow&) { ++streamed; });
  EXPECT_EQ(streamed, r.trace.rows.size());
  EXPECT_EQ(r.trace.rows.size(), 50u);
  for (std::size_t i = 0; i < r.trace.rows.size(); ++i) {
    EXPECT_EQ(r.trace.rows[i].samples, 4 * (i + 1));
    EXPECT_EQ(r.trace.rows[i].test_loss.has_value(), (i + 1) % 5 == 0);
  }
  double min_test = r.final_test_loss;
  for (const auto& row : r.trace.rows) {
    if (row.test_loss) min_test = std::min(min_test, *row.test_loss);
  }
  EXPECT_EQ(r.best_test_loss, min_test);
  EXPECT_LE(r.best_test_loss, r.final_test_loss);
  EXPECT_TRUE(r.final_field.within_bounds());
  EXPECT_TRUE(r.best_field.within_bounds());
}

TEST(Run, SingleQubitToyConvergesToPeriodicMinimum) {
  // M = 1, target I, nominal: loss 1 - cos(uT).
  NoisyQubit model;
  ControlField f0(1, 2, 1.0);
  f0(0, 0) = 1.0;
  BatchScheduler sched(BatchMode::kNominal, 1, FourierNoise{}, RandomSource(1));
  OptimizerConfig c = small_config(500);
  c.test_set_size = 1;
  c.test_every = 500;
  const OptimizationResult r =
      run(model, make_target(identity(2), "identity"), f0, sched, c);
  EXPECT_EQ(r.iterations, 500u);
  const double u_t = r.final_field(0, 0) * 1.0;
  const double k = std::round(u_t / (2.0 * pi));
  EXPECT_NEAR(u_t, 2.0 * pi * k, 1e-5);
  EXPECT_LT(r.trace.rows.back().batch_loss, 1e-10);
}

class SplitBudget : public ::testing::TestWithParam<BatchMode> {};

TEST_P(SplitBudget, ConcatenatesLikeOneRun) {
  ThreeQubitCoupling model;
  RandomSource init(4);
  const ControlField f0 = random_initial_field(model, 3, 1.5, std::nullopt, init);
  OptimizerConfig c = small_config(0);
  c.momentum_lambda = 1.0;
  auto make_sched = [&] {
    return BatchScheduler(GetParam(), 2, box02(), RandomSource(8, streams::kBatches));
  };
  const std::size_t per_iter = GetParam() == BatchMode::kNominal ? 1 : 2;

  auto whole_sched = make_sched();
  c.sample_budget = 30 * per_iter;
  const OptimizationResult whole = run(model, toffoli_target(), f0, whole_sched, c);

  auto first_sched = make_sched();
  c.sample_budget = 12 * per_iter;
  const OptimizationResult first = run(model, toffoli_target(), f0, first_sched, c);
  auto second_sched = make_sched();
  c.sample_budget = 18 * per_iter;
  const OptimizationResult second =
      run(model, toffoli_target(), first.final_field, second_sched, c);

  ASSERT_EQ(whole.trace.rows.size(), 30u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(whole.trace.rows[i].batch_loss, first.trace.rows[i].batch_loss);
  }
  for (std::size_t i = 0; i < 18; ++i) {
    EXPECT_EQ(whole.trace.rows[12 + i].batch_loss, second.trace.rows[i].batch_loss);
  }
  EXPECT_EQ(whole.final_field.amplitudes(), second.final_field.amplitudes());
}

INSTANTIATE_TEST_SUITE_P(FixedAndNominal, SplitBudget,
                         ::testing::Values(BatchMode::kFixed, BatchMode::kNominal));

TEST(Run, StopLossEndsEarly) {
  NoisyQubit model;
  ControlField f0(1, 2, 1.0);
  f0(0, 0) = 0.5;
  BatchScheduler sched(BatchMode::kNominal, 1, FourierNoise{}, RandomSource(1));
  OptimizerConfig c = small_config(10000);
  c.stop_loss = 1e-6;
  const OptimizationResult r =
      run(model, make_target(identity(2), "identity"), f0, sched, c);
  EXPECT_TRUE(r.stop_loss_reached);
  EXPECT_LT(r.iterations, 10000u);
  EXPECT_LT(r.trace.rows.back().batch_loss, 1e-6);
}

TEST(Run, FlagsDivergenceButKeepsBestCheckpoint) {
  // Starting next to the optimum with an absurd step: the loss jumps far
  // above ten times its initial value and stays there.
  NoisyQubit model;
  ControlField f0(1, 2, 1.0);
  f0(0, 0) = 1e-3;
  BatchScheduler sched(BatchMode::kNominal, 1, FourierNoise{}, RandomSource(1));
  OptimizerConfig c = small_config(300);
  c.learning_rate = 2.5;
  c.momentum = MomentumKind::kNone;
  c.test_every = 1;
  c.test_set_size = 1;
  const OptimizationResult r =
      run(model, make_target(identity(2), "identity"), f0, sched, c);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.iterations, 300u);
  EXPECT_LE(r.best_test_loss, r.final_test_loss);
  EXPECT_EQ(r.trace.best->iteration, 0u);
}

TEST(Run, AccumulatedMomentumVariantRuns) {
  NoisyQubit model;
  ControlField f0(1, 2, 1.0);
  f0(0, 0) = 1.0;
  BatchScheduler sched(BatchMode::kNominal, 1, FourierNoise{}, RandomSource(1));
  OptimizerConfig c = small_config(400);
  c.momentum = MomentumKind::kAccumulated;
  const OptimizationResult r =
      run(model, make_target(identity(2), "identity"), f0, sched, c);
  EXPECT_LT(r.trace.rows.back().batch_loss, 1e-8);
}

TEST(Run, UnnormalizedStepRescalesTheLearningRate) {
  ThreeQubitCoupling model;
  RandomSource init(6);
  const ControlField f0 = random_initial_field(model, 5, 2.0, std::nullopt, init);
  auto go = [&](StepScale scale, double alpha) {
    BatchScheduler sched(BatchMode::kFresh, 2, box02(), RandomSource(3, streams::kBatches));
    OptimizerConfig c = small_config(20);
    c.step_scale = scale;
    c.learning_rate = alpha;
    return run(model, toffoli_target(), f0, sched, c);
  };
  const OptimizationResult a = go(StepScale::kUnnormalized, 0.01);
  const OptimizationResult b = go(StepScale::kNormalized, 0.01 * 16.0);
  EXPECT_LT((a.final_field.amplitudes() - b.final_field.amplitudes()).norm(), 1e-12);
}

TEST(Run, RejectsInconsistentInputs) {
  ThreeQubitCoupling model;
  BatchScheduler sched(BatchMode::kFresh, 4, box02(), RandomSource(1));
  OptimizerConfig c = small_config(2);
  EXPECT_THROW(run(model, toffoli_target(), ControlField(3, 6, 1.0), sched, c),
               ContractError);
  c.sample_budget = 8;
  EXPECT_THROW(run(model, rx_pi_target(), ControlField(3, 6, 1.0), sched, c),
               ContractError);
  EXPECT_THROW(run(model, toffoli_target(), ControlField(3, 2, 1.0), sched, c),
               ContractError);
  c.momentum_lambda = 1.5;
  EXPECT_THROW(run(model, toffoli_target(), ControlField(3, 6, 1.0), sched, c),
               ContractError);
}

}  // namespace
}  // namespace bgrape
