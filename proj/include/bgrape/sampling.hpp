#pragma once

// Seeded sampling of uncertainty parameters and the batch schedules that
// distinguish b-GRAPE (fresh batches), s-GRAPE (one frozen batch) and GRAPE
// (the nominal sample only).

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <variant>
#include <vector>

#include "bgrape/types.hpp"

namespace bgrape {

/// Counter-based generator. Output i of a source is a pure function of
/// (seed, stream, i): a SplitMix64 finalizer applied to key + (i + 1) * gamma.
/// The stream therefore does not depend on the standard library, and a
/// worker can be handed substream(k) without coordination.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; consumes exactly two outputs.
  double gaussian();

  /// Independent source derived from (seed, stream, index).
  RandomSource substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Independent uniform coordinates on [lo_i, hi_i].
struct UniformBox {
  RealVector lo;
  RealVector hi;
};

/// Random low-frequency noise n(t) = sum_k a_k cos(w_k t) + b_k sin(w_k t)
/// with a_k, b_k ~ N(0, amp_sigma^2) and w_k ~ U[freq_lo, freq_hi].
/// Samples are packed as [a_1..a_K | b_1..b_K | w_1..w_K].
struct FourierNoise {
  int num_modes = 10;
  double freq_lo = 0.0;
  double freq_hi = 2.0 * std::numbers::pi;
  double amp_sigma = 0.05;
};

using UncertaintyDistribution = std::variant<UniformBox, FourierNoise>;

/// Validates the distribution parameters; throws ContractError.
void validate(const UncertaintyDistribution& dist);
Eigen::Index sample_dim(const UncertaintyDistribution& dist);

UncertaintySample draw(const UncertaintyDistribution& dist, RandomSource& rng);
std::vector<UncertaintySample> draw_many(const UncertaintyDistribution& dist,
                                         std::size_t count, RandomSource& rng);

/// n(t) for a packed FourierNoise sample. The sample length must be a
/// positive multiple of three.
double noise_value(const UncertaintySample& sample, double t);

enum class BatchMode {
  kFresh,    // b-GRAPE: a new i.i.d. batch every call
  kFixed,    // s-GRAPE: one batch frozen at construction
  kNominal,  // GRAPE: the zero sample only
};

class BatchScheduler {
 public:
  /// The fixed batch is drawn from `rng` at construction, so with equal seeds
  /// the fixed batch equals the first fresh batch.
  BatchScheduler(BatchMode mode, std::size_t batch_size,
                 UncertaintyDistribution dist, RandomSource rng);

  const std::vector<UncertaintySample>& next_batch();

  BatchMode mode() const { return mode_; }
  /// Samples per call; 1 in nominal mode.
  std::size_t batch_size() const { return batch_.size(); }
  const UncertaintyDistribution& distribution() const { return dist_; }
  std::size_t calls() const { return calls_; }
  /// B * calls, the sample counter shown on training curves.
  std::size_t samples_consumed() const { return calls_ * batch_.size(); }

 private:
  BatchMode mode_;
  UncertaintyDistribution dist_;
  RandomSource rng_;
  std::vector<UncertaintySample> batch_;
  std::size_t calls_ = 0;
};

}  // namespace bgrape
