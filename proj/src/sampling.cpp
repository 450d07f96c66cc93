#include "bgrape/sampling.hpp"

#include <cmath>
#include <sstream>

namespace bgrape {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed + kGamma) ^ mix64(stream * kGamma + 0x632BE59BD9B4E019ULL));
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

std::uint64_t RandomSource::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RandomSource::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomSource::gaussian() {
  // 1 - uniform() lies in (0, 1], keeping the log finite.
  const double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  return r * std::cos(theta);
}

RandomSource RandomSource::substream(std::uint64_t index) const {
  return RandomSource(seed_, mix64(stream_ * kGamma + index + 1));
}

void validate(const UncertaintyDistribution& dist) {
  if (const auto* box = std::get_if<UniformBox>(&dist)) {
    if (box->lo.size() != box->hi.size() || box->lo.size() == 0) {
      throw ContractError("UniformBox: lo and hi must be non-empty and equal length");
    }
    for (Eigen::Index i = 0; i < box->lo.size(); ++i) {
      if (!(box->lo(i) <= box->hi(i))) {
        std::ostringstream os;
        os << "UniformBox: lo[" << i << "] = " << box->lo(i) << " exceeds hi["
           << i << "] = " << box->hi(i);
        throw ContractError(os.str());
      }
    }
    return;
  }
  const auto& noise = std::get<FourierNoise>(dist);
  if (noise.num_modes < 1) throw ContractError("FourierNoise: num_modes must be >= 1");
  if (!(noise.amp_sigma > 0.0)) throw ContractError("FourierNoise: amp_sigma must be > 0");
  if (!(noise.freq_lo <= noise.freq_hi)) {
    throw ContractError("FourierNoise: freq_lo must not exceed freq_hi");
  }
}

Eigen::Index sample_dim(const UncertaintyDistribution& dist) {
  if (const auto* box = std::get_if<UniformBox>(&dist)) return box->lo.size();
  return 3 * std::get<FourierNoise>(dist).num_modes;
}

UncertaintySample draw(const UncertaintyDistribution& dist, RandomSource& rng) {
  if (const auto* box = std::get_if<UniformBox>(&dist)) {
    UncertaintySample s(box->lo.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      s(i) = rng.uniform(box->lo(i), box->hi(i));
    }
    return s;
  }
  const auto& noise = std::get<FourierNoise>(dist);
  const int k = noise.num_modes;
  UncertaintySample s(3 * k);
  for (int i = 0; i < 2 * k; ++i) s(i) = noise.amp_sigma * rng.gaussian();
  for (int i = 0; i < k; ++i) {
    s(2 * k + i) = rng.uniform(noise.freq_lo, noise.freq_hi);
  }
  return s;
}

std::vector<UncertaintySample> draw_many(const UncertaintyDistribution& dist,
                                         std::size_t count, RandomSource& rng) {
  std::vector<UncertaintySample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(dist, rng));
  return out;
}

double noise_value(const UncertaintySample& sample, double t) {
  if (sample.size() == 0 || sample.size() % 3 != 0) {
    std::ostringstream os;
    os << "noise_value: sample length " << sample.size()
       << " is not a positive multiple of 3";
    throw ContractError(os.str());
  }
  const Eigen::Index k = sample.size() / 3;
  double n = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double w = sample(2 * k + i);
    n += sample(i) * std::cos(w * t) + sample(k + i) * std::sin(w * t);
  }
  return n;
}

BatchScheduler::BatchScheduler(BatchMode mode, std::size_t batch_size,
                               UncertaintyDistribution dist, RandomSource rng)
    : mode_(mode), dist_(std::move(dist)), rng_(rng) {
  validate(dist_);
  if (batch_size < 1) throw ContractError("BatchScheduler: batch size must be >= 1");
  switch (mode_) {
    case BatchMode::kNominal:
      batch_.assign(1, UncertaintySample::Zero(sample_dim(dist_)));
      break;
    case BatchMode::kFixed:
      batch_ = draw_many(dist_, batch_size, rng_);
      break;
    case BatchMode::kFresh:
      batch_.assign(batch_size, UncertaintySample::Zero(sample_dim(dist_)));
      break;
  }
}

const std::vector<UncertaintySample>& BatchScheduler::next_batch() {
  if (mode_ == BatchMode::kFresh) {
    for (auto& s : batch_) s = draw(dist_, rng_);
  }
  ++calls_;
  return batch_;
}

}  // namespace bgrape
