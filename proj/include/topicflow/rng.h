#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace topicflow {

// Deterministic random source. All sampling goes through explicit formulas
// over mt19937_64 draws so streams are identical across platforms (the
// distribution classes in <random> are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

  uint64_t seed() const { return seed_; }

  // Uniform in [0,1). 53-bit mantissa.
  double uniform();

  // Uniform in [lo,hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (one value per pair of uniform draws;
  // the second value is cached).
  double normal();

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Uniform integer in [0,n). Rejection-sampled, unbiased.
  uint64_t uniform_int(uint64_t n);

  // Child generator with a stream derived from this generator's seed and the
  // tag (not from its current state), so derived streams are stable no matter
  // how much the parent has been consumed.
  Rng derive(const std::string& tag) const;

 private:
  std::mt19937_64 engine_;
  uint64_t seed_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace topicflow
