#include "topicflow/rng.h"

#include <cmath>

namespace topicflow {

double Rng::uniform() {
  return (engine_() >> 11) * (1.0 / 9007199254740992.0);  // 2^53
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

uint64_t Rng::uniform_int(uint64_t n) {
  if (n == 0) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % n;
}

Rng Rng::derive(const std::string& tag) const {
  // FNV-1a over the tag bytes, mixed with the root seed.
  uint64_t h = 14695981039346656037ull ^ seed_;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer to spread low-entropy tags across the state space.
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  h = h ^ (h >> 31);
  return Rng(h);
}

}  // namespace topicflow
