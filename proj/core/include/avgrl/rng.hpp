#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace avgrl {

// Seeded pseudo-random generator used everywhere a module needs randomness.
// Wraps mt19937_64 with explicit sampling routines instead of the standard
// <random> distributions, whose outputs differ between library
// implementations. State round-trips exactly through to_string/from_string.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller. Draws two engine words per call and
  // keeps no cached spare, so serialized state fully determines the stream.
  double normal();
  // Uniform integer in [0, n). Requires n >= 1.
  std::uint64_t uniform_int(std::uint64_t n);
  std::uint64_t next_u64() { return engine_(); }

  std::string to_string() const;
  static Rng from_string(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace avgrl
