#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace tvc {

/// Named sub-streams of the single run seed.
enum class Stream : std::uint64_t {
  kWorld = 1,
  kInit = 2,
  kRollout = 3,
  kAugmentation = 4,
  kTta = 5,
  kEval = 6,
};

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);
std::uint64_t hash_string(std::string_view s);

/// mt19937_64 plus distribution helpers written out by hand so draws are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    return Rng(mix_seed({seed, static_cast<std::uint64_t>(stream), index}));
  }

  std::uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n);
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tvc
