#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace relikit {

/// Seeded random stream. Every stochastic routine in the toolkit takes one of
/// these explicitly; there is no global generator.
///
/// A stream is owned by a single caller at a time. Independent replicates get
/// their own stream through substream(), which is a pure function of the
/// parent seed and the replicate index, so results do not depend on how work
/// is scheduled.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Marsaglia polar method; portable across standard libraries).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double exponential() { return -std::log(uniform()); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    Rng substream(std::uint64_t index) const;

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace relikit
