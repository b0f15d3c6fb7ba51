#pragma once

#include <cstdint>

namespace slicetrack {

// Counter-based stream RNG. A stream is identified by (seed, tag, a, b);
// draws are a pure function of (stream key, counter), so any (t, particle)
// pair can be sampled independently of evaluation order or thread count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream from(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                        std::uint64_t b = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double();

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_gaussian();

  // Uniform integer in [0, n), n > 0. Unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags. Fixed values are part of the reproducibility contract:
// changing them changes every seeded output.
namespace rng_tag {
inline constexpr std::uint64_t particle_init = 1;
inline constexpr std::uint64_t particle_step = 2;
inline constexpr std::uint64_t phantom_texture = 3;
inline constexpr std::uint64_t phantom_motion = 4;
inline constexpr std::uint64_t phantom_noise = 5;
inline constexpr std::uint64_t permutation = 6;
inline constexpr std::uint64_t split = 7;
inline constexpr std::uint64_t test = 99;
}  // namespace rng_tag

}  // namespace slicetrack
