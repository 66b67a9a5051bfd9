#pragma once

#include <array>
#include <cstdint>

namespace pathflow {

/// Philox4x32-10 (Salmon et al., SC'11). Counter-based: every output block is a pure
/// function of (counter, key), so draws never depend on scheduling order.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

/// Stream indices reserved inside one (seed, path) key.
namespace stream {
inline constexpr std::uint32_t kBrownian = 0;        // d normals per step, 2 per block
inline constexpr std::uint32_t kBoundary = 1u << 16;  // bridge uniform per step
inline constexpr std::uint32_t kInitial = 1u << 17;   // initial-law samples
inline constexpr std::uint32_t kAux = 1u << 18;       // anything else a check needs
}  // namespace stream

/// Identifies one simulated path: global seed plus the path's index in the ensemble.
struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
};

/// Draws for one path. Counter words are (step, stream, seed_lo, seed_hi) and the key is
/// the path index, so (seed, path, step, stream) addresses a unique block.
class PathRng {
 public:
  explicit PathRng(RngKey key) : key_(key) {}

  /// Two independent uniforms in (0, 1) with 53-bit resolution.
  std::array<double, 2> uniform_pair(std::uint64_t step, std::uint32_t stream_id) const;
  /// Two independent standard normals (Box-Muller on uniform_pair).
  std::array<double, 2> normal_pair(std::uint64_t step, std::uint32_t stream_id) const;
  /// Fills out[0..d) with standard normals for the given step.
  void normals(std::uint64_t step, std::uint32_t stream_base, double* out, int d) const;
  double uniform(std::uint64_t step, std::uint32_t stream_id) const {
    return uniform_pair(step, stream_id)[0];
  }

  RngKey key() const { return key_; }

 private:
  RngKey key_;
};

}  // namespace pathflow
