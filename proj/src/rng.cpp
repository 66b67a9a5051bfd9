#include "pathflow/rng.hpp"

#include <cmath>
#include <numbers>

namespace pathflow {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::array<double, 2> PathRng::uniform_pair(std::uint64_t step, std::uint32_t stream_id) const {
  // Steps above 2^32 fold into the stream word; no scenario comes close.
  const Philox4x32::Counter ctr = {
      static_cast<std::uint32_t>(step),
      stream_id ^ static_cast<std::uint32_t>(step >> 32),
      static_cast<std::uint32_t>(key_.seed),
      static_cast<std::uint32_t>(key_.seed >> 32),
  };
  const Philox4x32::Key k = {static_cast<std::uint32_t>(key_.path),
                             static_cast<std::uint32_t>(key_.path >> 32)};
  const auto r = Philox4x32::generate(ctr, k);
  return {to_open_unit(r[0], r[1]), to_open_unit(r[2], r[3])};
}

std::array<double, 2> PathRng::normal_pair(std::uint64_t step, std::uint32_t stream_id) const {
  const auto [u1, u2] = uniform_pair(step, stream_id);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

void PathRng::normals(std::uint64_t step, std::uint32_t stream_base, double* out, int d) const {
  for (int i = 0; i < d; i += 2) {
    const auto z = normal_pair(step, stream_base + static_cast<std::uint32_t>(i / 2));
    out[i] = z[0];
    if (i + 1 < d) out[i + 1] = z[1];
  }
}

}  // namespace pathflow
