#include "liefpf/noise.hpp"

#include <bit>
#include <cmath>

namespace liefpf {
namespace {

constexpr std::uint64_t kParity = 0x1BD11BDAA9FC1A22ull;
constexpr int kRotations[8] = {16, 42, 12, 31, 16, 32, 24, 21};

// (x >> 11) keeps 53 bits; +0.5 centers in the cell, so the result lies in
// (0, 1) strictly and log() below is always finite.
inline double to_open01(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint64_t, 2> threefry2x64(std::array<std::uint64_t, 2> counter,
                                          std::array<std::uint64_t, 2> key) {
  const std::uint64_t ks[3] = {key[0], key[1], key[0] ^ key[1] ^ kParity};
  std::uint64_t x0 = counter[0] + ks[0];
  std::uint64_t x1 = counter[1] + ks[1];
  for (int round = 0; round < 20; ++round) {
    x0 += x1;
    x1 = std::rotl(x1, kRotations[round % 8]);
    x1 ^= x0;
    if (round % 4 == 3) {
      const std::uint64_t j = static_cast<std::uint64_t>(round / 4 + 1);
      x0 += ks[j % 3];
      x1 += ks[(j + 1) % 3] + j;
    }
  }
  return {x0, x1};
}

NoiseStream::NoiseStream(std::uint64_t seed, NoiseDomain domain, std::uint64_t stream)
    : key0_(seed), key1_((static_cast<std::uint64_t>(domain) << 56) ^ stream) {}

double NoiseStream::normal(std::uint64_t step, std::uint64_t draw) const {
  // One block -> two uniforms -> one normal (cosine branch of Box-Muller).
  // Throwing away the sine branch keeps every draw a pure function of its
  // coordinates, with no cached state.
  const auto block = threefry2x64({step, draw}, {key0_, key1_ ^ 0x9E3779B97F4A7C15ull});
  const double u1 = to_open01(block[0]);
  const double u2 = to_open01(block[1]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double NoiseStream::uniform(std::uint64_t step, std::uint64_t draw) const {
  const auto block = threefry2x64({step, draw}, {key0_, key1_});
  return to_open01(block[0]);
}

}  // namespace liefpf
