#pragma once

#include <array>
#include <cstdint>

namespace liefpf {

/// Threefry-2x64, 20 rounds (Random123 family). Pure function of (counter, key),
/// so any draw is addressable by coordinates instead of generator state. That is
/// what makes runs reproducible independently of particle count, thread count,
/// and evaluation order.
std::array<std::uint64_t, 2> threefry2x64(std::array<std::uint64_t, 2> counter,
                                          std::array<std::uint64_t, 2> key);

/// Logical noise domains. Each domain gets a disjoint key space so e.g. truth
/// simulation and filter particles never share draws for the same seed.
enum class NoiseDomain : std::uint64_t {
  TruthState = 1,
  Observation = 2,
  TruthInit = 3,
  FpfPrior = 4,
  FpfParticles = 5,
  SirPrior = 6,
  SirParticles = 7,
  SirResample = 8,
};

/// One addressable stream: key = (seed, domain | stream index), counter =
/// (step, draw). Streams are cheap value objects; make them on the fly.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, NoiseDomain domain, std::uint64_t stream);

  /// Standard normal via Box-Muller on one counter block. Never returns NaN/inf.
  double normal(std::uint64_t step, std::uint64_t draw = 0) const;

  /// Uniform on (0, 1).
  double uniform(std::uint64_t step, std::uint64_t draw = 0) const;

 private:
  std::uint64_t key0_;
  std::uint64_t key1_;
};

/// Seed + domain pair carried by ensembles; per-particle streams derive from it.
struct NoiseStreams {
  std::uint64_t seed = 0;
  NoiseDomain domain = NoiseDomain::FpfParticles;

  NoiseStream stream(std::uint64_t index) const { return NoiseStream(seed, domain, index); }
};

}  // namespace liefpf
