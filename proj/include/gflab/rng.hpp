#ifndef GFLAB_RNG_HPP
#define GFLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gflab {

/// Counter-based splittable generator (stream format version 1).
///
/// Output i of a stream with key k is mix64(k + i * kGamma), where mix64 is
/// the SplitMix64 finalizer. Keys of derived streams are obtained by mixing
/// the parent key with the child index, so any replica or subtree can be
/// regenerated from (master seed, path of indices) alone. All constants
/// below are part of the stream format; changing any of them changes every
/// simulated value.
class CounterRng {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSplitSalt = 0xD1B54A32D192ED03ULL;

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr CounterRng() noexcept : CounterRng(0, 0) {}
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(derive(mix64(seed ^ 0x6A09E667F3BCC909ULL), stream)) {}

  /// Independent child stream; depends only on this stream's key and `index`.
  constexpr CounterRng split(std::uint64_t index) const noexcept {
    CounterRng child;
    child.key_ = derive(key_, index);
    return child;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential() noexcept { return -std::log(uniform()); }

  /// Standard normal by the Marsaglia polar method; the second variate of
  /// each pair is cached, so the stream position advances by whole pairs.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Standard symmetric Cauchy variate by inversion.
  double cauchy() noexcept { return std::tan(std::numbers::pi * (uniform() - 0.5)); }

 private:
  static constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t index) noexcept {
    return mix64(key ^ mix64(index + kSplitSalt));
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gflab

#endif  // GFLAB_RNG_HPP
