#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace avlab::rng {

// Philox4x32-10 counter-based generator (Salmon et al. 2011).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter round(Counter c, Key k) {
    constexpr std::uint64_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    std::uint64_t p0 = m0 * c[0], p1 = m1 * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  static Counter apply(Counter c, Key k) {
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
      if (r) {
        k[0] += w0;
        k[1] += w1;
      }
      c = round(c, k);
    }
    return c;
  }
};

// Stream tags separate independent uses of one seed.
enum class Stream : std::uint32_t { tracer = 1, endpoint = 2, shear = 3, classify = 4, sde = 5 };

// Draws keyed by (seed, stream, index, step); reproducible under any evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, Stream s = Stream::tracer)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        tag_(static_cast<std::uint32_t>(s)) {}

  std::array<std::uint32_t, 4> bits(std::uint64_t index, std::uint64_t step) const {
    Philox4x32::Counter c{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32) ^ (tag_ << 24)};
    return Philox4x32::apply(c, key_);
  }

  // Two uniforms in (0, 1) with 53-bit resolution.
  std::array<double, 2> uniform2(std::uint64_t index, std::uint64_t step) const {
    auto r = bits(index, step);
    return {to_unit(r[0], r[1]), to_unit(r[2], r[3])};
  }

  // Two independent standard normals (Box-Muller).
  std::array<double, 2> normal2(std::uint64_t index, std::uint64_t step) const {
    auto u = uniform2(index, step);
    double rad = std::sqrt(-2.0 * std::log(u[0]));
    double ang = 2.0 * std::numbers::pi * u[1];
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t v = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(v & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
  }
  Philox4x32::Key key_;
  std::uint32_t tag_;
};

}  // namespace avlab::rng
