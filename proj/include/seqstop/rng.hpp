#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace seqstop {

// Philox4x32-10 block cipher used as a counter-based RNG.
// Salmon et al., "Parallel random numbers: as easy as 1, 2, 3", SC 2011.
struct Philox4x32 {
  static constexpr uint32_t kW32A = 0x9E3779B9u;
  static constexpr uint32_t kW32B = 0xBB67AE85u;
  static constexpr uint32_t kM4x32A = 0xD2511F53u;
  static constexpr uint32_t kM4x32B = 0xCD9E8D57u;

  static std::array<uint32_t, 4> block(const uint32_t ctr[4], const uint32_t key[2]) {
    uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
    uint32_t k0 = key[0], k1 = key[1];
    for (int r = 0; r < 10; ++r) {
      const uint64_t p0 = uint64_t(kM4x32A) * c0;
      const uint64_t p1 = uint64_t(kM4x32B) * c2;
      const uint32_t lo0 = uint32_t(p0), hi0 = uint32_t(p0 >> 32);
      const uint32_t lo1 = uint32_t(p1), hi1 = uint32_t(p1 >> 32);
      const uint32_t n0 = hi1 ^ c1 ^ k0;
      const uint32_t n1 = lo1;
      const uint32_t n2 = hi0 ^ c3 ^ k1;
      const uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      if (r < 9) {
        k0 += kW32A;
        k1 += kW32B;
      }
    }
    return {c0, c1, c2, c3};
  }
};

// One independent uint64 stream per (seed, stream) pair.
// key = seed, counter = (block index, stream id); any stream can be
// generated in isolation, so path-level results never depend on
// scheduling or on how many paths run before this one.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream) {
    key_[0] = uint32_t(seed);
    key_[1] = uint32_t(seed >> 32);
    stream_lo_ = uint32_t(stream);
    stream_hi_ = uint32_t(stream >> 32);
  }

  uint64_t next_u64() {
    if (have_ == 0) refill();
    --have_;
    const int i = 1 - have_;  // 0 then 1
    return uint64_t(buf_[2 * i]) | (uint64_t(buf_[2 * i + 1]) << 32);
  }

  // 53-bit uniform in [0, 1)
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1), safe to pass through log()
  double next_unit_open() {
    return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  void refill() {
    const uint32_t ctr[4] = {uint32_t(block_), uint32_t(block_ >> 32),
                             stream_lo_, stream_hi_};
    buf_ = Philox4x32::block(ctr, key_);
    ++block_;
    have_ = 2;
  }

  uint32_t key_[2];
  uint32_t stream_lo_, stream_hi_;
  uint64_t block_ = 0;
  std::array<uint32_t, 4> buf_{};
  int have_ = 0;
};

// Ziggurat tables for the standard normal (256 layers, 52-bit mantissa
// comparisons). Layout and recursion follow Marsaglia & Tsang (2000).
class ZigguratTables {
 public:
  static const ZigguratTables& get() {
    static const ZigguratTables t;
    return t;
  }

  static constexpr double kR = 3.6541528853610088;
  double inv_r = 1.0 / kR;
  uint64_t kn[256];
  double wn[256];
  double fn[256];

 private:
  ZigguratTables() {
    const double m1 = 4503599627370496.0;  // 2^52
    double dn = kR, tn = kR;
    // area of each layer: r*f(r) plus the unnormalized tail mass
    const double vn =
        kR * std::exp(-0.5 * kR * kR) +
        std::sqrt(1.5707963267948966) * std::erfc(kR * 0.7071067811865475244);
    const double q = vn / std::exp(-0.5 * dn * dn);
    kn[0] = uint64_t((dn / q) * m1);
    kn[1] = 0;
    wn[0] = q / m1;
    wn[255] = dn / m1;
    fn[0] = 1.0;
    fn[255] = std::exp(-0.5 * dn * dn);
    for (int i = 254; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = uint64_t((dn / tn) * m1);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m1;
    }
  }
};

// Uniform + standard-normal draws from one counter-based stream.
class RandomStream {
 public:
  RandomStream(uint64_t seed, uint64_t stream) : rng_(seed, stream) {}

  uint64_t next_u64() { return rng_.next_u64(); }
  double unit() { return rng_.next_unit(); }
  double unit_open() { return rng_.next_unit_open(); }

  double normal() {
    const ZigguratTables& t = ZigguratTables::get();
    for (;;) {
      const uint64_t u = rng_.next_u64();
      const int idx = int(u & 0xff);
      const bool neg = (u >> 8) & 1;
      const uint64_t rabs = (u >> 9) & ((uint64_t(1) << 52) - 1);
      const double x = double(rabs) * t.wn[idx];
      if (rabs < t.kn[idx]) return neg ? -x : x;
      if (idx == 0) {
        // Marsaglia tail: exponential rejection beyond r
        double xx, yy;
        do {
          xx = -t.inv_r * std::log(rng_.next_unit_open());
          yy = -std::log(rng_.next_unit_open());
        } while (yy + yy <= xx * xx);
        return neg ? -(ZigguratTables::kR + xx) : (ZigguratTables::kR + xx);
      }
      if (t.fn[idx] + rng_.next_unit() * (t.fn[idx - 1] - t.fn[idx]) <
          std::exp(-0.5 * x * x))
        return neg ? -x : x;
    }
  }

 private:
  CounterRng rng_;
};

}  // namespace seqstop
