#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "seqstop/math.hpp"
#include "seqstop/rng.hpp"

using namespace seqstop;

static bool eq4(const std::array<uint32_t, 4>& got,
                const std::array<uint32_t, 4>& want) {
  return std::equal(got.begin(), got.end(), want.begin());
}

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Random123 reference vectors (zeros, ones, pi digits)
  {
    const uint32_t ctr[4] = {0, 0, 0, 0};
    const uint32_t key[2] = {0, 0};
    CHECK(eq4(Philox4x32::block(ctr, key),
              {0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  }
  {
    const uint32_t ctr[4] = {0xffffffffu, 0xffffffffu, 0xffffffffu,
                             0xffffffffu};
    const uint32_t key[2] = {0xffffffffu, 0xffffffffu};
    CHECK(eq4(Philox4x32::block(ctr, key),
              {0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  }
  {
    const uint32_t ctr[4] = {0x243f6a88u, 0x85a308d3u, 0x13198a2eu,
                             0x03707344u};
    const uint32_t key[2] = {0xa4093822u, 0x299f31d0u};
    CHECK(eq4(Philox4x32::block(ctr, key),
              {0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
  }
  {
    const uint32_t ctr[4] = {1, 2, 3, 3};
    const uint32_t key[2] = {56, 712};
    CHECK(eq4(Philox4x32::block(ctr, key),
              {0x282a1226u, 0x1527e88fu, 0x95b351f9u, 0xc06e1aacu}));
  }
}

TEST_CASE("counter stream layout is (block, stream) under the seed key") {
  // frozen from an independent implementation of the same layout
  RandomStream s7(0x0badf00d5eed5eedull, 7);
  CHECK(s7.next_u64() == 0x55cea7cde5937324ull);
  CHECK(s7.next_u64() == 0xfec3b02971d72f03ull);
  CHECK(s7.next_u64() == 0xc563a9882b0558e6ull);  // block counter advanced
  CHECK(s7.next_u64() == 0x056bef8c0fdffbc6ull);

  RandomStream s8(0x0badf00d5eed5eedull, 8);
  CHECK(s8.next_u64() == 0xb0c2ffffc412ce57ull);
}

TEST_CASE("streams are deterministic and mutually distinct") {
  RandomStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool same_ab = true, diff_ac = false, diff_ad = false;
  for (int i = 0; i < 256; ++i) {
    const uint64_t x = a.next_u64();
    same_ab = same_ab && (x == b.next_u64());
    diff_ac = diff_ac || (x != c.next_u64());
    diff_ad = diff_ad || (x != d.next_u64());
  }
  CHECK(same_ab);
  CHECK(diff_ac);
  CHECK(diff_ad);
}

TEST_CASE("uniform draws live in their half-open intervals") {
  RandomStream s(2024, 0);
  double mn = 1.0, mx = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.unit();
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
    const double v = s.unit_open();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(mn >= 0.0);
  CHECK(mx < 1.0);
  CHECK(mn < 1e-3);  // actually exercises the low end
  CHECK(mx > 1.0 - 1e-3);
  const double se = 1.0 / std::sqrt(12.0 * n);
  CHECK(std::fabs(sum / n - 0.5) < 4.0 * se);
}

TEST_CASE("ziggurat tables are internally consistent") {
  const auto& t = ZigguratTables::get();
  CHECK(t.fn[0] == 1.0);
  CHECK(t.fn[255] ==
        doctest::Approx(std::exp(-0.5 * ZigguratTables::kR * ZigguratTables::kR))
            .epsilon(1e-15));
  CHECK(t.kn[1] == 0);
  for (int i = 1; i < 255; ++i) {
    CHECK(t.fn[i] > t.fn[i + 1]);  // layer ordinates decrease outward
    CHECK(t.wn[i] < t.wn[i + 1]);
  }
  CHECK(t.wn[255] ==
        doctest::Approx(ZigguratTables::kR / 4503599627370496.0).epsilon(1e-15));
}

TEST_CASE("normal sampler moments and tails") {
  RandomStream s(99, 1);
  const int n = 200000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  int above_1 = 0, beyond_r = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    m1 += x;
    m2 += x * x;
    m3 += x * x * x;
    m4 += x * x * x * x;
    if (x > 1.0) ++above_1;
    if (std::fabs(x) > ZigguratTables::kR) ++beyond_r;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  CHECK(std::fabs(m1) < 4.0 / std::sqrt(double(n)));
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::fabs(m3) < 0.05);
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.08));

  // tail beyond the ziggurat edge must be populated (Marsaglia fallback)
  const double p_tail = 2.0 * norm_cdf(-ZigguratTables::kR);
  CHECK(beyond_r > 0.2 * p_tail * n);
  CHECK(beyond_r < 5.0 * p_tail * n);

  const double p1 = 1.0 - norm_cdf(1.0);
  const double se1 = std::sqrt(p1 * (1.0 - p1) / n);
  CHECK(std::fabs(double(above_1) / n - p1) < 4.0 * se1);
}

TEST_CASE("normal sampler passes a KS check against the cdf") {
  RandomStream s(7, 0);
  const int n = 20000;
  std::vector<double> x(n);
  for (auto& v : x) v = s.normal();
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = norm_cdf(x[size_t(i)]);
    d = std::max(d, std::fabs(f - double(i) / n));
    d = std::max(d, std::fabs(f - double(i + 1) / n));
  }
  // K-S alpha ~ 0.001 threshold; the seed is fixed, so this is stable
  CHECK(d * std::sqrt(double(n)) < 1.95);
}
