#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nuberry/rng.hpp"

using nuberry::RngStream;

namespace {

// Independent reference implementation of the same counter-based generator
// (4x32, 10 rounds), written array-style straight from the published
// definition, including the word order of the 64-bit packing.
struct RefGenerator {
  std::array<uint32_t, 4> ctr;
  std::array<uint32_t, 2> key;

  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> x,
                                       std::array<uint32_t, 2> k) {
    auto mulhilo = [](uint32_t a, uint32_t b, uint32_t& hi) {
      uint64_t p = static_cast<uint64_t>(a) * b;
      hi = static_cast<uint32_t>(p >> 32);
      return static_cast<uint32_t>(p);
    };
    for (int round = 0; round < 10; ++round) {
      uint32_t hi0, hi1;
      uint32_t lo0 = mulhilo(0xD2511F53u, x[0], hi0);
      uint32_t lo1 = mulhilo(0xCD9E8D57u, x[2], hi1);
      x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return x;
  }

  // Same consumption order as RngStream: per 128-bit block, the
  // (c3,c2) word pair comes out first, then (c1,c0).
  std::vector<uint64_t> stream_outputs(uint64_t seed, uint64_t stream_id, int count) {
    std::vector<uint64_t> out;
    key = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
    uint64_t blk = 0;
    while (static_cast<int>(out.size()) < count) {
      ctr = {static_cast<uint32_t>(blk), static_cast<uint32_t>(blk >> 32),
             static_cast<uint32_t>(stream_id), static_cast<uint32_t>(stream_id >> 32)};
      auto y = block(ctr, key);
      out.push_back((static_cast<uint64_t>(y[3]) << 32) | y[2]);
      if (static_cast<int>(out.size()) < count)
        out.push_back((static_cast<uint64_t>(y[1]) << 32) | y[0]);
      ++blk;
    }
    return out;
  }
};

}  // namespace

TEST_CASE("generator matches the independent reference implementation") {
  RefGenerator ref;
  for (auto [seed, stream] : {std::pair<uint64_t, uint64_t>{0, 0},
                              {1, 0},
                              {0xdeadbeefcafef00dull, 42},
                              {7, nuberry::kStreamBaseTuples + 3},
                              {0xffffffffffffffffull, 0xffffffffffffffffull}}) {
    auto expect = ref.stream_outputs(seed, stream, 1001);  // crosses 500 blocks
    RngStream rng(seed, stream);
    for (int i = 0; i < 1001; ++i) {
      CAPTURE(seed);
      CAPTURE(stream);
      CAPTURE(i);
      REQUIRE(rng.next_u64() == expect[i]);
    }
  }
}

TEST_CASE("known answer for the zero key and counter") {
  // Canonical 10-round 4x32 test vector for an all-zero counter and key:
  // output words 6627e8d5 e169c58d bc57ac4c 9b00dbd8.
  RngStream rng(0, 0);
  CHECK(rng.next_u64() == 0x9b00dbd8bc57ac4cull);
  CHECK(rng.next_u64() == 0xe169c58d6627e8d5ull);
}

TEST_CASE("streams are deterministic and distinct") {
  RngStream a1(99, 5), a2(99, 5), b(99, 6), c(100, 5);
  bool differ_stream = false, differ_seed = false;
  for (int i = 0; i < 64; ++i) {
    uint64_t v = a1.next_u64();
    CHECK(v == a2.next_u64());
    differ_stream = differ_stream || v != b.next_u64();
    differ_seed = differ_seed || v != c.next_u64();
  }
  CHECK(differ_stream);
  CHECK(differ_seed);
}

TEST_CASE("no collisions across 2^20 outputs over 64 replica streams") {
  // 64 streams spread over the three id namespaces, 16384 outputs each.
  std::vector<uint64_t> all;
  all.reserve(1 << 20);
  std::vector<uint64_t> bases = {nuberry::kStreamBaseBatch, nuberry::kStreamBasePilot,
                                 nuberry::kStreamBaseTuples};
  int streams = 0;
  for (uint64_t r = 0; streams < 64; ++r) {
    for (uint64_t base : bases) {
      if (streams == 64) break;
      RngStream rng(0xabcdef0123456789ull, base + r);
      for (int i = 0; i < 16384; ++i) all.push_back(rng.next_u64());
      ++streams;
    }
  }
  REQUIRE(all.size() == (1u << 20));
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("uniform variates: range and moments") {
  RngStream rng(31337, 0);
  const int n = 2000000;
  double sum = 0.0, sumsq = 0.0, mn = 1.0, mx = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sumsq += u * u;
    mn = std::fmin(mn, u);
    mx = std::fmax(mx, u);
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean - 0.5) < 4.0 / std::sqrt(12.0 * n));   // 4 sigma
  CHECK(std::fabs(var - 1.0 / 12.0) < 0.001);
  CHECK(mn < 1e-5);  // the range is actually exercised
  CHECK(mx > 1.0 - 1e-5);

  RngStream rng2(31337, 1);
  for (int i = 0; i < 100000; ++i) {
    double u = rng2.next_unit_pos();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
  RngStream rng3(5, 2);
  for (int i = 0; i < 1000; ++i) {
    double u = rng3.next_uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("normal variates: moments and symmetry") {
  RngStream rng(424242, 0);
  const int n = 1000000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  int below0 = 0, below1 = 0;
  for (int i = 0; i < n; ++i) {
    double g = rng.next_gauss();
    s1 += g;
    s2 += g * g;
    s3 += g * g * g;
    s4 += g * g * g * g;
    below0 += g <= 0.0;
    below1 += g <= 1.0;
  }
  CHECK(std::fabs(s1 / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(s2 / n - 1.0) < 0.01);
  CHECK(std::fabs(s3 / n) < 0.02);
  CHECK(std::fabs(s4 / n - 3.0) < 0.05);
  CHECK(std::fabs(below0 / double(n) - 0.5) < 0.002);
  CHECK(std::fabs(below1 / double(n) - 0.841344746) < 0.002);
}

TEST_CASE("normal spare survives interleaved raw draws") {
  // Two identical streams; one interleaves next_u64 calls between the
  // normals.  The normals must still be valid (the spare is cached, and
  // each fresh pair consumes uniforms drawn at that moment).
  RngStream rng(8, 0);
  double s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    s2 += rng.next_gauss() * rng.next_gauss();
    rng.next_u64();
  }
  // product of two normals (one spare, one fresh in alternation): mean 0
  CHECK(std::fabs(s2 / n) < 0.02);
}

TEST_CASE("poisson variates: small-mean inversion") {
  RngStream rng(5150, 0);
  const int n = 200000;
  const double lam = 3.5;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double k = static_cast<double>(rng.next_poisson(lam));
    s1 += k;
    s2 += k * k;
  }
  double mean = s1 / n, var = s2 / n - mean * mean;
  CHECK(std::fabs(mean - lam) < 4.0 * std::sqrt(lam / n));
  CHECK(std::fabs(var - lam) < 0.1);
  CHECK(rng.next_poisson(0.0) == 0);
  CHECK_THROWS_AS(rng.next_poisson(-1.0), std::domain_error);
}

TEST_CASE("poisson variates: large-mean sampler against the exact pmf") {
  RngStream rng(99991, 7);
  const int n = 200000;
  const double lam = 100.0;
  auto pmf = [&](int k) {
    return std::exp(k * std::log(lam) - lam - std::lgamma(k + 1.0));
  };
  const int lo = 76, hi = 124;  // expected count >= ~250 per bin at n = 2e5
  std::vector<int> count(hi - lo + 1, 0);
  int below = 0, above = 0;
  for (int i = 0; i < n; ++i) {
    int64_t k = static_cast<int64_t>(rng.next_poisson(lam));
    if (k < lo) ++below;
    else if (k > hi) ++above;
    else ++count[k - lo];
  }
  double chi2 = 0.0;
  double p_below = 0.0, p_above = 1.0;
  for (int k = 0; k < lo; ++k) p_below += pmf(k);
  for (int k = 0; k <= hi; ++k) p_above -= pmf(k);
  for (int k = lo; k <= hi; ++k) {
    double e = n * pmf(k);
    chi2 += (count[k - lo] - e) * (count[k - lo] - e) / e;
  }
  chi2 += (below - n * p_below) * (below - n * p_below) / (n * p_below);
  chi2 += (above - n * p_above) * (above - n * p_above) / (n * p_above);
  // 51 cells, ~50 dof: mean 50, sd 10; 120 is beyond 6 sigma
  CHECK(chi2 < 120.0);
}

TEST_CASE("sign variates: frequency") {
  RngStream rng(2718, 0);
  const int n = 100000;
  for (double p : {0.3, 0.5, 0.9}) {
    int plus = 0;
    for (int i = 0; i < n; ++i) {
      int8_t s = rng.next_sign(p);
      CHECK((s == 1 || s == -1));
      plus += s == 1;
    }
    CHECK(std::fabs(plus / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  }
}
