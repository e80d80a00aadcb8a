#pragma once

// Counter-based random number generation (Philox4x32-10) plus the variate
// transforms used by the samplers.  A stream is keyed by (seed, stream id);
// distinct stream ids share a key but occupy disjoint counter ranges, so
// replica streams never overlap and any replica can be regenerated on its
// own.  All generation is deterministic given (seed, stream id).

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace nuberry {

// Stream-id namespaces: one experiment may run a measurement batch, a pilot
// standardization and a term estimator off one seed; keeping their stream
// ids in disjoint ranges keeps the draws independent.
inline constexpr uint64_t kStreamBaseBatch = 0;
inline constexpr uint64_t kStreamBasePilot = uint64_t{1} << 32;
inline constexpr uint64_t kStreamBaseTuples = uint64_t{1} << 33;

class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id)
      : key0_(static_cast<uint32_t>(seed)),
        key1_(static_cast<uint32_t>(seed >> 32)),
        ctr2_(static_cast<uint32_t>(stream_id)),
        ctr3_(static_cast<uint32_t>(stream_id >> 32)) {}

  uint64_t next_u64() {
    if (have_ == 0) refill();
    return buf_[--have_];
  }

  // Uniform on [0,1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0,1]; safe as a log argument.
  double next_unit_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_uniform(double a, double b) { return a + (b - a) * next_unit(); }

  // Standard normal via Box-Muller; the second variate of each pair is
  // cached so consecutive calls consume one uniform pair per two normals.
  double next_gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_unit_pos();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Poisson variate.  Sequential inversion for small means, Hormann's PTRS
  // transformed rejection for large ones; both consume only this stream.
  uint64_t next_poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
      throw std::domain_error("next_poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
      double l = std::exp(-mean);
      uint64_t k = 0;
      double p = next_unit_pos();
      while (p > l) {
        p *= next_unit_pos();
        ++k;
      }
      return k;
    }
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      double u = next_unit() - 0.5;
      double v = next_unit_pos();
      double us = 0.5 - std::fabs(u);
      double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<uint64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          kf * loglam - mean - std::lgamma(kf + 1.0))
        return static_cast<uint64_t>(kf);
    }
  }

  // Rademacher bit: +1 with probability p, else -1.
  int8_t next_sign(double p) { return next_unit() < p ? int8_t{1} : int8_t{-1}; }

 private:
  void refill() {
    uint32_t c0 = static_cast<uint32_t>(block_);
    uint32_t c1 = static_cast<uint32_t>(block_ >> 32);
    uint32_t c2 = ctr2_, c3 = ctr3_;
    uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      uint64_t p0 = 0xD2511F53ull * c0;
      uint64_t p1 = 0xCD9E8D57ull * c2;
      uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
      uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_[0] = (static_cast<uint64_t>(c1) << 32) | c0;
    buf_[1] = (static_cast<uint64_t>(c3) << 32) | c2;
    have_ = 2;
    ++block_;
  }

  uint32_t key0_, key1_;
  uint32_t ctr2_, ctr3_;  // stream id occupies the high counter words
  uint64_t block_ = 0;    // low counter words advance per 128-bit block
  uint64_t buf_[2] = {0, 0};
  int have_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace nuberry
