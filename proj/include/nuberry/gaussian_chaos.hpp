#pragma once

// Quadratic variation of fractional Brownian increments: exact covariance,
// Gaussian sampling (dense Cholesky for n <= 4096, circulant embedding with
// FFT beyond), Toeplitz-trace diagnostics, the fourth-moment Kolmogorov
// bound, Berry-Esseen rates by Hurst regime, and the Gaussian-chaos tail
// bounds.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "nuberry/empirical.hpp"
#include "nuberry/rng.hpp"

namespace nuberry {

struct FbmSpec {
  double hurst = 0.5;
  uint32_t n = 2;      // number of increments
  double c_h = 1.0;    // user scale on the rate (no silent constants)
};

// Autocovariance of unit-spaced fBm increments at lag j:
// 0.5((j+1)^{2H} + |j-1|^{2H} - 2 j^{2H}); equals 1 at j = 0.
double increment_cov(double hurst, uint64_t j);

struct ChaosDiagnostics {
  double sigma_n = 0.0;           // sqrt(2 tr2)
  double tr2 = 0.0;               // tr(Sigma^2)
  double tr4 = 0.0;               // tr(Sigma^4)
  double kappa4_excess = 0.0;     // E F^4 - 3 = 48 tr4 / (2 tr2)^2
  double fm_bound = 0.0;          // sqrt(kappa4_excess / 6)
  double contraction_norm = 0.0;  // sqrt(tr4) / (2 tr2)
  double c_n = 0.0;               // (8 sqrt(contraction_norm))^{-1}
  double rate_an = 0.0;           // berry_rate(hurst, n) * c_h
};

ChaosDiagnostics diagnostics(const FbmSpec& spec);

// Rate A_n by regime: n^{-1/2} (H < 5/8), (log n)^{3/2} n^{-1/2} (H = 5/8),
// n^{4H-3} (5/8 < H < 3/4), 1/log n (H = 3/4); H > 3/4 has no CLT.
double berry_rate(double hurst, double n);

// Hurst estimate 1/2 - log(s_n) / (2 log n).
double hurst_estimator(double s_n, double n);

// 2 exp(-min(z^2/2^{q/2}, (c z)^{2/q}) / 4).
double gauss_tail_bound(double z, int q, double c);

// (sqrt(2) exp(-min(z^2/8, 2^{-13/4} a_n^{-1/2} z) / 8) + c e^{-z^2/4}) a_n.
double fbm_nonuniform_bound(double z, double a_n, double c);

// (sum x_k^2 - n) / sigma_n.
double quad_var_statistic(std::span<const double> x, double sigma_n);

// Shared sampler state (covariance factorization); cheap to copy around by
// shared_ptr, immutable after construction.
class FbmSampler {
 public:
  explicit FbmSampler(const FbmSpec& spec);
  ~FbmSampler();
  FbmSampler(const FbmSampler&) = delete;
  FbmSampler& operator=(const FbmSampler&) = delete;

  const FbmSpec& spec() const { return spec_; }
  double sigma_n() const { return sigma_n_; }
  bool uses_circulant() const { return circulant_; }

  struct Impl;
  const Impl& impl() const { return *impl_; }

 private:
  FbmSpec spec_;
  double sigma_n_;
  bool circulant_;
  std::unique_ptr<Impl> impl_;
};

// Per-replica draw stream: owns its RNG state and scratch buffers.
class FbmStream {
 public:
  FbmStream(const FbmSampler& sampler, uint64_t seed, uint64_t replica);
  ~FbmStream();
  FbmStream(const FbmStream&) = delete;
  FbmStream& operator=(const FbmStream&) = delete;

  // One path of n increments.
  void next_increments(std::span<double> out);
  // One standardized quadratic-variation statistic F_n.
  double next_stat();

 private:
  struct State;
  const FbmSampler& sampler_;
  RngStream rng_;
  std::unique_ptr<State> state_;
};

// Single path of increments for (spec, seed); replica 0 of the stream.
std::vector<double> sample_increments(const FbmSpec& spec, uint64_t seed);

// Monte Carlo batch of F_n over `replicas` independent streams; the result
// is bitwise independent of the thread count.
SampleBatch simulate_fbm_batch(const FbmSpec& spec, uint64_t n_samples, uint64_t seed,
                               uint32_t replicas, int threads);

}  // namespace nuberry
