// Tests for the quadratic-variation module: increment covariance closed
// forms, Toeplitz trace diagnostics against a dense matrix oracle, rate
// formulas by Hurst regime, tail/nonuniform bound closed forms, and the
// Gaussian samplers (Cholesky and circulant) against Monte Carlo moments.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nuberry/empirical.hpp"
#include "nuberry/gaussian_chaos.hpp"
#include "nuberry/rng.hpp"

using namespace nuberry;

namespace {

// Oracle: the lag-j autocovariance evaluated in extended precision, straight
// from the definition 0.5((j+1)^{2H} + |j-1|^{2H} - 2 j^{2H}).
double cov_oracle(double hurst, uint64_t j) {
  const long double h2 = 2.0L * static_cast<long double>(hurst);
  if (j == 0) return 1.0;
  const long double jj = static_cast<long double>(j);
  const long double val =
      0.5L * (powl(jj + 1.0L, h2) + powl(jj - 1.0L, h2) - 2.0L * powl(jj, h2));
  return static_cast<double>(val);
}

// Oracle: dense Toeplitz covariance matrix for n increments.
Eigen::MatrixXd dense_toeplitz(double hurst, int n) {
  Eigen::MatrixXd sigma(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      sigma(i, j) = cov_oracle(hurst, static_cast<uint64_t>(std::abs(i - j)));
  return sigma;
}

}  // namespace

TEST_CASE("increment covariance closed forms") {
  // Lag zero is the variance of a unit-spaced increment: always 1.
  for (double h : {0.1, 0.3, 0.5, 0.75, 0.9}) CHECK(increment_cov(h, 0) == 1.0);

  // H = 1/2 is independent increments: zero at every positive lag.
  for (uint64_t j : {1ull, 2ull, 17ull, 1000000ull})
    CHECK(std::fabs(increment_cov(0.5, j)) < 1e-15);

  // H = 3/4, lag 1: 0.5(2^{3/2} - 2) = sqrt(2) - 1.
  CHECK(std::fabs(increment_cov(0.75, 1) - (std::sqrt(2.0) - 1.0)) < 1e-15);

  // Sign pattern: positive correlation for H > 1/2, negative for H < 1/2.
  for (uint64_t j = 1; j <= 64; ++j) {
    CHECK(increment_cov(0.7, j) > 0.0);
    CHECK(increment_cov(0.3, j) < 0.0);
  }

  // Extended-precision oracle agreement across lags and Hurst values.
  for (double h : {0.15, 0.4, 0.6, 0.85}) {
    for (uint64_t j : {1ull, 2ull, 5ull, 100ull, 10000ull}) {
      const double got = increment_cov(h, j);
      const double want = cov_oracle(h, j);
      CHECK(std::fabs(got - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
    }
  }

  // Asymptotics: rho(j) ~ H(2H-1) j^{2H-2} for large j.
  {
    const double h = 0.7;
    const double j = 1e6;
    const double asym = h * (2.0 * h - 1.0) * std::pow(j, 2.0 * h - 2.0);
    CHECK(std::fabs(increment_cov(h, static_cast<uint64_t>(j)) / asym - 1.0) < 1e-3);
  }

  CHECK_THROWS_AS(increment_cov(0.0, 1), std::domain_error);
  CHECK_THROWS_AS(increment_cov(1.0, 1), std::domain_error);
}

TEST_CASE("diagnostics closed forms at hurst one half") {
  // With independent increments the covariance is the identity, so
  // tr2 = tr4 = n and everything collapses to explicit functions of n.
  for (uint32_t n : {7u, 100u}) {
    FbmSpec spec;
    spec.hurst = 0.5;
    spec.n = n;
    spec.c_h = 2.0;
    const ChaosDiagnostics d = diagnostics(spec);
    const double nn = static_cast<double>(n);
    CHECK(std::fabs(d.tr2 - nn) < 1e-12 * nn);
    CHECK(std::fabs(d.tr4 - nn) < 1e-12 * nn);
    CHECK(std::fabs(d.sigma_n - std::sqrt(2.0 * nn)) < 1e-12);
    CHECK(std::fabs(d.kappa4_excess - 12.0 / nn) < 1e-13);
    CHECK(std::fabs(d.fm_bound - std::sqrt(2.0 / nn)) < 1e-13);
    CHECK(std::fabs(d.contraction_norm - 0.5 / std::sqrt(nn)) < 1e-13);
    CHECK(std::fabs(d.c_n - 1.0 / (8.0 * std::sqrt(0.5 / std::sqrt(nn)))) < 1e-12);
    CHECK(std::fabs(d.rate_an - 2.0 / std::sqrt(nn)) < 1e-13);
  }

  // The worked numbers for n = 100.
  FbmSpec spec;
  spec.hurst = 0.5;
  spec.n = 100;
  const ChaosDiagnostics d = diagnostics(spec);
  CHECK(std::fabs(d.kappa4_excess - 0.12) < 1e-13);
  CHECK(std::fabs(d.fm_bound - 0.1414213562373095) < 1e-13);
  CHECK(std::fabs(d.contraction_norm - 0.05) < 1e-13);
  CHECK(std::fabs(d.c_n - 0.5590169943749475) < 1e-12);
}

TEST_CASE("trace diagnostics match a dense matrix oracle") {
  for (double h : {0.3, 0.55, 0.7}) {
    for (int n : {8, 24, 80}) {
      FbmSpec spec;
      spec.hurst = h;
      spec.n = static_cast<uint32_t>(n);
      const ChaosDiagnostics d = diagnostics(spec);

      const Eigen::MatrixXd sigma = dense_toeplitz(h, n);
      const Eigen::MatrixXd s2 = sigma * sigma;
      const double tr2 = s2.trace();
      const double tr4 = (s2 * s2).trace();

      CHECK(std::fabs(d.tr2 - tr2) <= 1e-10 * tr2);
      CHECK(std::fabs(d.tr4 - tr4) <= 1e-10 * tr4);
      CHECK(std::fabs(d.sigma_n - std::sqrt(2.0 * tr2)) <= 1e-10 * d.sigma_n);
      CHECK(std::fabs(d.kappa4_excess - 48.0 * tr4 / (4.0 * tr2 * tr2)) <= 1e-10);
      CHECK(std::fabs(d.fm_bound - std::sqrt(d.kappa4_excess / 6.0)) <= 1e-12);
      CHECK(std::fabs(d.contraction_norm - std::sqrt(tr4) / (2.0 * tr2)) <= 1e-12);
      CHECK(std::fabs(d.c_n - 1.0 / (8.0 * std::sqrt(d.contraction_norm))) <= 1e-12);
    }
  }
}

TEST_CASE("rate formula by hurst regime") {
  // H < 5/8: n^{-1/2}.
  CHECK(std::fabs(berry_rate(0.5, 10000.0) - 0.01) < 1e-15);
  CHECK(std::fabs(berry_rate(0.55, 400.0) - 0.05) < 1e-15);

  // H = 5/8 exactly: (log n)^{3/2} n^{-1/2}.
  const double n = 100.0;
  const double want = std::pow(std::log(n), 1.5) / std::sqrt(n);
  CHECK(std::fabs(berry_rate(0.625, n) - want) < 1e-14);

  // 5/8 < H < 3/4: n^{4H-3}.
  CHECK(std::fabs(berry_rate(0.65, 100.0) - std::pow(100.0, -0.4)) < 1e-15);
  CHECK(std::fabs(berry_rate(0.7, 10000.0) - std::pow(10000.0, -0.2)) < 1e-15);

  // H = 3/4: 1/log n.
  CHECK(std::fabs(berry_rate(0.75, std::exp(10.0)) - 0.1) < 1e-12);

  // Above 3/4 there is no central limit theorem.
  CHECK_THROWS_AS(berry_rate(0.76, 100.0), std::domain_error);
  CHECK_THROWS_AS(berry_rate(0.9, 1e6), std::domain_error);
  CHECK_THROWS_AS(berry_rate(0.5, 1.5), std::domain_error);
  CHECK_THROWS_AS(berry_rate(0.0, 100.0), std::domain_error);
  CHECK_THROWS_AS(berry_rate(1.0, 100.0), std::domain_error);
}

TEST_CASE("hurst estimator closed form") {
  // 1/2 - log(4) / (2 log 16) = 1/2 - 1/4.
  CHECK(std::fabs(hurst_estimator(4.0, 16.0) - 0.25) < 1e-15);
  // s_n = 1 always estimates 1/2.
  CHECK(std::fabs(hurst_estimator(1.0, 12345.0) - 0.5) < 1e-15);
  // Round trip: feed n^alpha back in and recover 1/2 - alpha/2.
  for (double alpha : {0.2, 0.5, 1.0}) {
    const double nn = 777.0;
    CHECK(std::fabs(hurst_estimator(std::pow(nn, alpha), nn) - (0.5 - alpha / 2.0)) < 1e-12);
  }
  CHECK_THROWS_AS(hurst_estimator(0.0, 16.0), std::domain_error);
  CHECK_THROWS_AS(hurst_estimator(4.0, 1.0), std::domain_error);
}

TEST_CASE("second chaos tail bound closed forms") {
  // z = 2, q = 2, c = 1: both arms of the min equal 2, value 2 e^{-1/2}.
  CHECK(std::fabs(gauss_tail_bound(2.0, 2, 1.0) - 2.0 * std::exp(-0.5)) < 1e-15);
  // Large c: the quadratic arm z^2/2^{q/2} wins.
  CHECK(std::fabs(gauss_tail_bound(3.0, 2, 100.0) - 2.0 * std::exp(-9.0 / 8.0)) < 1e-15);
  // Small c: the (cz)^{2/q} arm wins.
  CHECK(std::fabs(gauss_tail_bound(3.0, 2, 0.01) - 2.0 * std::exp(-0.03 / 4.0)) < 1e-15);
  // Nonincreasing in z for fixed (q, c); never exceeds 2.
  double prev = 2.0;
  for (double z = 0.25; z <= 40.0; z += 0.25) {
    const double b = gauss_tail_bound(z, 2, 0.559);
    CHECK(b <= prev + 1e-15);
    CHECK(b <= 2.0);
    prev = b;
  }
  CHECK_THROWS_AS(gauss_tail_bound(0.0, 2, 1.0), std::domain_error);
  CHECK_THROWS_AS(gauss_tail_bound(1.0, 0, 1.0), std::domain_error);
  CHECK_THROWS_AS(gauss_tail_bound(1.0, 2, 0.0), std::domain_error);
}

TEST_CASE("nonuniform bound closed form") {
  // z = 4, a_n = 0.01, c = 1: the min picks z^2/8 = 2, so the value is
  // (sqrt(2) e^{-1/4} + e^{-4}) / 100 which is about 0.0112.
  const double want = (std::sqrt(2.0) * std::exp(-0.25) + std::exp(-4.0)) * 0.01;
  CHECK(std::fabs(fbm_nonuniform_bound(4.0, 0.01, 1.0) - want) < 1e-15);
  CHECK(std::fabs(fbm_nonuniform_bound(4.0, 0.01, 1.0) - 0.0112) < 1e-4);

  // Tiny a_n makes the linear arm win: min = 2^{-13/4} a_n^{-1/2} z.
  {
    const double a_n = 1e-10, z = 1.0, c = 0.5;
    const double lin = std::pow(2.0, -13.0 / 4.0) * z / std::sqrt(a_n);
    const double w = (std::sqrt(2.0) * std::exp(-std::min(z * z / 8.0, lin) / 8.0) +
                      c * std::exp(-z * z / 4.0)) *
                     a_n;
    CHECK(std::fabs(fbm_nonuniform_bound(z, a_n, c) - w) < 1e-20);
  }

  // Scales linearly in a_n when the quadratic arm is active.
  const double b1 = fbm_nonuniform_bound(4.0, 0.01, 1.0);
  const double b2 = fbm_nonuniform_bound(4.0, 0.005, 1.0);
  CHECK(std::fabs(b1 / b2 - 2.0) < 1e-12);

  CHECK_THROWS_AS(fbm_nonuniform_bound(0.0, 0.01, 1.0), std::domain_error);
  CHECK_THROWS_AS(fbm_nonuniform_bound(1.0, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(fbm_nonuniform_bound(1.0, 0.01, 0.0), std::domain_error);
}

TEST_CASE("quadratic variation statistic") {
  // ((2, 0), sigma = sqrt(2)): (4 - 1 + 0 - 1)/sqrt(2) = sqrt(2).
  const std::vector<double> x{2.0, 0.0};
  CHECK(std::fabs(quad_var_statistic(x, std::sqrt(2.0)) - std::sqrt(2.0)) < 1e-15);

  // Against a long-double running sum on a large random vector.
  RngStream rng(99, 0);
  std::vector<double> big(10000);
  long double acc = 0.0L;
  for (double& v : big) {
    v = rng.next_gauss();
    acc += static_cast<long double>(v) * v - 1.0L;
  }
  const double sig = 77.7;
  const double want = static_cast<double>(acc / sig);
  CHECK(std::fabs(quad_var_statistic(big, sig) - want) <= 1e-12 * std::max(1.0, std::fabs(want)));

  CHECK_THROWS_AS(quad_var_statistic(std::vector<double>{}, 1.0), std::domain_error);
  CHECK_THROWS_AS(quad_var_statistic(x, 0.0), std::domain_error);
}

TEST_CASE("cholesky sampler reproduces the covariance") {
  // Monte Carlo covariance of sampled increment vectors against the exact
  // Toeplitz entries. n is small so the error is pure sampling noise.
  const double h = 0.7;
  const int n = 8;
  FbmSpec spec;
  spec.hurst = h;
  spec.n = n;
  FbmSampler sampler(spec);
  CHECK_FALSE(sampler.uses_circulant());

  const int paths = 200000;
  FbmStream stream(sampler, 4242, 0);
  std::vector<double> buf(n);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (int p = 0; p < paths; ++p) {
    stream.next_increments(buf);
    for (int i = 0; i < n; ++i) {
      mean(i) += buf[i];
      for (int j = 0; j < n; ++j) acc(i, j) += buf[i] * buf[j];
    }
  }
  mean /= paths;
  acc /= paths;
  // 4 sigma on a second-moment estimate with 2e5 paths is well under 0.02.
  for (int i = 0; i < n; ++i) {
    CHECK(std::fabs(mean(i)) < 0.02);
    for (int j = 0; j < n; ++j) {
      const double want = cov_oracle(h, static_cast<uint64_t>(std::abs(i - j)));
      CHECK(std::fabs(acc(i, j) - want) < 0.02);
    }
  }
}

TEST_CASE("circulant sampler engages past the dense cutoff and is calibrated") {
  FbmSpec small;
  small.hurst = 0.75;
  small.n = 64;
  CHECK_FALSE(FbmSampler(small).uses_circulant());

  FbmSpec spec;
  spec.hurst = 0.75;
  spec.n = 4097;  // first size routed to the circulant embedding
  FbmSampler sampler(spec);
  CHECK(sampler.uses_circulant());

  // Pooled lag-0 and lag-1 moments across independent paths. With about
  // 8e6 pooled terms the tolerances below sit far above the noise floor.
  const int paths = 2000;
  FbmStream stream(sampler, 31337, 0);
  std::vector<double> buf(spec.n);
  long double s1 = 0.0L, s2 = 0.0L, cross = 0.0L;
  uint64_t n1 = 0, n2 = 0;
  for (int p = 0; p < paths; ++p) {
    stream.next_increments(buf);
    for (size_t i = 0; i < buf.size(); ++i) {
      s1 += buf[i];
      s2 += static_cast<long double>(buf[i]) * buf[i];
      ++n1;
      if (i + 1 < buf.size()) {
        cross += static_cast<long double>(buf[i]) * buf[i + 1];
        ++n2;
      }
    }
  }
  const double mean = static_cast<double>(s1 / n1);
  const double var = static_cast<double>(s2 / n1);
  const double lag1 = static_cast<double>(cross / n2);
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.02);
  CHECK(std::fabs(lag1 - (std::sqrt(2.0) - 1.0)) < 0.02);
}

TEST_CASE("path sampling is deterministic in seed and replica") {
  FbmSpec spec;
  spec.hurst = 0.6;
  spec.n = 32;

  const std::vector<double> a = sample_increments(spec, 7);
  const std::vector<double> b = sample_increments(spec, 7);
  const std::vector<double> c = sample_increments(spec, 8);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 32);

  FbmSampler sampler(spec);
  FbmStream r0(sampler, 7, 0);
  FbmStream r1(sampler, 7, 1);
  std::vector<double> x(spec.n), y(spec.n);
  r0.next_increments(x);
  r1.next_increments(y);
  CHECK(x == a);  // replica 0 is the sample_increments path
  CHECK(x != y);  // replicas draw from disjoint streams

  std::vector<double> wrong(spec.n + 1);
  CHECK_THROWS_AS(r0.next_increments(wrong), std::domain_error);
}

TEST_CASE("batch simulation: thread invariance, moments, validation") {
  FbmSpec spec;
  spec.hurst = 0.5;
  spec.n = 64;

  const SampleBatch one = simulate_fbm_batch(spec, 20000, 11, 5, 1);
  const SampleBatch three = simulate_fbm_batch(spec, 20000, 11, 5, 3);
  CHECK(one.values == three.values);
  CHECK(one.model_tag == three.model_tag);
  CHECK(one.model_tag == "fbm_h0.5_n64");
  CHECK(one.seed == 11);

  // Standardized statistic: mean 0, variance 1 within Monte Carlo error.
  const SampleBatch big = simulate_fbm_batch(spec, 100000, 12, 16, 1);
  CHECK(std::fabs(sample_moment(big, 1)) < 0.02);
  CHECK(std::fabs(sample_moment(big, 2) - 1.0) < 0.025);

  // Kolmogorov distance honors the fourth-moment bound with room to spare.
  const double fm = diagnostics(spec).fm_bound;
  CHECK(ks_distance(big) < fm + dkw_band(big.size(), 1e-3));

  CHECK_THROWS_AS(simulate_fbm_batch(spec, 0, 1, 4, 1), std::domain_error);
  CHECK_THROWS_AS(simulate_fbm_batch(spec, 10, 1, 0, 1), std::domain_error);
  FbmSpec bad;
  bad.hurst = 0.0;
  CHECK_THROWS_AS(simulate_fbm_batch(bad, 10, 1, 4, 1), std::domain_error);
  FbmSpec tiny;
  tiny.n = 1;
  CHECK_THROWS_AS(diagnostics(tiny), std::domain_error);
}
