#pragma once

// Empirical-distribution machinery: sorted sample batches, exact uniform
// and weighted Kolmogorov distances against the standard normal, tail
// frequencies, moments, the DKW band, and log-log rate fitting.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nuberry {

struct SampleBatch {
  std::vector<double> values;  // sorted nondecreasing
  uint64_t seed = 0;
  std::string model_tag;

  static SampleBatch from_unsorted(std::vector<double> v, std::string tag, uint64_t seed);
  std::size_t size() const { return values.size(); }
};

// Exact sup_z |F_hat(z) - Phi(z)| from order statistics:
// max_i max(i/n - Phi(x_(i)), Phi(x_(i)) - (i-1)/n).
double ks_distance(const SampleBatch& batch);

struct WeightedKs {
  double value;
  double argmax_z;
};

// sup_z (1+|z|)^k |F_hat(z) - Phi(z)|.  Candidates: both one-sided limits
// at every sample point, a uniform grid on [min-1, max+1], and analytic
// maximization of the pure tail terms beyond the sample range.  k = 0
// reproduces ks_distance exactly.
WeightedKs weighted_ks(const SampleBatch& batch, int k, int grid_points = 2048);

// Same distances for an arbitrary discrete law given as strictly
// increasing atom values with cumulative probabilities after each atom
// (the last one must be 1 within 1e-12).
double ks_atoms(std::span<const double> values, std::span<const double> cum_after);
WeightedKs weighted_ks_atoms(std::span<const double> values,
                             std::span<const double> cum_after, int k,
                             int grid_points = 2048);

// Fraction of samples with value > z (two_sided: |value| >= z).
double tail_prob(const SampleBatch& batch, double z, bool two_sided);

// Mean of value^order under compensated summation.
double sample_moment(const SampleBatch& batch, int order);

// Dvoretzky-Kiefer-Wolfowitz band sqrt(log(2/delta) / (2n)).
double dkw_band(uint64_t n_samples, double delta);

struct KsReport {
  double uniform = 0.0;
  std::map<int, double> weighted;   // k -> weighted distance
  std::map<int, double> argmax;     // k -> attaining z
  double dkw = 0.0;                 // band at the report's delta
};

KsReport make_ks_report(const SampleBatch& batch, const std::vector<int>& ks,
                        double delta = 1e-3);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log d against log n; requires >= 3 points, all positive.
RateFit fit_rate(std::span<const std::pair<double, double>> points);

// Batch file format: u64 little-endian count header followed by the sorted
// values as little-endian doubles, plus a JSON sidecar <path>.json holding
// {model_tag, seed, n_samples}.
void save_batch(const SampleBatch& batch, const std::string& path);
SampleBatch load_batch(const std::string& path);

}  // namespace nuberry
