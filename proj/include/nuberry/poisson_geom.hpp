#pragma once

// Poisson point processes on a box window, random geometric graphs, exact
// non-induced subgraph counting with incremental add-one-cost and second
// difference operators, Monte Carlo estimation of the five second-order
// Poincare terms A1..A5, and the explicit uniform / tail bound assemblies
// for standardized subgraph counts.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nuberry/empirical.hpp"
#include "nuberry/pattern.hpp"
#include "nuberry/rng.hpp"

namespace nuberry {

// Axis-aligned box window; uniform sampling and volume are exact.
struct Window {
  uint32_t dim = 0;
  std::vector<double> lower;
  std::vector<double> upper;

  Window(std::vector<double> lo, std::vector<double> hi);
  double volume() const;
  bool contains(std::span<const double> x) const;
};

// Flat coordinate storage: point i occupies [i*dim, (i+1)*dim).
struct PointConfig {
  uint32_t dim = 0;
  std::vector<double> coords;

  uint64_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const double> point(uint64_t i) const {
    return {coords.data() + i * dim, dim};
  }
  void push(std::span<const double> x) {
    coords.insert(coords.end(), x.begin(), x.end());
  }
};

// Poisson process with the given intensity on the window: point count is
// Poisson(intensity * volume), locations i.i.d. uniform.  Guard:
// intensity * volume < 1e8.
PointConfig sample_ppp(const Window& window, double intensity, RngStream& rng);

// Geometric graph: vertices are the points, an edge joins two points whose
// distance is strictly positive and at most `radius`.  Built with a
// grid-bucket neighbor search (cell size = radius).
HostGraph build_geo_graph(const PointConfig& points, double radius);

// Non-induced copies of the pattern in the geometric graph.
uint64_t count_subgraphs(const PointConfig& points, double radius,
                         const PatternGraph& pattern);

struct RggSpec {
  Window window;
  double intensity;   // t
  double radius;      // r
  PatternGraph pattern;
  double v_const = 1.0;   // variance constant v (user input, never fitted silently)
  double std_mean = 0.0;  // standardization of the count statistic
  double std_dev = 1.0;

  RggSpec(Window w, double t, double r, PatternGraph p, double v = 1.0);
};

// D_x F = (count with x - count without x) / std_dev, computed by counting
// only the copies containing x.
double add_one_cost(const RggSpec& spec, const PointConfig& points,
                    std::span<const double> x);

// D^2_{x,y} F = F(+x+y) - F(+x) - F(+y) + F(); equals (copies containing
// both x and y) / std_dev and is symmetric in (x, y).
double second_diff(const RggSpec& spec, const PointConfig& points,
                   std::span<const double> x, std::span<const double> y);

// A gradient evaluator bound to one point configuration; the configuration
// must outlive the view.
class GradientView {
 public:
  virtual ~GradientView() = default;
  virtual double add_one(std::span<const double> x) = 0;
  virtual double second(std::span<const double> x, std::span<const double> y) = 0;
};

// A functional of a Poisson configuration exposing its difference operators.
class PoissonFunctional {
 public:
  virtual ~PoissonFunctional() = default;
  virtual std::unique_ptr<GradientView> bind(const PointConfig& points) const = 0;
};

// Standardized subgraph count; gradients are computed incrementally over a
// shared geometric graph per configuration.
class SubgraphFunctional : public PoissonFunctional {
 public:
  explicit SubgraphFunctional(const RggSpec& spec);
  std::unique_ptr<GradientView> bind(const PointConfig& points) const override;

 private:
  const RggSpec& spec_;
};

// Standardized point count (linear functional): add-one cost 1/std_dev,
// second differences identically zero.
class PointCountFunctional : public PoissonFunctional {
 public:
  explicit PointCountFunctional(double std_dev);
  std::unique_ptr<GradientView> bind(const PointConfig& points) const override;

 private:
  double std_dev_;
};

struct McMeta {
  uint64_t outer = 0;        // tuple replicas
  uint64_t inner = 0;        // process replicas per tuple
  uint64_t point_draws = 0;  // uniform tuple coordinates drawn on the window
  uint64_t seed = 0;
};

struct PoincareTermsP {
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0;
  double se1 = 0, se2 = 0, se3 = 0, se4 = 0, se5 = 0;
  // Jackknife estimates of the small-inner-sample bias of the square roots
  // entering a1 and a4 (reported, not subtracted).
  double bias_a1 = 0, bias_a4 = 0;
  McMeta meta;
};

// Monte Carlo estimator of
//   A1 = int sqrt(E (D1F)^2 (D2F)^2) sqrt(E (D13F)^2 (D23F)^2) dmu^3
//   A2 = int E (D13F)^2 (D23F)^2 dmu^3
//   A3 = int E (DF)^4 dmu
//   A4 = 6 int sqrt(E (D1F)^4) sqrt(E (D12F)^4) dmu^2
//   A5 = 3 int E (D12F)^4 dmu^2
// with Dij the second difference.  Each mu^j integral uses `outer` uniform
// tuples scaled by (intensity * volume)^j; each inner expectation uses
// `inner` fresh configurations; square roots are applied per tuple.
// Standard errors come from the tuple-level spread.  Deterministic for a
// fixed seed at any thread count.
PoincareTermsP estimate_poincare_terms(const PoissonFunctional& functional,
                                       const Window& window, double intensity,
                                       uint64_t outer, uint64_t inner, uint64_t seed,
                                       int threads = 1);
PoincareTermsP estimate_poincare_terms(const RggSpec& spec, uint64_t outer,
                                       uint64_t inner, uint64_t seed,
                                       int threads = 1);

// 2 sqrt(A1) + sqrt(A2) + 2 (sqrt(A3) + sqrt(A4 + A5)).
double uniform_bound_poisson(const PoincareTermsP& terms);

// Same assembly with every term pushed up by `sigmas` standard errors;
// the conservative end of the estimator's confidence range.
double uniform_bound_poisson_pushed(const PoincareTermsP& terms, double sigmas);

// Volume of the d-dimensional unit ball.
double unit_ball_volume(uint32_t dim);

// v * max{t^{q-1} (kappa_d r^d)^{2q-2}, t^q (kappa_d r^d)^{q-1}}.
double variance_lower_bound(uint32_t q, double v, double intensity, double radius,
                            uint32_t dim);

// sqrt(v * t * min{1, t kappa_d r^d}^{q-1}) / (q^{3q} max{1, volume / v}).
double concentration_c_rgg(uint32_t q, double v, double intensity, double radius,
                           uint32_t dim, double volume);

// 2 exp(-min(z^2 / 2^q, (c z)^{1/q}) / 4).
double poisson_tail_bound(double z, int q, double c);

// Sample mean and variance of the raw (unstandardized) subgraph count over
// n_pilot fresh configurations; deterministic at any thread count.
std::pair<double, double> rgg_pilot_moments(const RggSpec& spec, uint64_t n_pilot,
                                            uint64_t seed, uint32_t replicas,
                                            int threads,
                                            uint64_t stream_base = kStreamBasePilot);

// Copy of the spec with std_mean / std_dev set from a pilot run of at
// least 1e5 replicas; throws if the pilot variance is degenerate.
RggSpec with_pilot_standardization(RggSpec spec, uint64_t n_pilot, uint64_t seed,
                                   uint32_t replicas, int threads);

// Monte Carlo batch of standardized subgraph counts.
SampleBatch simulate_rgg_batch(const RggSpec& spec, uint64_t n_samples, uint64_t seed,
                               uint32_t replicas, int threads,
                               uint64_t stream_base = kStreamBaseBatch);

// One point per row, coordinates comma-separated.
void write_points_csv(const PointConfig& points, const std::string& path);

}  // namespace nuberry
