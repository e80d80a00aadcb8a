#pragma once

// Rademacher functionals with finite support: bit-flip difference
// operators, exact-enumeration and Monte Carlo estimation of the five
// second-order Poincare terms B1..B5 with the explicit uniform bound
// assembly, the weighted 2-runs statistic, and Erdos-Renyi subgraph counts
// with the scale quantity Psi.  Exact laws for small supports provide
// oracle distances and moments.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nuberry/empirical.hpp"
#include "nuberry/pattern.hpp"
#include "nuberry/rng.hpp"

namespace nuberry {

// Independent bits X_k = +1 with probability p_k, else -1.
struct RademacherSpec {
  std::vector<double> probs;

  explicit RademacherSpec(std::vector<double> p);
  RademacherSpec(std::size_t m, double p);
  std::size_t support() const { return probs.size(); }
};

// A functional of the bit vector; evaluations must be pure.
using BitFunctional = std::function<double(std::span<const int8_t>)>;

// D_k F = sqrt(p_k q_k) (F at X_k=+1 minus F at X_k=-1); independent of the
// current bit at k.
double discrete_gradient(const RademacherSpec& spec, const BitFunctional& f,
                         std::span<const int8_t> bits, std::size_t k);

// D_l D_k F by iterating the gradient; symmetric in (k, l), k != l.
double second_gradient(const RademacherSpec& spec, const BitFunctional& f,
                       std::span<const int8_t> bits, std::size_t k, std::size_t l);

enum class BTermMode { enumerate, monte_carlo };

struct RademacherMcMeta {
  uint64_t replicas = 0;
  uint64_t batches = 0;
  uint64_t seed = 0;
};

struct PoincareTermsR {
  double b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0;
  double se1 = 0, se2 = 0, se3 = 0, se4 = 0, se5 = 0;
  bool exact = false;  // true when computed by full enumeration (stderr 0)
  RademacherMcMeta meta;
};

// B1 = sum_{j,k} sum_{l not in {j,k}} sqrt(E (DjF)^2 (DkF)^2)
//                                     sqrt(E (DlDjF)^2 (DlDkF)^2)
// B2 = same sum of (p_l q_l)^{-1} E (DlDjF)^2 (DlDkF)^2
// B3 = sum_k (p_k q_k)^{-1} E (DkF)^4
// B4 = sum_{k != l} (p_k q_k)^{-1} sqrt(E (DkF)^4) sqrt(E (DlDkF)^4)
// B5 = sum_{k != l} (p_k q_k p_l q_l)^{-1} E (DlDkF)^4
// The iterated second difference vanishes at repeated coordinates, so
// restricting l outside {j,k} is exact.  Enumerate mode (support <= 24)
// computes every expectation by weighted sum over all configurations;
// Monte Carlo mode estimates them over `replicas` shared draws with
// batch-means standard errors.  Deterministic at any thread count.
PoincareTermsR estimate_b_terms(const RademacherSpec& spec, const BitFunctional& f,
                                BTermMode mode, uint64_t replicas, uint64_t seed,
                                int threads = 1);

// (sqrt(15)/2) sqrt(B1) + (sqrt(3)/2) sqrt(B2)
//   + 2 (2 sqrt(B3) + 2 sqrt(6) sqrt(B4) + 2 sqrt(3) sqrt(B5)).
double uniform_bound_rademacher(const PoincareTermsR& terms);

// Weighted 2-runs: G = sum_i a_i xi_i xi_{i+1} over fair bits,
// xi = (X+1)/2; F = (G - mean)/std_dev.  A degenerate all-zero weight
// vector is representable; operations that need a nondegenerate law throw.
struct TwoRunsSpec {
  std::vector<double> weights;
  double mean = 0.0;
  double std_dev = 1.0;

  explicit TwoRunsSpec(std::vector<double> w);
};

// Evaluates F on m+1 bits (one extra so the last product is defined).
double two_runs_eval(const TwoRunsSpec& spec, std::span<const int8_t> bits);

// Exact (mean, variance) of the raw G by enumeration over all 2^{m+1}
// configurations; resource error beyond m = 20.
std::pair<double, double> two_runs_moments(const TwoRunsSpec& spec);

// Closed forms: mean = sum a_i / 4,
// variance = (3 sum a_i^2 + 2 sum a_i a_{i+1}) / 16.
std::pair<double, double> two_runs_closed_moments(std::span<const double> weights);

// ||a||_4^2 / ||a||_2^2 = sqrt(sum a^4) / sum a^2; m equal weights give
// m^{-1/2}.
double two_runs_norm_bound(std::span<const double> weights);

// Spec standardized by the closed-form moments (throws when degenerate).
TwoRunsSpec standardized_two_runs(std::vector<double> weights);

// The m+1 fair bits behind the 2-runs statistic, and F as a functional.
RademacherSpec two_runs_bits(const TwoRunsSpec& spec);
BitFunctional two_runs_functional(const TwoRunsSpec& spec);

SampleBatch simulate_two_runs_batch(const TwoRunsSpec& spec, uint64_t n_samples,
                                    uint64_t seed, uint32_t replicas, int threads,
                                    uint64_t stream_base = kStreamBaseBatch);

// Erdos-Renyi subgraph counts: W = copies of the pattern in G(n, p),
// encoded over n(n-1)/2 edge coordinates; F = (W - mean)/std_dev.
struct ErSpec {
  uint32_t n;
  double p;
  PatternGraph pattern;
  double mean = 0.0;
  double std_dev = 1.0;

  ErSpec(uint32_t n, double p, PatternGraph pattern);
  uint64_t edge_slots() const { return uint64_t{n} * (n - 1) / 2; }
};

// Slot order: pair (i, j), i < j, at index i*n - i(i+1)/2 + (j - i - 1).
uint64_t er_subgraph_count(uint32_t n, std::span<const int8_t> edge_bits,
                           const PatternGraph& pattern);

// Psi = min over nonempty edge subsets H of the pattern (vertices = the
// endpoints; isolated vertices can never attain the minimum) of
// n^{v_H} p^{e_H}.
double psi(const PatternGraph& pattern, uint32_t n, double p);

// (q Psi)^{-1/2}, q = 1 - p.
double er_bound_scale(uint32_t n, double p, const PatternGraph& pattern);

// Exact (mean, variance) of the raw count by enumeration; n <= 6.
std::pair<double, double> er_exact_moments(const ErSpec& spec);

ErSpec with_exact_standardization(ErSpec spec);
ErSpec with_pilot_standardization(ErSpec spec, uint64_t n_pilot, uint64_t seed,
                                  uint32_t replicas, int threads);

RademacherSpec er_bits(const ErSpec& spec);
BitFunctional er_functional(const ErSpec& spec);

SampleBatch simulate_er_batch(const ErSpec& spec, uint64_t n_samples, uint64_t seed,
                              uint32_t replicas, int threads,
                              uint64_t stream_base = kStreamBaseBatch);

// Exact law of F over all configurations (support <= 24): sorted unique
// atoms whose probabilities sum to 1 within 1e-12.
struct LawAtom {
  double value;
  double prob;
};

std::vector<LawAtom> enumerate_distribution(const RademacherSpec& spec,
                                            const BitFunctional& f);

// Kolmogorov distances of a discrete law against the standard normal.
double exact_kolmogorov(std::span<const LawAtom> law);
WeightedKs exact_weighted_kolmogorov(std::span<const LawAtom> law, int k);

// E value^order under the law.
double law_moment(std::span<const LawAtom> law, int order);

// CSV rows "value,probability".
void write_law_csv(std::span<const LawAtom> law, const std::string& path);

}  // namespace nuberry
