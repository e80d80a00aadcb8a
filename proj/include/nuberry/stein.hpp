#pragma once

// Stein kernel for the standard normal: the solution of the Stein equation
//   f'(w) - w f(w) = 1{w <= z} - Phi(z),
// its derivative, and the small closed-form bounds built on top of it.
// Everything here is pure real arithmetic; the only numerical subtlety is
// that Phi(w)/p(w) and (1-Phi(w))/p(w) must never be formed as raw
// quotients (p(w) underflows near |w| = 38.6).

#include <stdexcept>

namespace nuberry::stein {

// Standard normal CDF, absolute error below 1e-14 everywhere.
double std_normal_cdf(double x);

// Upper tail 1 - Phi(x), computed directly (no cancellation).
double std_normal_sf(double x);

// Standard normal density.
double std_normal_pdf(double x);

// Inverse CDF.  Wichura's algorithm polished with one Newton step against
// std_normal_cdf; used by samplers and test fixtures.
double std_normal_quantile(double u);

// Scaled upper Mills ratio (1 - Phi(x))/p(x) for x >= 0.  Stable for all
// nonnegative x; continued-fraction regime beyond x = 8.
double mills_ratio(double x);

// Tail bound min(1/2, 1/z) e^{-z^2/2}, valid for z > 0.
double mills_tail_bound(double z);

// Solution f_z(w) of the Stein equation.
double stein_solution(double z, double w);

// Derivative f'_z(w); refuses the jump point w == z.
double stein_derivative(double z, double w);

enum class Side { left, right };

// One-sided limits of f'_z at the jump w = z (left minus right equals 1).
double stein_derivative_limit(double z, Side side);

struct LemmaConstants {
  int k;
  double c1;
  double c2;  // (1 + c1^{1/(2k)})^{2k}
};

// Constant c2 with min(1, c1/|z|^{2k}) (1+|z|)^{2k} <= c2 for all z.
LemmaConstants lemma_constant(int k, double c1);

// Non-uniform prefactor c e^{-z^2/4} + sqrt(tail_half), where tail_half
// estimates P(F > z/2).
double improved_prefactor(double z, double tail_half, double c);

struct JumpError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace nuberry::stein
