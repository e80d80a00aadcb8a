#include "nuberry/stein.hpp"

#include <cmath>
#include <limits>

namespace nuberry::stein {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
constexpr double kInvSqrt2 = 0.70710678118654752440084436210484904;
constexpr double kSqrt2Pi = 2.50662827463100050241576528481104525;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438187;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::domain_error(std::string(what) + ": non-finite input");
}

}  // namespace

double std_normal_cdf(double x) {
  require_finite(x, "std_normal_cdf");
  // erfc keeps full relative accuracy in the left tail, so the CDF is
  // accurate to ~1 ulp absolutely everywhere.
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_sf(double x) {
  require_finite(x, "std_normal_sf");
  return 0.5 * std::erfc(x * kInvSqrt2);
}

double std_normal_pdf(double x) {
  require_finite(x, "std_normal_pdf");
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double mills_ratio(double x) {
  if (!(x >= 0.0)) throw std::domain_error("mills_ratio: requires x >= 0");
  if (x <= 8.0) {
    // (1-Phi)/p = sqrt(pi/2) erfcx(x/sqrt(2)); exp(x^2/2) <= e^32 here, and
    // the product's relative error stays below ~1e-13.
    return 0.5 * kSqrt2Pi * std::exp(0.5 * x * x) * std::erfc(x * kInvSqrt2);
  }
  // Laplace continued fraction 1/(x + 1/(x + 2/(x + 3/(...)))), evaluated
  // backward; 48 levels is far more than needed at x > 8.
  double t = x;
  for (int k = 48; k >= 1; --k) t = x + k / t;
  return 1.0 / t;
}

double mills_tail_bound(double z) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw std::domain_error("mills_tail_bound: requires z > 0");
  return std::fmin(0.5, 1.0 / z) * std::exp(-0.5 * z * z);
}

namespace {

// f_z(w) = Phi(w)(1-Phi(z))/p(w) on the branch w <= z.  Two stable forms:
// for w <= 0 the factor Phi(w)/p(w) is the Mills ratio at -w; for
// 0 < w <= z write the product as Phi(w) M(z) e^{(w^2-z^2)/2} whose
// exponent is nonpositive.
double solution_lower(double z, double w) {
  if (w <= 0.0) return mills_ratio(-w) * std_normal_sf(z);
  return std_normal_cdf(w) * mills_ratio(z) * std::exp(0.5 * (w - z) * (w + z));
}

// f'_z(w) on the branch w < z, same stabilization.
double derivative_lower(double z, double w) {
  if (w <= 0.0) return std_normal_sf(z) * (1.0 + w * mills_ratio(-w));
  return std_normal_sf(z) +
         w * std_normal_cdf(w) * mills_ratio(z) * std::exp(0.5 * (w - z) * (w + z));
}

}  // namespace

double stein_solution(double z, double w) {
  require_finite(z, "stein_solution");
  require_finite(w, "stein_solution");
  // The w > z branch is the w <= z branch of f_{-z}(-w).
  return w <= z ? solution_lower(z, w) : solution_lower(-z, -w);
}

double stein_derivative(double z, double w) {
  require_finite(z, "stein_derivative");
  require_finite(w, "stein_derivative");
  if (w == z)
    throw JumpError(
        "stein_derivative: w == z is the unit jump of f'; "
        "use stein_derivative_limit for the one-sided values");
  return w < z ? derivative_lower(z, w) : -derivative_lower(-z, -w);
}

double stein_derivative_limit(double z, Side side) {
  require_finite(z, "stein_derivative_limit");
  return side == Side::left ? derivative_lower(z, z) : -derivative_lower(-z, -z);
}

LemmaConstants lemma_constant(int k, double c1) {
  if (k < 1) throw std::domain_error("lemma_constant: requires k >= 1");
  if (!(c1 > 0.0) || !std::isfinite(c1))
    throw std::domain_error("lemma_constant: requires c1 > 0");
  double root = std::pow(c1, 1.0 / (2.0 * k));
  return {k, c1, std::pow(1.0 + root, 2.0 * k)};
}

double improved_prefactor(double z, double tail_half, double c) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw std::domain_error("improved_prefactor: requires z > 0");
  if (!(tail_half >= 0.0 && tail_half <= 1.0))
    throw std::domain_error("improved_prefactor: tail_half must lie in [0,1]");
  if (!(c > 0.0) || !std::isfinite(c))
    throw std::domain_error("improved_prefactor: requires c > 0");
  return c * std::exp(-0.25 * z * z) + std::sqrt(tail_half);
}

double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("std_normal_quantile: requires u in (0,1)");
  // Wichura's PPND16 rational approximations.
  double q = u - 0.5;
  double r, x;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    x = q *
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
  } else {
    r = q < 0.0 ? u : 1.0 - u;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
    } else {
      r -= 5.0;
      x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
    }
    if (q < 0.0) x = -x;
  }
  // One Newton step against our own CDF tightens the residual to a few ulp.
  double err = std_normal_cdf(x) - u;
  double d = std_normal_pdf(x);
  if (d > std::numeric_limits<double>::min()) x -= err / d;
  return x;
}

}  // namespace nuberry::stein
