#include "nuberry/gaussian_chaos.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fftw3.h>

#include "nuberry/parallel.hpp"

namespace nuberry {

namespace {

constexpr uint32_t kCholeskyLimit = 4096;
constexpr double kEigClip = 1e-10;

// FFTW planning is not thread-safe; executing a plan on fresh aligned
// arrays is.  All plans are created under this mutex and kept alive for
// the process lifetime.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

void check_spec(const FbmSpec& spec) {
  if (!(spec.hurst > 0.0 && spec.hurst < 1.0))
    throw std::domain_error("FbmSpec: hurst must lie in (0,1)");
  if (spec.n < 2) throw std::domain_error("FbmSpec: n must be >= 2");
  if (!(spec.c_h > 0.0)) throw std::domain_error("FbmSpec: c_h must be > 0");
}

std::vector<double> cov_row(const FbmSpec& spec, uint64_t len) {
  std::vector<double> r(len);
  for (uint64_t j = 0; j < len; ++j) r[j] = increment_cov(spec.hurst, j);
  return r;
}

}  // namespace

double increment_cov(double hurst, uint64_t j) {
  if (!(hurst > 0.0 && hurst < 1.0))
    throw std::domain_error("increment_cov: hurst must lie in (0,1)");
  if (j == 0) return 1.0;
  // The three powers nearly cancel at large lags (the result decays like
  // j^{2H-2} while each term grows like j^{2H}), so evaluate in extended
  // precision to keep absolute error near 1e-13 even at lag 1e6.
  const long double h2 = 2.0L * static_cast<long double>(hurst);
  const long double jd = static_cast<long double>(j);
  return static_cast<double>(
      0.5L * (powl(jd + 1.0L, h2) + powl(jd - 1.0L, h2) - 2.0L * powl(jd, h2)));
}

double berry_rate(double hurst, double n) {
  if (!(hurst > 0.0 && hurst < 1.0))
    throw std::domain_error("berry_rate: hurst must lie in (0,1)");
  if (!(n >= 2.0)) throw std::domain_error("berry_rate: requires n >= 2");
  if (hurst > 0.75)
    throw std::domain_error("berry_rate: no central limit theorem for hurst > 3/4");
  if (hurst < 0.625) return 1.0 / std::sqrt(n);
  if (hurst == 0.625) return std::pow(std::log(n), 1.5) / std::sqrt(n);
  if (hurst < 0.75) return std::pow(n, 4.0 * hurst - 3.0);
  return 1.0 / std::log(n);  // hurst == 0.75
}

double hurst_estimator(double s_n, double n) {
  if (!(s_n > 0.0)) throw std::domain_error("hurst_estimator: requires s_n > 0");
  if (!(n >= 2.0)) throw std::domain_error("hurst_estimator: requires n >= 2");
  return 0.5 - std::log(s_n) / (2.0 * std::log(n));
}

double gauss_tail_bound(double z, int q, double c) {
  if (!(z > 0.0)) throw std::domain_error("gauss_tail_bound: requires z > 0");
  if (q < 1) throw std::domain_error("gauss_tail_bound: requires q >= 1");
  if (!(c > 0.0)) throw std::domain_error("gauss_tail_bound: requires c > 0");
  double first = z * z / std::pow(2.0, 0.5 * q);
  double second = std::pow(c * z, 2.0 / q);
  return 2.0 * std::exp(-0.25 * std::fmin(first, second));
}

double fbm_nonuniform_bound(double z, double a_n, double c) {
  if (!(z > 0.0)) throw std::domain_error("fbm_nonuniform_bound: requires z > 0");
  if (!(a_n > 0.0)) throw std::domain_error("fbm_nonuniform_bound: requires a_n > 0");
  if (!(c > 0.0)) throw std::domain_error("fbm_nonuniform_bound: requires c > 0");
  double inner = std::fmin(z * z / 8.0, std::pow(2.0, -3.25) / std::sqrt(a_n) * z);
  return (std::sqrt(2.0) * std::exp(-0.125 * inner) + c * std::exp(-0.25 * z * z)) * a_n;
}

double quad_var_statistic(std::span<const double> x, double sigma_n) {
  if (x.empty()) throw std::domain_error("quad_var_statistic: empty vector");
  if (!(sigma_n > 0.0))
    throw std::domain_error("quad_var_statistic: requires sigma_n > 0");
  double s = 0.0, comp = 0.0;
  for (double v : x) {
    double term = v * v - 1.0;
    double t = s + term;
    if (std::fabs(s) >= std::fabs(term))
      comp += (s - t) + term;
    else
      comp += (term - t) + s;
    s = t;
  }
  return (s + comp) / sigma_n;
}

ChaosDiagnostics diagnostics(const FbmSpec& spec) {
  check_spec(spec);
  const uint64_t n = spec.n;
  std::vector<double> r = cov_row(spec, n);

  // tr(Sigma^2) over index differences: n r_0^2 + 2 sum_j (n-j) r_j^2.
  double tr2 = static_cast<double>(n) * r[0] * r[0];
  for (uint64_t j = 1; j < n; ++j)
    tr2 += 2.0 * static_cast<double>(n - j) * r[j] * r[j];

  // tr(Sigma^4) = ||Sigma^2||_F^2.  Entries of Sigma^2 along a diagonal
  // obey C(i+1, k+1) = C(i, k) + r_{i+1} r_{k+1} - r_{n-1-i} r_{n-1-k},
  // so each diagonal is O(n) and the total is O(n^2) with O(n) memory.
  double tr4 = 0.0;
  for (uint64_t u = 0; u < n; ++u) {
    // Diagonal k = i - u, starting at (i, k) = (u, 0).
    double c = 0.0;
    for (uint64_t j = 0; j < n; ++j) {
      uint64_t du = u >= j ? u - j : j - u;
      c += r[du] * r[j];
    }
    double acc = c * c;
    for (uint64_t i = u; i + 1 < n; ++i) {
      uint64_t k = i - u;
      c += r[i + 1] * r[k + 1] - r[n - 1 - i] * r[n - 1 - k];
      acc += c * c;
    }
    tr4 += u == 0 ? acc : 2.0 * acc;
  }

  ChaosDiagnostics d;
  d.tr2 = tr2;
  d.tr4 = tr4;
  d.sigma_n = std::sqrt(2.0 * tr2);
  d.kappa4_excess = 48.0 * tr4 / (4.0 * tr2 * tr2);
  d.fm_bound = std::sqrt(d.kappa4_excess / 6.0);
  d.contraction_norm = std::sqrt(tr4) / (2.0 * tr2);
  d.c_n = 1.0 / (8.0 * std::sqrt(d.contraction_norm));
  d.rate_an = spec.c_h * berry_rate(spec.hurst, static_cast<double>(spec.n));
  return d;
}

// ---------------------------------------------------------------------------
// Sampling machinery.

struct FbmSampler::Impl {
  // Cholesky mode.
  Eigen::MatrixXd chol;  // lower factor L, empty in circulant mode

  // Circulant mode: spectrum of the embedding and a reusable FFTW plan.
  std::size_t m = 0;               // embedding size, power of two
  std::vector<double> scale;       // sqrt(lambda_j / m)
  fftw_plan plan = nullptr;
  fftw_complex* plan_in = nullptr;
  fftw_complex* plan_out = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (plan) fftw_destroy_plan(plan);
    if (plan_in) fftw_free(plan_in);
    if (plan_out) fftw_free(plan_out);
  }
};

namespace {

void build_cholesky(const FbmSpec& spec, FbmSampler::Impl& impl) {
  const uint32_t n = spec.n;
  std::vector<double> r = cov_row(spec, n);
  Eigen::MatrixXd sigma(n, n);
  for (uint32_t i = 0; i < n; ++i)
    for (uint32_t j = 0; j < n; ++j)
      sigma(i, j) = r[i >= j ? i - j : j - i];
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    throw std::runtime_error(
        "FbmSampler: covariance factorization failed; smallest eigenvalue = " +
        std::to_string(es.eigenvalues().minCoeff()));
  }
  impl.chol = llt.matrixL();
}

void build_circulant(const FbmSpec& spec, FbmSampler::Impl& impl) {
  const uint64_t n = spec.n;
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  impl.m = m;

  // First row of the circulant: the covariance extended to lag m/2 and
  // reflected.  This is the embedding of a longer increment series, which
  // is nonnegative definite for every Hurst index.
  std::vector<double> c(m);
  for (std::size_t j = 0; j <= m / 2; ++j) c[j] = increment_cov(spec.hurst, j);
  for (std::size_t j = m / 2 + 1; j < m; ++j) c[j] = c[m - j];

  fftw_complex* in;
  fftw_complex* out;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    in = fftw_alloc_complex(m);
    out = fftw_alloc_complex(m);
    plan = fftw_plan_dft_1d(static_cast<int>(m), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t j = 0; j < m; ++j) {
    in[j][0] = c[j];
    in[j][1] = 0.0;
  }
  fftw_execute(plan);

  impl.scale.resize(m);
  double min_ev = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double ev = out[j][0];
    min_ev = std::fmin(min_ev, ev);
    if (ev < 0.0) ev = 0.0;  // clip tiny negatives in [-1e-10, 0)
    // With the unnormalized forward DFT, feeding s_j (xi_j + i eta_j) and
    // reading both output parts needs s_j^2 = lambda_j / m so that
    // E[Re Y_k Re Y_l] = (1/m) sum_j lambda_j cos(2 pi j (k-l) / m) = c_{k-l}.
    impl.scale[j] = std::sqrt(ev / static_cast<double>(m));
  }
  if (min_ev < -kEigClip) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    // Spectral fallback: the contract prefers a dense factorization over a
    // biased circulant sampler.
    build_cholesky(spec, impl);
    impl.m = 0;
    impl.scale.clear();
    return;
  }
  impl.plan = plan;
  impl.plan_in = in;
  impl.plan_out = out;
}

}  // namespace

FbmSampler::FbmSampler(const FbmSpec& spec)
    : spec_(spec), sigma_n_(0.0), circulant_(spec.n > kCholeskyLimit) {
  check_spec(spec);
  sigma_n_ = diagnostics(spec).sigma_n;
  impl_ = std::make_unique<Impl>();
  if (circulant_)
    build_circulant(spec, *impl_);
  else
    build_cholesky(spec, *impl_);
  if (impl_->m == 0) circulant_ = false;  // circulant path fell back
}

FbmSampler::~FbmSampler() = default;

struct FbmStream::State {
  Eigen::VectorXd gauss;   // Cholesky scratch
  Eigen::VectorXd path;
  fftw_complex* in = nullptr;   // circulant scratch
  fftw_complex* out = nullptr;
  std::vector<double> stash;    // second sample of each circulant pair
  bool have_stash = false;

  ~State() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (in) fftw_free(in);
    if (out) fftw_free(out);
  }
};

FbmStream::FbmStream(const FbmSampler& sampler, uint64_t seed, uint64_t replica)
    : sampler_(sampler), rng_(seed, replica), state_(std::make_unique<State>()) {
  const auto& impl = sampler.impl();
  if (sampler.uses_circulant()) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    state_->in = fftw_alloc_complex(impl.m);
    state_->out = fftw_alloc_complex(impl.m);
    state_->stash.resize(sampler.spec().n);
  } else {
    state_->gauss.resize(sampler.spec().n);
    state_->path.resize(sampler.spec().n);
  }
}

FbmStream::~FbmStream() = default;

void FbmStream::next_increments(std::span<double> out) {
  const auto& impl = sampler_.impl();
  const uint32_t n = sampler_.spec().n;
  if (out.size() != n) throw std::domain_error("FbmStream: output span has wrong length");

  if (!sampler_.uses_circulant()) {
    for (uint32_t i = 0; i < n; ++i) state_->gauss[i] = rng_.next_gauss();
    state_->path.noalias() =
        impl.chol.triangularView<Eigen::Lower>() * state_->gauss;
    for (uint32_t i = 0; i < n; ++i) out[i] = state_->path[i];
    return;
  }

  if (state_->have_stash) {
    state_->have_stash = false;
    std::copy(state_->stash.begin(), state_->stash.end(), out.begin());
    return;
  }
  const std::size_t m = impl.m;
  for (std::size_t j = 0; j < m; ++j) {
    double s = impl.scale[j];
    state_->in[j][0] = s * rng_.next_gauss();
    state_->in[j][1] = s * rng_.next_gauss();
  }
  fftw_execute_dft(impl.plan, state_->in, state_->out);
  // Real and imaginary parts are two independent draws.
  for (uint32_t i = 0; i < n; ++i) {
    out[i] = state_->out[i][0];
    state_->stash[i] = state_->out[i][1];
  }
  state_->have_stash = true;
}

double FbmStream::next_stat() {
  const uint32_t n = sampler_.spec().n;
  if (!sampler_.uses_circulant()) {
    // Avoid the span round trip in the hot path.
    for (uint32_t i = 0; i < n; ++i) state_->gauss[i] = rng_.next_gauss();
    state_->path.noalias() =
        sampler_.impl().chol.triangularView<Eigen::Lower>() * state_->gauss;
    return quad_var_statistic(std::span<const double>(state_->path.data(), n),
                              sampler_.sigma_n());
  }
  std::vector<double> buf(n);
  next_increments(buf);
  return quad_var_statistic(buf, sampler_.sigma_n());
}

std::vector<double> sample_increments(const FbmSpec& spec, uint64_t seed) {
  FbmSampler sampler(spec);
  FbmStream stream(sampler, seed, 0);
  std::vector<double> out(spec.n);
  stream.next_increments(out);
  return out;
}

SampleBatch simulate_fbm_batch(const FbmSpec& spec, uint64_t n_samples, uint64_t seed,
                               uint32_t replicas, int threads) {
  if (n_samples == 0) throw std::domain_error("simulate_fbm_batch: n_samples must be >= 1");
  if (replicas == 0) throw std::domain_error("simulate_fbm_batch: replicas must be >= 1");
  FbmSampler sampler(spec);

  std::vector<double> values(n_samples);
  std::vector<uint64_t> offsets(replicas + 1, 0);
  for (uint32_t r = 0; r < replicas; ++r)
    offsets[r + 1] = offsets[r] + replica_share(n_samples, replicas, r);

  run_replicas(replicas, threads, [&](uint32_t r) {
    FbmStream stream(sampler, seed, r);
    for (uint64_t i = offsets[r]; i < offsets[r + 1]; ++i) values[i] = stream.next_stat();
  });

  char tag[64];
  std::snprintf(tag, sizeof(tag), "fbm_h%.6g_n%u", spec.hurst, spec.n);
  return SampleBatch::from_unsorted(std::move(values), tag, seed);
}

}  // namespace nuberry
