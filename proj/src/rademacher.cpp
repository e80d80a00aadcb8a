#include "nuberry/rademacher.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "nuberry/parallel.hpp"

namespace nuberry {

namespace {

constexpr uint64_t kEnumerateLimit = 24;
constexpr uint64_t kAccumBytesLimit = 2'000'000'000;

double sq(double x) { return x * x; }

void check_spec(const RademacherSpec& spec) {
  if (spec.probs.empty()) throw std::domain_error("RademacherSpec: empty support");
  for (double p : spec.probs)
    if (!(p > 0.0 && p < 1.0))
      throw std::domain_error("RademacherSpec: probabilities must lie in (0,1)");
}

void check_bits(const RademacherSpec& spec, std::span<const int8_t> bits,
                const char* who) {
  if (bits.size() != spec.support())
    throw std::domain_error(std::string(who) + ": bits length must equal the support");
}

std::vector<double> sqrt_pq(const RademacherSpec& spec) {
  std::vector<double> s(spec.support());
  for (std::size_t k = 0; k < s.size(); ++k)
    s[k] = std::sqrt(spec.probs[k] * (1.0 - spec.probs[k]));
  return s;
}

// All first and second gradients at one configuration; bits is scratch and
// is restored before returning.  h is m x m with zero diagonal.
void fill_gradients(const BitFunctional& f, std::span<int8_t> bits,
                    const std::vector<double>& spq, std::vector<double>& g,
                    std::vector<double>& h) {
  const std::size_t m = spq.size();
  for (std::size_t k = 0; k < m; ++k) {
    int8_t save = bits[k];
    bits[k] = 1;
    double fp = f(bits);
    bits[k] = -1;
    double fm = f(bits);
    bits[k] = save;
    g[k] = spq[k] * (fp - fm);
  }
  for (std::size_t k = 0; k < m; ++k) {
    h[k * m + k] = 0.0;
    for (std::size_t l = k + 1; l < m; ++l) {
      int8_t sk = bits[k], sl = bits[l];
      bits[k] = 1;
      bits[l] = 1;
      double fpp = f(bits);
      bits[k] = -1;
      double fmp = f(bits);
      bits[l] = -1;
      double fmm = f(bits);
      bits[k] = 1;
      double fpm = f(bits);
      bits[k] = sk;
      bits[l] = sl;
      double v = spq[k] * spq[l] * (fpp - fmp - fpm + fmm);
      h[k * m + l] = v;
      h[l * m + k] = v;
    }
  }
}

// Weighted moment accumulators feeding the five B-terms.
struct BAccum {
  std::size_t m = 0;
  double wsum = 0.0;
  std::vector<double> m4g;   // m        : E (DkF)^4
  std::vector<double> p22g;  // m*m      : E (DjF)^2 (DkF)^2
  std::vector<double> m4h;   // m*m      : E (DlDkF)^4
  std::vector<double> q;     // m*m*m    : [l][j][k] E (DlDjF)^2 (DlDkF)^2

  explicit BAccum(std::size_t mm)
      : m(mm), m4g(mm, 0.0), p22g(mm * mm, 0.0), m4h(mm * mm, 0.0),
        q(mm * mm * mm, 0.0) {}

  void add(double w, const std::vector<double>& g, const std::vector<double>& h,
           std::vector<double>& g2, std::vector<double>& h2) {
    wsum += w;
    for (std::size_t k = 0; k < m; ++k) g2[k] = sq(g[k]);
    for (std::size_t i = 0; i < m * m; ++i) h2[i] = sq(h[i]);
    for (std::size_t k = 0; k < m; ++k) m4g[k] += w * sq(g2[k]);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) p22g[j * m + k] += w * g2[j] * g2[k];
    for (std::size_t i = 0; i < m * m; ++i) m4h[i] += w * sq(h2[i]);
    for (std::size_t l = 0; l < m; ++l) {
      const double* hl = h2.data() + l * m;
      for (std::size_t j = 0; j < m; ++j) {
        double hw = w * hl[j];
        double* ql = q.data() + (l * m + j) * m;
        for (std::size_t k = 0; k < m; ++k) ql[k] += hw * hl[k];
      }
    }
  }

  void merge(const BAccum& o) {
    wsum += o.wsum;
    for (std::size_t i = 0; i < m4g.size(); ++i) m4g[i] += o.m4g[i];
    for (std::size_t i = 0; i < p22g.size(); ++i) p22g[i] += o.p22g[i];
    for (std::size_t i = 0; i < m4h.size(); ++i) m4h[i] += o.m4h[i];
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += o.q[i];
  }
};

struct BValues {
  double b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0;
};

BValues assemble(const RademacherSpec& spec, const BAccum& acc) {
  const std::size_t m = acc.m;
  const double inv_w = 1.0 / acc.wsum;
  std::vector<double> invpq(m);
  for (std::size_t k = 0; k < m; ++k)
    invpq[k] = 1.0 / (spec.probs[k] * (1.0 - spec.probs[k]));

  BValues b;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      double root_p22 = std::sqrt(acc.p22g[j * m + k] * inv_w);
      for (std::size_t l = 0; l < m; ++l) {
        if (l == j || l == k) continue;
        double qval = acc.q[(l * m + j) * m + k] * inv_w;
        b.b1 += root_p22 * std::sqrt(qval);
        b.b2 += invpq[l] * qval;
      }
    }
  for (std::size_t k = 0; k < m; ++k) b.b3 += invpq[k] * acc.m4g[k] * inv_w;
  for (std::size_t k = 0; k < m; ++k) {
    double root_g = std::sqrt(acc.m4g[k] * inv_w);
    for (std::size_t l = 0; l < m; ++l) {
      if (l == k) continue;
      double h4 = acc.m4h[k * m + l] * inv_w;
      b.b4 += invpq[k] * root_g * std::sqrt(h4);
      b.b5 += invpq[k] * invpq[l] * h4;
    }
  }
  return b;
}

double eval_config(const BitFunctional& f, std::span<int8_t> bits) { return f(bits); }

}  // namespace

RademacherSpec::RademacherSpec(std::vector<double> p) : probs(std::move(p)) {
  check_spec(*this);
}

RademacherSpec::RademacherSpec(std::size_t m, double p)
    : probs(m, p) {
  check_spec(*this);
}

double discrete_gradient(const RademacherSpec& spec, const BitFunctional& f,
                         std::span<const int8_t> bits, std::size_t k) {
  check_bits(spec, bits, "discrete_gradient");
  if (k >= spec.support())
    throw std::domain_error("discrete_gradient: coordinate out of range");
  std::vector<int8_t> scratch(bits.begin(), bits.end());
  scratch[k] = 1;
  double fp = f(scratch);
  scratch[k] = -1;
  double fm = f(scratch);
  return std::sqrt(spec.probs[k] * (1.0 - spec.probs[k])) * (fp - fm);
}

double second_gradient(const RademacherSpec& spec, const BitFunctional& f,
                       std::span<const int8_t> bits, std::size_t k, std::size_t l) {
  check_bits(spec, bits, "second_gradient");
  if (k >= spec.support() || l >= spec.support())
    throw std::domain_error("second_gradient: coordinate out of range");
  if (k == l)
    throw std::domain_error("second_gradient: coordinates must be distinct");
  std::vector<int8_t> scratch(bits.begin(), bits.end());
  scratch[k] = 1;
  scratch[l] = 1;
  double fpp = f(scratch);
  scratch[k] = -1;
  double fmp = f(scratch);
  scratch[l] = -1;
  double fmm = f(scratch);
  scratch[k] = 1;
  double fpm = f(scratch);
  double spq = std::sqrt(spec.probs[k] * (1.0 - spec.probs[k]) * spec.probs[l] *
                         (1.0 - spec.probs[l]));
  return spq * (fpp - fmp - fpm + fmm);
}

PoincareTermsR estimate_b_terms(const RademacherSpec& spec, const BitFunctional& f,
                                BTermMode mode, uint64_t replicas, uint64_t seed,
                                int threads) {
  check_spec(spec);
  const std::size_t m = spec.support();
  const std::vector<double> spq = sqrt_pq(spec);

  if (mode == BTermMode::enumerate) {
    if (m > kEnumerateLimit) {
      char msg[96];
      std::snprintf(msg, sizeof(msg),
                    "estimate_b_terms: enumerate needs support <= %llu, got %zu",
                    static_cast<unsigned long long>(kEnumerateLimit), m);
      throw std::runtime_error(msg);
    }
    BAccum acc(m);
    std::vector<int8_t> bits(m);
    std::vector<double> g(m), h(m * m), g2(m), h2(m * m);
    const uint64_t total = uint64_t{1} << m;
    for (uint64_t cfg = 0; cfg < total; ++cfg) {
      double w = 1.0;
      for (std::size_t k = 0; k < m; ++k) {
        bool up = (cfg >> k) & 1;
        bits[k] = up ? int8_t{1} : int8_t{-1};
        w *= up ? spec.probs[k] : 1.0 - spec.probs[k];
      }
      fill_gradients(f, bits, spq, g, h);
      acc.add(w, g, h, g2, h2);
    }
    BValues b = assemble(spec, acc);
    PoincareTermsR t;
    t.b1 = b.b1;
    t.b2 = b.b2;
    t.b3 = b.b3;
    t.b4 = b.b4;
    t.b5 = b.b5;
    t.exact = true;
    t.meta = {total, 1, seed};
    return t;
  }

  if (replicas < 2)
    throw std::domain_error("estimate_b_terms: monte_carlo needs replicas >= 2");
  const uint64_t batches = std::min<uint64_t>(16, replicas);
  const double accum_bytes =
      static_cast<double>(batches + 1) *
      static_cast<double>(m * m * m + 2 * m * m + m) * 8.0;
  if (accum_bytes > static_cast<double>(kAccumBytesLimit))
    throw std::runtime_error(
        "estimate_b_terms: moment accumulators exceed the memory guard; "
        "reduce the support");

  std::vector<BAccum> accs(batches, BAccum(m));
  run_replicas(static_cast<uint32_t>(batches), threads, [&](uint32_t b) {
    RngStream rng(seed, kStreamBaseTuples + b);
    std::vector<int8_t> bits(m);
    std::vector<double> g(m), h(m * m), g2(m), h2(m * m);
    uint64_t share = replica_share(replicas, static_cast<uint32_t>(batches), b);
    for (uint64_t i = 0; i < share; ++i) {
      for (std::size_t k = 0; k < m; ++k) bits[k] = rng.next_sign(spec.probs[k]);
      fill_gradients(f, bits, spq, g, h);
      accs[b].add(1.0, g, h, g2, h2);
    }
  });

  BAccum pooled(m);
  std::vector<BValues> per_batch(batches);
  for (uint64_t b = 0; b < batches; ++b) {
    per_batch[b] = assemble(spec, accs[b]);
    pooled.merge(accs[b]);
  }
  BValues full = assemble(spec, pooled);

  auto se_of = [&](auto pick, double mean) {
    double ss = 0.0;
    for (const auto& bv : per_batch) ss += sq(pick(bv) - mean);
    double nb = static_cast<double>(batches);
    return batches > 1 ? std::sqrt(ss / ((nb - 1.0) * nb)) : 0.0;
  };
  // Batch means around the pooled value: the pooled estimate is nonlinear in
  // the moments, so center the spread on the batch-mean average instead.
  auto batch_mean = [&](auto pick) {
    double s = 0.0;
    for (const auto& bv : per_batch) s += pick(bv);
    return s / static_cast<double>(batches);
  };

  PoincareTermsR t;
  t.b1 = full.b1;
  t.b2 = full.b2;
  t.b3 = full.b3;
  t.b4 = full.b4;
  t.b5 = full.b5;
  auto p1 = [](const BValues& v) { return v.b1; };
  auto p2 = [](const BValues& v) { return v.b2; };
  auto p3 = [](const BValues& v) { return v.b3; };
  auto p4 = [](const BValues& v) { return v.b4; };
  auto p5 = [](const BValues& v) { return v.b5; };
  t.se1 = se_of(p1, batch_mean(p1));
  t.se2 = se_of(p2, batch_mean(p2));
  t.se3 = se_of(p3, batch_mean(p3));
  t.se4 = se_of(p4, batch_mean(p4));
  t.se5 = se_of(p5, batch_mean(p5));
  t.exact = false;
  t.meta = {replicas, batches, seed};
  return t;
}

double uniform_bound_rademacher(const PoincareTermsR& t) {
  const double s15 = std::sqrt(15.0), s6 = std::sqrt(6.0), s3 = std::sqrt(3.0);
  return 0.5 * s15 * std::sqrt(t.b1) + 0.5 * s3 * std::sqrt(t.b2) +
         2.0 * (2.0 * std::sqrt(t.b3) + 2.0 * s6 * std::sqrt(t.b4) +
                2.0 * s3 * std::sqrt(t.b5));
}

TwoRunsSpec::TwoRunsSpec(std::vector<double> w) : weights(std::move(w)) {
  if (weights.empty()) throw std::domain_error("TwoRunsSpec: needs at least one weight");
  for (double a : weights)
    if (!std::isfinite(a)) throw std::domain_error("TwoRunsSpec: non-finite weight");
}

double two_runs_eval(const TwoRunsSpec& spec, std::span<const int8_t> bits) {
  if (bits.size() != spec.weights.size() + 1)
    throw std::domain_error("two_runs_eval: bits must cover the weight support plus one");
  if (!(spec.std_dev > 0.0))
    throw std::domain_error("two_runs_eval: std_dev must be > 0");
  double gsum = 0.0;
  for (std::size_t i = 0; i < spec.weights.size(); ++i)
    if (bits[i] > 0 && bits[i + 1] > 0) gsum += spec.weights[i];
  return (gsum - spec.mean) / spec.std_dev;
}

std::pair<double, double> two_runs_moments(const TwoRunsSpec& spec) {
  const std::size_t m = spec.weights.size();
  if (m > 20)
    throw std::runtime_error("two_runs_moments: enumeration needs m <= 20");
  const uint64_t total = uint64_t{1} << (m + 1);
  long double s1 = 0.0L, s2 = 0.0L;
  for (uint64_t cfg = 0; cfg < total; ++cfg) {
    uint64_t adj = cfg & (cfg >> 1);  // bit i set when xi_i = xi_{i+1} = 1
    double gsum = 0.0;
    uint64_t rest = adj & ((uint64_t{1} << m) - 1);
    while (rest) {
      gsum += spec.weights[static_cast<std::size_t>(std::countr_zero(rest))];
      rest &= rest - 1;
    }
    s1 += gsum;
    s2 += static_cast<long double>(gsum) * gsum;
  }
  const long double inv = 1.0L / static_cast<long double>(total);
  double mean = static_cast<double>(s1 * inv);
  double var = static_cast<double>(s2 * inv - (s1 * inv) * (s1 * inv));
  return {mean, var};
}

std::pair<double, double> two_runs_closed_moments(std::span<const double> weights) {
  if (weights.empty())
    throw std::domain_error("two_runs_closed_moments: empty weights");
  double s = 0.0, s2 = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    s += weights[i];
    s2 += sq(weights[i]);
    if (i + 1 < weights.size()) cross += weights[i] * weights[i + 1];
  }
  return {0.25 * s, (3.0 * s2 + 2.0 * cross) / 16.0};
}

double two_runs_norm_bound(std::span<const double> weights) {
  if (weights.empty()) throw std::domain_error("two_runs_norm_bound: empty weights");
  double s2 = 0.0, s4 = 0.0;
  for (double a : weights) {
    s2 += sq(a);
    s4 += sq(sq(a));
  }
  if (!(s2 > 0.0))
    throw std::domain_error("two_runs_norm_bound: all weights are zero");
  return std::sqrt(s4) / s2;
}

TwoRunsSpec standardized_two_runs(std::vector<double> weights) {
  TwoRunsSpec spec(std::move(weights));
  auto [mean, var] = two_runs_closed_moments(spec.weights);
  if (!(var > 0.0))
    throw std::runtime_error("standardized_two_runs: degenerate variance");
  spec.mean = mean;
  spec.std_dev = std::sqrt(var);
  return spec;
}

RademacherSpec two_runs_bits(const TwoRunsSpec& spec) {
  return RademacherSpec(spec.weights.size() + 1, 0.5);
}

BitFunctional two_runs_functional(const TwoRunsSpec& spec) {
  return [spec](std::span<const int8_t> bits) { return two_runs_eval(spec, bits); };
}

SampleBatch simulate_two_runs_batch(const TwoRunsSpec& spec, uint64_t n_samples,
                                    uint64_t seed, uint32_t replicas, int threads,
                                    uint64_t stream_base) {
  if (!(spec.std_dev > 0.0))
    throw std::domain_error("simulate_two_runs_batch: std_dev must be > 0");
  if (n_samples == 0)
    throw std::domain_error("simulate_two_runs_batch: n_samples must be >= 1");
  if (replicas == 0)
    throw std::domain_error("simulate_two_runs_batch: replicas must be >= 1");
  const std::size_t m = spec.weights.size();
  std::vector<double> values(n_samples);
  std::vector<uint64_t> offsets(replicas + 1, 0);
  for (uint32_t r = 0; r < replicas; ++r)
    offsets[r + 1] = offsets[r] + replica_share(n_samples, replicas, r);

  run_replicas(replicas, threads, [&](uint32_t r) {
    RngStream rng(seed, stream_base + r);
    uint64_t word = 0;
    int avail = 0;
    auto draw = [&]() {
      if (avail == 0) {
        word = rng.next_u64();
        avail = 64;
      }
      bool b = word & 1;
      word >>= 1;
      --avail;
      return b;
    };
    for (uint64_t i = offsets[r]; i < offsets[r + 1]; ++i) {
      bool prev = draw();
      double gsum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        bool cur = draw();
        if (prev && cur) gsum += spec.weights[j];
        prev = cur;
      }
      values[i] = (gsum - spec.mean) / spec.std_dev;
    }
  });

  char tag[64];
  std::snprintf(tag, sizeof(tag), "two_runs_m%zu", m);
  return SampleBatch::from_unsorted(std::move(values), tag, seed);
}

ErSpec::ErSpec(uint32_t nn, double pp, PatternGraph pat)
    : n(nn), p(pp), pattern(std::move(pat)) {
  if (n < 2) throw std::domain_error("ErSpec: n must be >= 2");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("ErSpec: p must lie in (0,1)");
  if (pattern.edges.empty()) throw std::domain_error("ErSpec: pattern needs an edge");
}

uint64_t er_subgraph_count(uint32_t n, std::span<const int8_t> edge_bits,
                           const PatternGraph& pattern) {
  const uint64_t slots = uint64_t{n} * (n - 1) / 2;
  if (edge_bits.size() != slots)
    throw std::domain_error("er_subgraph_count: edge_bits must have n(n-1)/2 entries");
  if (pattern.edges.empty())
    throw std::domain_error("er_subgraph_count: pattern needs an edge");

  const bool is_triangle = pattern.order == 3 && pattern.edges.size() == 3;
  if (is_triangle && n <= 64) {
    std::array<uint64_t, 64> rows{};
    std::size_t idx = 0;
    for (uint32_t i = 0; i < n; ++i)
      for (uint32_t j = i + 1; j < n; ++j, ++idx)
        if (edge_bits[idx] > 0) {
          rows[i] |= uint64_t{1} << j;
          rows[j] |= uint64_t{1} << i;
        }
    uint64_t count = 0;
    for (uint32_t i = 0; i < n; ++i) {
      uint64_t above_i = i + 1 >= 64 ? 0 : rows[i] & (~uint64_t{0} << (i + 1));
      while (above_i) {
        uint32_t j = static_cast<uint32_t>(std::countr_zero(above_i));
        above_i &= above_i - 1;
        uint64_t mask = j + 1 >= 64 ? 0 : ~uint64_t{0} << (j + 1);
        count += static_cast<uint64_t>(std::popcount(rows[i] & rows[j] & mask));
      }
    }
    return count;
  }

  HostGraph host;
  host.nbr.resize(n);
  std::size_t idx = 0;
  for (uint32_t i = 0; i < n; ++i)
    for (uint32_t j = i + 1; j < n; ++j, ++idx)
      if (edge_bits[idx] > 0) host.add_edge(i, j);
  host.finish();
  return count_copies(host, pattern);
}

double psi(const PatternGraph& pattern, uint32_t n, double p) {
  if (pattern.edges.empty()) throw std::domain_error("psi: pattern needs an edge");
  if (n == 0) throw std::domain_error("psi: n must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("psi: p must lie in (0,1)");
  const std::size_t ecount = pattern.edges.size();
  if (ecount > 20) throw std::runtime_error("psi: pattern has too many edges (> 20)");
  double best = std::numeric_limits<double>::infinity();
  for (uint32_t mask = 1; mask < (uint32_t{1} << ecount); ++mask) {
    uint32_t vmask = 0;
    for (std::size_t e = 0; e < ecount; ++e)
      if ((mask >> e) & 1) {
        vmask |= uint32_t{1} << pattern.edges[e].first;
        vmask |= uint32_t{1} << pattern.edges[e].second;
      }
    double cand = std::pow(static_cast<double>(n), std::popcount(vmask)) *
                  std::pow(p, std::popcount(mask));
    best = std::fmin(best, cand);
  }
  return best;
}

double er_bound_scale(uint32_t n, double p, const PatternGraph& pattern) {
  double q = 1.0 - p;
  return 1.0 / std::sqrt(q * psi(pattern, n, p));
}

std::pair<double, double> er_exact_moments(const ErSpec& spec) {
  if (spec.n > 6)
    throw std::domain_error(
        "er_exact_moments: exact enumeration is limited to n <= 6; use the pilot");
  const uint64_t slots = spec.edge_slots();
  const uint64_t total = uint64_t{1} << slots;
  std::vector<int8_t> bits(slots);
  long double s1 = 0.0L, s2 = 0.0L;
  for (uint64_t cfg = 0; cfg < total; ++cfg) {
    double w = 1.0;
    for (uint64_t e = 0; e < slots; ++e) {
      bool up = (cfg >> e) & 1;
      bits[e] = up ? int8_t{1} : int8_t{-1};
      w *= up ? spec.p : 1.0 - spec.p;
    }
    double c = static_cast<double>(er_subgraph_count(spec.n, bits, spec.pattern));
    s1 += w * c;
    s2 += w * c * c;
  }
  double mean = static_cast<double>(s1);
  double var = static_cast<double>(s2) - mean * mean;
  return {mean, var};
}

ErSpec with_exact_standardization(ErSpec spec) {
  auto [mean, var] = er_exact_moments(spec);
  if (!(var > 0.0))
    throw std::runtime_error("with_exact_standardization: degenerate variance");
  spec.mean = mean;
  spec.std_dev = std::sqrt(var);
  return spec;
}

namespace {

std::vector<double> er_raw_counts(const ErSpec& spec, uint64_t n_draws, uint64_t seed,
                                  uint32_t replicas, int threads, uint64_t stream_base) {
  if (n_draws == 0) throw std::domain_error("er sampling: needs >= 1 sample");
  if (replicas == 0) throw std::domain_error("er sampling: replicas must be >= 1");
  const uint64_t slots = spec.edge_slots();
  std::vector<double> counts(n_draws);
  std::vector<uint64_t> offsets(replicas + 1, 0);
  for (uint32_t r = 0; r < replicas; ++r)
    offsets[r + 1] = offsets[r] + replica_share(n_draws, replicas, r);
  run_replicas(replicas, threads, [&](uint32_t r) {
    RngStream rng(seed, stream_base + r);
    std::vector<int8_t> bits(slots);
    for (uint64_t i = offsets[r]; i < offsets[r + 1]; ++i) {
      for (uint64_t e = 0; e < slots; ++e) bits[e] = rng.next_sign(spec.p);
      counts[i] = static_cast<double>(er_subgraph_count(spec.n, bits, spec.pattern));
    }
  });
  return counts;
}

}  // namespace

ErSpec with_pilot_standardization(ErSpec spec, uint64_t n_pilot, uint64_t seed,
                                  uint32_t replicas, int threads) {
  if (n_pilot < 100000)
    throw std::domain_error("with_pilot_standardization: pilot needs >= 1e5 replicas");
  std::vector<double> counts =
      er_raw_counts(spec, n_pilot, seed, replicas, threads, kStreamBasePilot);
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(n_pilot);
  double ss = 0.0;
  for (double c : counts) ss += sq(c - mean);
  double var = ss / static_cast<double>(n_pilot - 1);
  if (!(var > 0.0))
    throw std::runtime_error("with_pilot_standardization: degenerate pilot variance");
  spec.mean = mean;
  spec.std_dev = std::sqrt(var);
  return spec;
}

RademacherSpec er_bits(const ErSpec& spec) {
  return RademacherSpec(spec.edge_slots(), spec.p);
}

BitFunctional er_functional(const ErSpec& spec) {
  if (!(spec.std_dev > 0.0))
    throw std::domain_error("er_functional: std_dev must be > 0");
  return [spec](std::span<const int8_t> bits) {
    double c = static_cast<double>(er_subgraph_count(spec.n, bits, spec.pattern));
    return (c - spec.mean) / spec.std_dev;
  };
}

SampleBatch simulate_er_batch(const ErSpec& spec, uint64_t n_samples, uint64_t seed,
                              uint32_t replicas, int threads, uint64_t stream_base) {
  if (!(spec.std_dev > 0.0))
    throw std::domain_error("simulate_er_batch: std_dev must be > 0");
  std::vector<double> values =
      er_raw_counts(spec, n_samples, seed, replicas, threads, stream_base);
  for (double& v : values) v = (v - spec.mean) / spec.std_dev;
  char tag[96];
  std::snprintf(tag, sizeof(tag), "er_%s_n%u_p%.6g", spec.pattern.name.c_str(), spec.n,
                spec.p);
  return SampleBatch::from_unsorted(std::move(values), tag, seed);
}

std::vector<LawAtom> enumerate_distribution(const RademacherSpec& spec,
                                            const BitFunctional& f) {
  check_spec(spec);
  const std::size_t m = spec.support();
  if (m > kEnumerateLimit) {
    char msg[96];
    std::snprintf(msg, sizeof(msg),
                  "enumerate_distribution: needs support <= %llu, got %zu",
                  static_cast<unsigned long long>(kEnumerateLimit), m);
    throw std::runtime_error(msg);
  }
  const uint64_t total = uint64_t{1} << m;
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(total);
  std::vector<int8_t> bits(m);
  for (uint64_t cfg = 0; cfg < total; ++cfg) {
    double w = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
      bool up = (cfg >> k) & 1;
      bits[k] = up ? int8_t{1} : int8_t{-1};
      w *= up ? spec.probs[k] : 1.0 - spec.probs[k];
    }
    pairs.emplace_back(eval_config(f, bits), w);
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<LawAtom> law;
  double psum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    double prob = 0.0;
    while (j < pairs.size() && pairs[j].first == pairs[i].first) prob += pairs[j++].second;
    law.push_back({pairs[i].first, prob});
    double t = psum + prob;
    comp += std::fabs(psum) >= std::fabs(prob) ? (psum - t) + prob : (prob - t) + psum;
    psum = t;
    i = j;
  }
  if (std::fabs(psum + comp - 1.0) > 1e-12)
    throw std::logic_error("enumerate_distribution: probabilities do not sum to 1");
  return law;
}

namespace {

std::pair<std::vector<double>, std::vector<double>> law_cdf(std::span<const LawAtom> law) {
  if (law.empty()) throw std::domain_error("law: empty");
  std::vector<double> values(law.size()), cum(law.size());
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    values[i] = law[i].value;
    double t = s + law[i].prob;
    c += std::fabs(s) >= std::fabs(law[i].prob) ? (s - t) + law[i].prob
                                                : (law[i].prob - t) + s;
    s = t;
    cum[i] = s + c;
  }
  return {std::move(values), std::move(cum)};
}

}  // namespace

double exact_kolmogorov(std::span<const LawAtom> law) {
  auto [values, cum] = law_cdf(law);
  return ks_atoms(values, cum);
}

WeightedKs exact_weighted_kolmogorov(std::span<const LawAtom> law, int k) {
  auto [values, cum] = law_cdf(law);
  return weighted_ks_atoms(values, cum, k);
}

double law_moment(std::span<const LawAtom> law, int order) {
  if (law.empty()) throw std::domain_error("law_moment: empty law");
  if (order < 1) throw std::domain_error("law_moment: requires order >= 1");
  double s = 0.0, c = 0.0;
  for (const LawAtom& a : law) {
    double p = a.prob;
    for (int i = 0; i < order; ++i) p *= a.value;
    double t = s + p;
    c += std::fabs(s) >= std::fabs(p) ? (s - t) + p : (p - t) + s;
    s = t;
  }
  return s + c;
}

void write_law_csv(std::span<const LawAtom> law, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_law_csv: cannot open " + path);
  out << "value,probability\n";
  char buf[80];
  for (const LawAtom& a : law) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", a.value, a.prob);
    out << buf;
  }
  if (!out.good()) throw std::runtime_error("write_law_csv: write failed for " + path);
}

}  // namespace nuberry
