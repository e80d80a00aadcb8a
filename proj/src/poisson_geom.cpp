#include "nuberry/poisson_geom.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "nuberry/parallel.hpp"

namespace nuberry {

namespace {

constexpr double kPppGuard = 1e8;
constexpr uint32_t kMaxDim = 8;

double sq(double x) { return x * x; }

double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += sq(a[d] - b[d]);
  return s;
}

// Grid buckets with cell size = radius: all points within `radius` of a
// query live in the 3^d cells around the query's cell.
class NeighborGrid {
 public:
  NeighborGrid(const PointConfig& pts, double radius)
      : dim_(pts.dim), cell_(radius) {
    const uint64_t n = pts.size();
    if (n == 0) return;
    origin_.fill(0.0);
    for (uint32_t d = 0; d < dim_; ++d) origin_[d] = pts.coords[d];
    for (uint64_t i = 1; i < n; ++i)
      for (uint32_t d = 0; d < dim_; ++d)
        origin_[d] = std::fmin(origin_[d], pts.coords[i * dim_ + d]);
    buckets_.reserve(n);
    for (uint64_t i = 0; i < n; ++i)
      buckets_[key_of(pts.point(i))].push_back(static_cast<uint32_t>(i));
  }

  template <class Fn>
  void for_candidates(std::span<const double> x, Fn&& fn) const {
    if (buckets_.empty()) return;
    std::array<int32_t, kMaxDim> base = key_of(x);
    std::array<int32_t, kMaxDim> probe{};
    uint32_t combos = 1;
    for (uint32_t d = 0; d < dim_; ++d) combos *= 3;
    for (uint32_t c = 0; c < combos; ++c) {
      uint32_t rem = c;
      for (uint32_t d = 0; d < dim_; ++d) {
        probe[d] = base[d] + static_cast<int32_t>(rem % 3) - 1;
        rem /= 3;
      }
      auto it = buckets_.find(probe);
      if (it == buckets_.end()) continue;
      for (uint32_t idx : it->second) fn(idx);
    }
  }

 private:
  using Key = std::array<int32_t, kMaxDim>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      uint64_t h = 0x9E3779B97F4A7C15ull;
      for (int32_t c : k) {
        h ^= static_cast<uint64_t>(static_cast<uint32_t>(c)) + 0x9E3779B97F4A7C15ull +
             (h << 6) + (h >> 2);
        h *= 0xBF58476D1CE4E5B9ull;
      }
      return static_cast<std::size_t>(h ^ (h >> 31));
    }
  };

  Key key_of(std::span<const double> x) const {
    Key k{};
    for (uint32_t d = 0; d < dim_; ++d)
      k[d] = static_cast<int32_t>(std::floor((x[d] - origin_[d]) / cell_));
    return k;
  }

  uint32_t dim_;
  double cell_;
  std::array<double, kMaxDim> origin_{};
  std::unordered_map<Key, std::vector<uint32_t>, KeyHash> buckets_;
};

void check_point(const Window& w, std::span<const double> x, const char* who) {
  if (x.size() != w.dim) throw std::domain_error(std::string(who) + ": point dimension mismatch");
  if (!w.contains(x)) throw std::domain_error(std::string(who) + ": point outside the window");
}

}  // namespace

Window::Window(std::vector<double> lo, std::vector<double> hi)
    : dim(static_cast<uint32_t>(lo.size())), lower(std::move(lo)), upper(std::move(hi)) {
  if (dim == 0 || dim > kMaxDim)
    throw std::domain_error("Window: dimension must be in [1, 8]");
  if (upper.size() != dim) throw std::domain_error("Window: lower/upper size mismatch");
  for (uint32_t d = 0; d < dim; ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d]))
      throw std::domain_error("Window: requires lower < upper componentwise");
  }
}

double Window::volume() const {
  double v = 1.0;
  for (uint32_t d = 0; d < dim; ++d) v *= upper[d] - lower[d];
  return v;
}

bool Window::contains(std::span<const double> x) const {
  if (x.size() != dim) return false;
  for (uint32_t d = 0; d < dim; ++d)
    if (!(x[d] >= lower[d] && x[d] <= upper[d])) return false;
  return true;
}

PointConfig sample_ppp(const Window& window, double intensity, RngStream& rng) {
  if (!(intensity > 0.0) || !std::isfinite(intensity))
    throw std::domain_error("sample_ppp: intensity must be finite and > 0");
  double mu = intensity * window.volume();
  if (!(mu < kPppGuard)) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "sample_ppp: intensity * volume = %.6g exceeds the %.0e resource guard",
                  mu, kPppGuard);
    throw std::runtime_error(msg);
  }
  uint64_t n = rng.next_poisson(mu);
  PointConfig pts;
  pts.dim = window.dim;
  pts.coords.reserve(n * window.dim);
  for (uint64_t i = 0; i < n; ++i)
    for (uint32_t d = 0; d < window.dim; ++d)
      pts.coords.push_back(rng.next_uniform(window.lower[d], window.upper[d]));
  return pts;
}

HostGraph build_geo_graph(const PointConfig& points, double radius) {
  if (!(radius > 0.0)) throw std::domain_error("build_geo_graph: radius must be > 0");
  const uint64_t n = points.size();
  HostGraph host;
  host.nbr.resize(n);
  NeighborGrid grid(points, radius);
  const double r2 = radius * radius;
  for (uint64_t i = 0; i < n; ++i) {
    std::span<const double> pi = points.point(i);
    grid.for_candidates(pi, [&](uint32_t j) {
      if (j <= i) return;
      double d2 = dist2(pi, points.point(j));
      if (d2 > 0.0 && d2 <= r2) host.add_edge(static_cast<uint32_t>(i), j);
    });
  }
  host.finish();
  return host;
}

uint64_t count_subgraphs(const PointConfig& points, double radius,
                         const PatternGraph& pattern) {
  HostGraph host = build_geo_graph(points, radius);
  return count_copies(host, pattern);
}

RggSpec::RggSpec(Window w, double t, double r, PatternGraph p, double v)
    : window(std::move(w)), intensity(t), radius(r), pattern(std::move(p)), v_const(v) {
  if (!(intensity > 0.0)) throw std::domain_error("RggSpec: intensity must be > 0");
  if (!(radius > 0.0)) throw std::domain_error("RggSpec: radius must be > 0");
  if (pattern.order < 2) throw std::domain_error("RggSpec: pattern needs >= 2 vertices");
  if (!(v_const > 0.0)) throw std::domain_error("RggSpec: v_const must be > 0");
}

namespace {

// Incremental gradient evaluation: the base geometric graph is built once;
// a virtual vertex (or two) is spliced into the adjacency lists, the pinned
// copies are counted, and the splice is rolled back.  Appending the largest
// vertex index keeps every list sorted.
class SubgraphView final : public GradientView {
 public:
  SubgraphView(const RggSpec& spec, const PointConfig& pts)
      : spec_(spec),
        pts_(pts),
        grid_(pts, spec.radius),
        host_(build_geo_graph(pts, spec.radius)),
        base_n_(static_cast<uint32_t>(pts.size())) {
    host_.nbr.reserve(base_n_ + 2);
  }

  double add_one(std::span<const double> x) override {
    check_point(spec_.window, x, "add_one_cost");
    const uint32_t xid = base_n_;
    host_.nbr.push_back(in_range_of(x));
    for (uint32_t v : host_.nbr[xid]) host_.nbr[v].push_back(xid);
    uint64_t copies = count_copies_containing(host_, spec_.pattern, xid);
    for (uint32_t v : host_.nbr[xid]) host_.nbr[v].pop_back();
    host_.nbr.pop_back();
    return static_cast<double>(copies) / spec_.std_dev;
  }

  double second(std::span<const double> x, std::span<const double> y) override {
    check_point(spec_.window, x, "second_diff");
    check_point(spec_.window, y, "second_diff");
    const uint32_t xid = base_n_, yid = base_n_ + 1;
    host_.nbr.push_back(in_range_of(x));
    host_.nbr.push_back(in_range_of(y));
    double dxy = dist2(x, y);
    if (dxy > 0.0 && dxy <= spec_.radius * spec_.radius) {
      host_.nbr[xid].push_back(yid);
      host_.nbr[yid].push_back(xid);  // stays sorted: base ids < xid < yid
    }
    for (uint32_t v : host_.nbr[xid])
      if (v < base_n_) host_.nbr[v].push_back(xid);
    for (uint32_t v : host_.nbr[yid])
      if (v < base_n_) host_.nbr[v].push_back(yid);
    uint64_t copies = count_copies_containing_pair(host_, spec_.pattern, xid, yid);
    for (uint32_t v : host_.nbr[yid])
      if (v < base_n_) host_.nbr[v].pop_back();
    for (uint32_t v : host_.nbr[xid])
      if (v < base_n_) host_.nbr[v].pop_back();
    host_.nbr.pop_back();
    host_.nbr.pop_back();
    return static_cast<double>(copies) / spec_.std_dev;
  }

 private:
  std::vector<uint32_t> in_range_of(std::span<const double> x) const {
    std::vector<uint32_t> out;
    const double r2 = spec_.radius * spec_.radius;
    grid_.for_candidates(x, [&](uint32_t j) {
      double d2 = dist2(x, pts_.point(j));
      if (d2 > 0.0 && d2 <= r2) out.push_back(j);
    });
    std::sort(out.begin(), out.end());
    return out;
  }

  const RggSpec& spec_;
  const PointConfig& pts_;
  NeighborGrid grid_;
  HostGraph host_;
  uint32_t base_n_;
};

class PointCountView final : public GradientView {
 public:
  explicit PointCountView(double std_dev) : inv_(1.0 / std_dev) {}
  double add_one(std::span<const double>) override { return inv_; }
  double second(std::span<const double>, std::span<const double>) override { return 0.0; }

 private:
  double inv_;
};

void check_std_dev(double std_dev, const char* who) {
  if (!(std_dev > 0.0) || !std::isfinite(std_dev))
    throw std::domain_error(std::string(who) + ": std_dev must be finite and > 0");
}

}  // namespace

SubgraphFunctional::SubgraphFunctional(const RggSpec& spec) : spec_(spec) {
  check_std_dev(spec.std_dev, "SubgraphFunctional");
}

std::unique_ptr<GradientView> SubgraphFunctional::bind(const PointConfig& points) const {
  return std::make_unique<SubgraphView>(spec_, points);
}

PointCountFunctional::PointCountFunctional(double std_dev) : std_dev_(std_dev) {
  check_std_dev(std_dev, "PointCountFunctional");
}

std::unique_ptr<GradientView> PointCountFunctional::bind(const PointConfig&) const {
  return std::make_unique<PointCountView>(std_dev_);
}

double add_one_cost(const RggSpec& spec, const PointConfig& points,
                    std::span<const double> x) {
  check_std_dev(spec.std_dev, "add_one_cost");
  SubgraphView view(spec, points);
  return view.add_one(x);
}

double second_diff(const RggSpec& spec, const PointConfig& points,
                   std::span<const double> x, std::span<const double> y) {
  check_std_dev(spec.std_dev, "second_diff");
  SubgraphView view(spec, points);
  return view.second(x, y);
}

namespace {

struct Accum {
  double mean = 0.0, se = 0.0;
};

// Mean and standard error (sd / sqrt(n)) over slot k of the value table.
Accum reduce_slot(const std::vector<std::array<double, 7>>& vals, int k) {
  const std::size_t n = vals.size();
  double s = 0.0;
  for (const auto& v : vals) s += v[k];
  double mean = s / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& v : vals) ss += sq(v[k] - mean);
  Accum a;
  a.mean = mean;
  a.se = std::sqrt(ss / (static_cast<double>(n - 1) * static_cast<double>(n)));
  return a;
}

}  // namespace

PoincareTermsP estimate_poincare_terms(const PoissonFunctional& functional,
                                       const Window& window, double intensity,
                                       uint64_t outer, uint64_t inner, uint64_t seed,
                                       int threads) {
  if (outer < 2 || inner < 2)
    throw std::domain_error("estimate_poincare_terms: outer and inner must be >= 2");
  if (!(intensity > 0.0))
    throw std::domain_error("estimate_poincare_terms: intensity must be > 0");
  const double tv = intensity * window.volume();
  const double tv2 = tv * tv, tv3 = tv * tv * tv;
  const uint32_t dim = window.dim;

  std::vector<std::array<double, 7>> vals(outer);  // v1..v5, jackknife 1 and 4

  run_replicas(static_cast<uint32_t>(outer), threads, [&](uint32_t rep) {
    RngStream rng(seed, kStreamBaseTuples + rep);
    std::array<double, 3 * kMaxDim> xs{};
    for (uint32_t p = 0; p < 3; ++p)
      for (uint32_t d = 0; d < dim; ++d)
        xs[p * dim + d] = rng.next_uniform(window.lower[d], window.upper[d]);
    std::span<const double> x1(xs.data(), dim);
    std::span<const double> x2(xs.data() + dim, dim);
    std::span<const double> x3(xs.data() + 2 * dim, dim);

    std::vector<double> u1(inner), u2(inner), u3(inner), u4(inner);
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (uint64_t i = 0; i < inner; ++i) {
      PointConfig pts = sample_ppp(window, intensity, rng);
      auto view = functional.bind(pts);
      double d1 = view->add_one(x1);
      double d2 = view->add_one(x2);
      double dd13 = view->second(x1, x3);
      double dd23 = view->second(x2, x3);
      double dd12 = view->second(x1, x2);
      u1[i] = sq(d1) * sq(d2);
      u2[i] = sq(dd13) * sq(dd23);
      u3[i] = sq(sq(d1));
      u4[i] = sq(sq(dd12));
      s1 += u1[i];
      s2 += u2[i];
      s3 += u3[i];
      s4 += u4[i];
    }
    const double ninner = static_cast<double>(inner);
    double m1 = s1 / ninner, m2 = s2 / ninner, m3 = s3 / ninner, m4 = s4 / ninner;
    double v1 = tv3 * std::sqrt(m1) * std::sqrt(m2);
    double v4 = 6.0 * tv2 * std::sqrt(m3) * std::sqrt(m4);

    // Leave-one-out jackknife of the square-root plug-ins in v1 and v4.
    double j1 = 0, j4 = 0;
    for (uint64_t i = 0; i < inner; ++i) {
      double m1i = (s1 - u1[i]) / (ninner - 1.0), m2i = (s2 - u2[i]) / (ninner - 1.0);
      double m3i = (s3 - u3[i]) / (ninner - 1.0), m4i = (s4 - u4[i]) / (ninner - 1.0);
      j1 += std::sqrt(m1i) * std::sqrt(m2i);
      j4 += std::sqrt(m3i) * std::sqrt(m4i);
    }
    j1 = (ninner - 1.0) * (tv3 * j1 / ninner - v1);
    j4 = (ninner - 1.0) * (6.0 * tv2 * j4 / ninner - v4);

    vals[rep] = {v1, tv3 * m2, tv * m3, v4, 3.0 * tv2 * m4, j1, j4};
  });

  PoincareTermsP t;
  Accum a1 = reduce_slot(vals, 0), a2 = reduce_slot(vals, 1), a3 = reduce_slot(vals, 2);
  Accum a4 = reduce_slot(vals, 3), a5 = reduce_slot(vals, 4);
  t.a1 = a1.mean;
  t.a2 = a2.mean;
  t.a3 = a3.mean;
  t.a4 = a4.mean;
  t.a5 = a5.mean;
  t.se1 = a1.se;
  t.se2 = a2.se;
  t.se3 = a3.se;
  t.se4 = a4.se;
  t.se5 = a5.se;
  t.bias_a1 = reduce_slot(vals, 5).mean;
  t.bias_a4 = reduce_slot(vals, 6).mean;
  t.meta = {outer, inner, 3 * outer, seed};
  return t;
}

PoincareTermsP estimate_poincare_terms(const RggSpec& spec, uint64_t outer,
                                       uint64_t inner, uint64_t seed, int threads) {
  SubgraphFunctional functional(spec);
  return estimate_poincare_terms(functional, spec.window, spec.intensity, outer, inner,
                                 seed, threads);
}

double uniform_bound_poisson(const PoincareTermsP& t) {
  return 2.0 * std::sqrt(t.a1) + std::sqrt(t.a2) +
         2.0 * (std::sqrt(t.a3) + std::sqrt(t.a4 + t.a5));
}

double uniform_bound_poisson_pushed(const PoincareTermsP& t, double sigmas) {
  if (!(sigmas >= 0.0))
    throw std::domain_error("uniform_bound_poisson_pushed: sigmas must be >= 0");
  return 2.0 * std::sqrt(t.a1 + sigmas * t.se1) + std::sqrt(t.a2 + sigmas * t.se2) +
         2.0 * (std::sqrt(t.a3 + sigmas * t.se3) +
                std::sqrt(t.a4 + sigmas * t.se4 + t.a5 + sigmas * t.se5));
}

double unit_ball_volume(uint32_t dim) {
  if (dim == 0) throw std::domain_error("unit_ball_volume: dim must be >= 1");
  double half = 0.5 * static_cast<double>(dim);
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

double variance_lower_bound(uint32_t q, double v, double intensity, double radius,
                            uint32_t dim) {
  if (q == 0) throw std::domain_error("variance_lower_bound: q must be >= 1");
  if (!(v > 0.0) || !(intensity > 0.0) || !(radius >= 0.0))
    throw std::domain_error("variance_lower_bound: requires v, t > 0 and r >= 0");
  double krd = unit_ball_volume(dim) * std::pow(radius, dim);
  double qd = static_cast<double>(q);
  return v * std::fmax(std::pow(intensity, qd - 1.0) * std::pow(krd, 2.0 * qd - 2.0),
                       std::pow(intensity, qd) * std::pow(krd, qd - 1.0));
}

double concentration_c_rgg(uint32_t q, double v, double intensity, double radius,
                           uint32_t dim, double volume) {
  if (q == 0) throw std::domain_error("concentration_c_rgg: q must be >= 1");
  if (!(v > 0.0) || !(intensity > 0.0) || !(radius > 0.0) || !(volume > 0.0))
    throw std::domain_error("concentration_c_rgg: requires v, t, r, volume > 0");
  double krd = unit_ball_volume(dim) * std::pow(radius, dim);
  double qd = static_cast<double>(q);
  double top = std::sqrt(v * intensity *
                         std::pow(std::fmin(1.0, intensity * krd), qd - 1.0));
  return top / (std::pow(qd, 3.0 * qd) * std::fmax(1.0, volume / v));
}

double poisson_tail_bound(double z, int q, double c) {
  if (!(z > 0.0)) throw std::domain_error("poisson_tail_bound: requires z > 0");
  if (q < 1) throw std::domain_error("poisson_tail_bound: requires q >= 1");
  if (!(c > 0.0)) throw std::domain_error("poisson_tail_bound: requires c > 0");
  double first = z * z / std::pow(2.0, static_cast<double>(q));
  double second = std::pow(c * z, 1.0 / static_cast<double>(q));
  return 2.0 * std::exp(-0.25 * std::fmin(first, second));
}

namespace {

std::vector<double> raw_counts(const RggSpec& spec, uint64_t n, uint64_t seed,
                               uint32_t replicas, int threads, uint64_t stream_base) {
  if (n == 0) throw std::domain_error("rgg sampling: needs >= 1 sample");
  if (replicas == 0) throw std::domain_error("rgg sampling: replicas must be >= 1");
  std::vector<double> counts(n);
  std::vector<uint64_t> offsets(replicas + 1, 0);
  for (uint32_t r = 0; r < replicas; ++r)
    offsets[r + 1] = offsets[r] + replica_share(n, replicas, r);
  run_replicas(replicas, threads, [&](uint32_t r) {
    RngStream rng(seed, stream_base + r);
    for (uint64_t i = offsets[r]; i < offsets[r + 1]; ++i) {
      PointConfig pts = sample_ppp(spec.window, spec.intensity, rng);
      counts[i] =
          static_cast<double>(count_subgraphs(pts, spec.radius, spec.pattern));
    }
  });
  return counts;
}

}  // namespace

std::pair<double, double> rgg_pilot_moments(const RggSpec& spec, uint64_t n_pilot,
                                            uint64_t seed, uint32_t replicas,
                                            int threads, uint64_t stream_base) {
  if (n_pilot < 2) throw std::domain_error("rgg_pilot_moments: needs >= 2 samples");
  std::vector<double> counts =
      raw_counts(spec, n_pilot, seed, replicas, threads, stream_base);
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(n_pilot);
  double ss = 0.0;
  for (double c : counts) ss += sq(c - mean);
  return {mean, ss / static_cast<double>(n_pilot - 1)};
}

RggSpec with_pilot_standardization(RggSpec spec, uint64_t n_pilot, uint64_t seed,
                                   uint32_t replicas, int threads) {
  if (n_pilot < 100000)
    throw std::domain_error("with_pilot_standardization: pilot needs >= 1e5 replicas");
  auto [mean, var] = rgg_pilot_moments(spec, n_pilot, seed, replicas, threads);
  if (!(var > 0.0))
    throw std::runtime_error("with_pilot_standardization: degenerate pilot variance");
  spec.std_mean = mean;
  spec.std_dev = std::sqrt(var);
  return spec;
}

SampleBatch simulate_rgg_batch(const RggSpec& spec, uint64_t n_samples, uint64_t seed,
                               uint32_t replicas, int threads, uint64_t stream_base) {
  check_std_dev(spec.std_dev, "simulate_rgg_batch");
  std::vector<double> values =
      raw_counts(spec, n_samples, seed, replicas, threads, stream_base);
  for (double& v : values) v = (v - spec.std_mean) / spec.std_dev;
  char tag[96];
  std::snprintf(tag, sizeof(tag), "rgg_%s_t%.6g_r%.6g_d%u", spec.pattern.name.c_str(),
                spec.intensity, spec.radius, spec.window.dim);
  return SampleBatch::from_unsorted(std::move(values), tag, seed);
}

void write_points_csv(const PointConfig& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_points_csv: cannot open " + path);
  char buf[32];
  for (uint64_t i = 0; i < points.size(); ++i) {
    for (uint32_t d = 0; d < points.dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", points.point(i)[d]);
      out << (d ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out.good()) throw std::runtime_error("write_points_csv: write failed for " + path);
}

}  // namespace nuberry
