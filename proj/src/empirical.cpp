#include "nuberry/empirical.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "nuberry/stein.hpp"

namespace nuberry {

namespace {

using stein::std_normal_cdf;

void require_nonempty(const SampleBatch& b, const char* what) {
  if (b.values.empty()) throw std::domain_error(std::string(what) + ": empty batch");
}

double weight(double z, int k) {
  double w = 1.0 + std::fabs(z);
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= w;
  return r;
}

// Golden-section maximum of g on [lo, hi]; g must be unimodal there.
template <class G>
std::pair<double, double> golden_max(G&& g, double lo, double hi) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * (1.0 + std::fabs(a)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = g(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = g(x1);
    }
  }
  double mid = 0.5 * (a + b);
  return {g(mid), mid};
}

// Neumaier-compensated sum.
double comp_sum(const std::vector<double>& terms) {
  double s = 0.0, c = 0.0;
  for (double x : terms) {
    double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  return s + c;
}

uint64_t to_le64(uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap64(v);
}

}  // namespace

SampleBatch SampleBatch::from_unsorted(std::vector<double> v, std::string tag, uint64_t seed) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::domain_error("SampleBatch: non-finite sample value");
  std::sort(v.begin(), v.end());
  SampleBatch b;
  b.values = std::move(v);
  b.model_tag = std::move(tag);
  b.seed = seed;
  return b;
}

double ks_distance(const SampleBatch& batch) {
  require_nonempty(batch, "ks_distance");
  const auto& x = batch.values;
  const double n = static_cast<double>(x.size());
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double phi = std_normal_cdf(x[i]);
    double hi = (static_cast<double>(i) + 1.0) / n - phi;
    double lo = phi - static_cast<double>(i) / n;
    best = std::max({best, hi, lo});
  }
  return best;
}

namespace {

// Shared core over a step cdf given by strictly increasing atoms and the
// cumulative probability after each atom.
WeightedKs wks_core(std::span<const double> values, std::span<const double> cum_after,
                    int k, int grid_points) {
  double best = 0.0, bestz = values.front();
  auto consider = [&](double value, double z) {
    if (value > best) {
      best = value;
      bestz = z;
    }
  };

  // Both one-sided limits at every atom.  For k = 0 this is exactly the
  // order-statistics formula for the uniform distance.
  for (std::size_t i = 0; i < values.size(); ++i) {
    double phi = std_normal_cdf(values[i]);
    double wt = weight(values[i], k);
    double before = i == 0 ? 0.0 : cum_after[i - 1];
    consider(wt * std::fabs(phi - before), values[i]);
    consider(wt * std::fabs(cum_after[i] - phi), values[i]);
  }

  if (k >= 1) {
    // Interior grid.  The step cdf is constant between atoms, so this only
    // refines the weighted objective between jump points.
    double lo = values.front() - 1.0, hi = values.back() + 1.0;
    double step = (hi - lo) / (grid_points - 1);
    for (int g = 0; g < grid_points; ++g) {
      double z = lo + g * step;
      auto it = std::upper_bound(values.begin(), values.end(), z);
      double fhat = it == values.begin() ? 0.0 : cum_after[it - values.begin() - 1];
      consider(weight(z, k) * std::fabs(fhat - std_normal_cdf(z)), z);
    }
    // Beyond the atom range the discrepancy is the pure normal tail.
    // (1+t)^k (1-Phi(t)) is log-concave on t >= 0, hence unimodal.
    auto tail = [&](double t) { return weight(t, k) * stein::std_normal_sf(t); };
    double t0 = std::max(values.back(), 0.0);
    auto [tv, tz] = golden_max(tail, t0, t0 + 40.0);
    consider(tv, tz);
    double s0 = std::max(-values.front(), 0.0);
    auto [lv, lz] = golden_max(tail, s0, s0 + 40.0);
    consider(lv, -lz);
  }
  return {best, bestz};
}

void check_atoms(std::span<const double> values, std::span<const double> cum_after,
                 const char* who) {
  if (values.empty() || values.size() != cum_after.size())
    throw std::domain_error(std::string(who) + ": needs matching nonempty atom spans");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0 && !(values[i] > values[i - 1]))
      throw std::domain_error(std::string(who) + ": atom values must strictly increase");
    double before = i == 0 ? 0.0 : cum_after[i - 1];
    if (!(cum_after[i] >= before) || !(cum_after[i] <= 1.0 + 1e-12))
      throw std::domain_error(std::string(who) + ": invalid cumulative probabilities");
  }
  if (std::fabs(cum_after.back() - 1.0) > 1e-12)
    throw std::domain_error(std::string(who) + ": cumulative probabilities must end at 1");
}

}  // namespace

WeightedKs weighted_ks(const SampleBatch& batch, int k, int grid_points) {
  require_nonempty(batch, "weighted_ks");
  if (k < 0) throw std::domain_error("weighted_ks: requires k >= 0");
  if (grid_points < 2) throw std::domain_error("weighted_ks: grid_points must be >= 2");
  const auto& x = batch.values;
  const double n = static_cast<double>(x.size());

  std::vector<double> atoms, cum;
  atoms.reserve(x.size());
  cum.reserve(x.size());
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    atoms.push_back(x[i]);
    cum.push_back(static_cast<double>(j) / n);
    i = j;
  }
  cum.back() = 1.0;
  return wks_core(atoms, cum, k, grid_points);
}

double ks_atoms(std::span<const double> values, std::span<const double> cum_after) {
  check_atoms(values, cum_after, "ks_atoms");
  double best = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double phi = std_normal_cdf(values[i]);
    double before = i == 0 ? 0.0 : cum_after[i - 1];
    best = std::max({best, std::fabs(phi - before), std::fabs(cum_after[i] - phi)});
  }
  return best;
}

WeightedKs weighted_ks_atoms(std::span<const double> values,
                             std::span<const double> cum_after, int k,
                             int grid_points) {
  check_atoms(values, cum_after, "weighted_ks_atoms");
  if (k < 0) throw std::domain_error("weighted_ks_atoms: requires k >= 0");
  if (grid_points < 2)
    throw std::domain_error("weighted_ks_atoms: grid_points must be >= 2");
  return wks_core(values, cum_after, k, grid_points);
}

double tail_prob(const SampleBatch& batch, double z, bool two_sided) {
  require_nonempty(batch, "tail_prob");
  if (!std::isfinite(z)) throw std::domain_error("tail_prob: non-finite z");
  const auto& x = batch.values;
  std::size_t count;
  if (two_sided) {
    // |value| >= z: left block (-inf, -z] plus right block [z, inf).
    auto left = std::upper_bound(x.begin(), x.end(), -z) - x.begin();
    auto right = x.end() - std::lower_bound(x.begin(), x.end(), z);
    count = static_cast<std::size_t>(left) + static_cast<std::size_t>(right);
    if (z <= 0.0) count = x.size();  // every |value| >= z
  } else {
    count = static_cast<std::size_t>(x.end() - std::upper_bound(x.begin(), x.end(), z));
  }
  return static_cast<double>(count) / static_cast<double>(x.size());
}

double sample_moment(const SampleBatch& batch, int order) {
  require_nonempty(batch, "sample_moment");
  if (order < 1) throw std::domain_error("sample_moment: requires order >= 1");
  std::vector<double> terms;
  terms.reserve(batch.values.size());
  for (double v : batch.values) {
    double p = 1.0;
    for (int i = 0; i < order; ++i) p *= v;
    terms.push_back(p);
  }
  return comp_sum(terms) / static_cast<double>(batch.values.size());
}

double dkw_band(uint64_t n_samples, double delta) {
  if (n_samples == 0) throw std::domain_error("dkw_band: requires n >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::domain_error("dkw_band: delta must lie in (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n_samples)));
}

KsReport make_ks_report(const SampleBatch& batch, const std::vector<int>& ks, double delta) {
  KsReport r;
  r.uniform = ks_distance(batch);
  for (int k : ks) {
    auto w = weighted_ks(batch, k);
    r.weighted[k] = w.value;
    r.argmax[k] = w.argmax_z;
  }
  r.dkw = dkw_band(batch.size(), delta);
  return r;
}

RateFit fit_rate(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::domain_error("fit_rate: requires >= 3 points");
  double sx = 0, sy = 0;
  for (auto [n, d] : points) {
    if (!(n > 0.0) || !(d > 0.0))
      throw std::domain_error("fit_rate: all coordinates must be positive");
    sx += std::log(n);
    sy += std::log(d);
  }
  const double m = static_cast<double>(points.size());
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (auto [n, d] : points) {
    double dx = std::log(n) - mx, dy = std::log(d) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::domain_error("fit_rate: needs at least two distinct sizes");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssres = syy - f.slope * sxy;
  f.r2 = syy == 0.0 ? 1.0 : 1.0 - ssres / syy;
  return f;
}

void save_batch(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_batch: cannot open " + path);
  uint64_t count = to_le64(batch.values.size());
  out.write(reinterpret_cast<const char*>(&count), 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(batch.values.data()),
              static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
  } else {
    for (double v : batch.values) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      bits = to_le64(bits);
      out.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
  if (!out) throw std::runtime_error("save_batch: write failed for " + path);

  nlohmann::ordered_json side;
  side["model_tag"] = batch.model_tag;
  side["seed"] = batch.seed;
  side["n_samples"] = batch.values.size();
  std::ofstream sc(path + ".json");
  if (!sc) throw std::runtime_error("save_batch: cannot open " + path + ".json");
  sc << side.dump(2) << '\n';
}

SampleBatch load_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_batch: cannot open " + path);
  uint64_t count_le = 0;
  in.read(reinterpret_cast<char*>(&count_le), 8);
  if (!in) throw std::runtime_error("load_batch: truncated header in " + path);
  uint64_t count = to_le64(count_le);
  SampleBatch b;
  b.values.resize(count);
  in.read(reinterpret_cast<char*>(b.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("load_batch: truncated payload in " + path);
  if constexpr (std::endian::native != std::endian::little) {
    for (double& v : b.values) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      bits = __builtin_bswap64(bits);
      std::memcpy(&v, &bits, 8);
    }
  }
  if (!std::is_sorted(b.values.begin(), b.values.end()))
    throw std::runtime_error("load_batch: values not sorted in " + path);

  std::ifstream sc(path + ".json");
  if (sc) {
    auto side = nlohmann::json::parse(sc);
    b.model_tag = side.value("model_tag", std::string{});
    b.seed = side.value("seed", uint64_t{0});
    if (side.contains("n_samples") && side["n_samples"].get<uint64_t>() != count)
      throw std::runtime_error("load_batch: sidecar count mismatch for " + path);
  }
  return b;
}

}  // namespace nuberry
