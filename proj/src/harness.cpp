#include "nuberry/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nuberry/gaussian_chaos.hpp"
#include "nuberry/pattern.hpp"
#include "nuberry/poisson_geom.hpp"
#include "nuberry/rademacher.hpp"

namespace nuberry {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_u64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void bad_param(const std::string& model, const std::string& key,
                            const std::string& what) {
  throw std::domain_error(model + ": parameter '" + key + "' " + what);
}

double parse_double(const std::string& model, const std::string& key,
                    const std::string& value) {
  const char* s = value.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v))
    bad_param(model, key, "is not a finite number: '" + value + "'");
  return v;
}

uint64_t parse_u64(const std::string& model, const std::string& key,
                   const std::string& value) {
  const char* s = value.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0' || value.find('-') != std::string::npos)
    bad_param(model, key, "is not a nonnegative integer: '" + value + "'");
  return v;
}

// Parameter lookup over ExperimentSpec::model_params with structured errors.
struct Params {
  const std::string model;
  const std::map<std::string, std::string>& kv;

  const std::string* find(const std::string& key) const {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  }
  std::string req_str(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw std::domain_error(model + ": missing required parameter '" + key + "'");
    return *v;
  }
  std::string opt_str(const std::string& key, const std::string& def) const {
    const std::string* v = find(key);
    return v ? *v : def;
  }
  double req_double(const std::string& key) const {
    return parse_double(model, key, req_str(key));
  }
  double opt_double(const std::string& key, double def) const {
    const std::string* v = find(key);
    return v ? parse_double(model, key, *v) : def;
  }
  uint64_t req_u64(const std::string& key) const {
    return parse_u64(model, key, req_str(key));
  }
  uint64_t opt_u64(const std::string& key, uint64_t def) const {
    const std::string* v = find(key);
    return v ? parse_u64(model, key, *v) : def;
  }
  void check_keys(std::initializer_list<const char*> allowed) const {
    for (const auto& [k, v] : kv) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) throw std::domain_error(model + ": unknown parameter '" + k + "'");
    }
  }
};

double pattern_code(const std::string& name) {
  if (name == "edge") return 1.0;
  if (name == "triangle") return 2.0;
  if (name == "path3") return 3.0;
  return 0.0;
}

std::vector<int> distance_orders(const ExperimentSpec& spec) {
  if (spec.weights_k.empty())
    throw std::domain_error("run_experiment: weights_k must be nonempty");
  std::set<int> orders{1, 2, 3};
  for (int k : spec.weights_k) {
    if (k < 0) throw std::domain_error("run_experiment: weights_k entries must be >= 0");
    orders.insert(k);
  }
  return {orders.begin(), orders.end()};
}

void check_spec_basics(const ExperimentSpec& spec) {
  if (spec.n_samples == 0)
    throw std::domain_error("run_experiment: n_samples must be >= 1");
  if (spec.replicas == 0)
    throw std::domain_error("run_experiment: replicas must be >= 1");
}

// Fills distances and empirical tails from a Monte Carlo batch.
void fill_from_batch(ReportRow& row, const SampleBatch& batch,
                     const std::vector<int>& orders) {
  row.ks_uniform = ks_distance(batch);
  for (int k : orders) {
    double v = weighted_ks(batch, k).value;
    if (k >= 1 && k <= 3) row.ks_weighted[k] = v;
    else row.extras["ks_w" + std::to_string(k)] = v;
  }
  for (int i = 0; i < 3; ++i) {
    row.tails[i].z = i + 1.0;
    row.tails[i].empirical = tail_prob(batch, i + 1.0, /*two_sided=*/true);
  }
}

// Fills distances and tails exactly from an enumerated law.
void fill_from_law(ReportRow& row, const std::vector<LawAtom>& law,
                   const std::vector<int>& orders) {
  row.ks_uniform = exact_kolmogorov(law);
  for (int k : orders) {
    double v = exact_weighted_kolmogorov(law, k).value;
    if (k >= 1 && k <= 3) row.ks_weighted[k] = v;
    else row.extras["ks_w" + std::to_string(k)] = v;
  }
  for (int i = 0; i < 3; ++i) {
    double z = i + 1.0;
    double p = 0.0;
    for (const LawAtom& a : law)
      if (std::fabs(a.value) >= z) p += a.prob;
    row.tails[i].z = z;
    row.tails[i].empirical = p;
  }
}

void finish_ratio(ReportRow& row) {
  double d = bound_distance(row);
  row.ratio = row.bound_value > 0.0 ? d / row.bound_value : 0.0;
}

ReportRow run_fbm(const ExperimentSpec& spec, int threads) {
  Params p{"fbm", spec.model_params};
  p.check_keys({"hurst", "n", "c_h", "big_c"});
  const double hurst = p.req_double("hurst");
  const uint64_t n = p.req_u64("n");
  const double c_h = p.opt_double("c_h", 1.0);
  const double big_c = p.opt_double("big_c", 1.0);
  if (n < 2 || n > 0xffffffffull) bad_param("fbm", "n", "must lie in [2, 2^32)");

  FbmSpec fspec{hurst, static_cast<uint32_t>(n), c_h};
  ChaosDiagnostics diag = diagnostics(fspec);
  SampleBatch batch =
      simulate_fbm_batch(fspec, spec.n_samples, spec.seed, spec.replicas, threads);

  ReportRow row;
  char id[96];
  std::snprintf(id, sizeof(id), "fbm_h%.6g_n%llu_s%llu", hurst,
                static_cast<unsigned long long>(n),
                static_cast<unsigned long long>(spec.seed));
  row.experiment_id = id;
  row.model = Model::fbm;
  row.param_1 = hurst;
  row.param_2 = static_cast<double>(n);
  row.n_samples = spec.n_samples;
  row.seed = spec.seed;
  fill_from_batch(row, batch, distance_orders(spec));
  row.bound_kind = BoundKind::fourth_moment;
  row.bound_value = diag.fm_bound;
  for (int i = 0; i < 3; ++i)
    row.tails[i].bound = gauss_tail_bound(row.tails[i].z, 2, diag.c_n);
  row.extras["c_h"] = c_h;
  row.extras["big_c"] = big_c;
  row.extras["sigma_n"] = diag.sigma_n;
  row.extras["kappa4_excess"] = diag.kappa4_excess;
  row.extras["contraction_norm"] = diag.contraction_norm;
  row.extras["c_n"] = diag.c_n;
  row.extras["rate_an"] = diag.rate_an;
  row.extras["dkw_1e-3"] = dkw_band(spec.n_samples, 1e-3);
  finish_ratio(row);
  return row;
}

ReportRow run_rgg(const ExperimentSpec& spec, int threads) {
  Params p{"rgg", spec.model_params};
  p.check_keys({"t", "r", "dim", "pattern", "outer", "inner", "v", "big_c", "pilot"});
  const double t = p.req_double("t");
  const double r = p.req_double("r");
  const uint64_t dim = p.opt_u64("dim", 2);
  const std::string pat_name = p.opt_str("pattern", "edge");
  const uint64_t outer = p.opt_u64("outer", 200);
  const uint64_t inner = p.opt_u64("inner", 200);
  const double v = p.opt_double("v", 1.0);
  const double big_c = p.opt_double("big_c", 1.0);
  const uint64_t pilot = p.opt_u64("pilot", 200000);
  if (dim < 1 || dim > 8) bad_param("rgg", "dim", "must lie in [1, 8]");
  if (outer < 2) bad_param("rgg", "outer", "must be >= 2");
  if (inner < 2) bad_param("rgg", "inner", "must be >= 2");

  PatternGraph pattern = make_pattern(pat_name);
  Window window(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
  RggSpec rspec(window, t, r, pattern, v);
  rspec = with_pilot_standardization(std::move(rspec), pilot, spec.seed, spec.replicas,
                                     threads);
  SampleBatch batch =
      simulate_rgg_batch(rspec, spec.n_samples, spec.seed, spec.replicas, threads);
  PoincareTermsP terms =
      estimate_poincare_terms(rspec, outer, inner, spec.seed, threads);

  ReportRow row;
  char id[128];
  std::snprintf(id, sizeof(id), "rgg_%s_t%.6g_r%.6g_d%llu_s%llu", pat_name.c_str(), t,
                r, static_cast<unsigned long long>(dim),
                static_cast<unsigned long long>(spec.seed));
  row.experiment_id = id;
  row.model = Model::rgg;
  row.param_1 = t;
  row.param_2 = r;
  row.param_3 = static_cast<double>(dim);
  row.param_4 = pattern_code(pat_name);
  row.n_samples = spec.n_samples;
  row.seed = spec.seed;
  fill_from_batch(row, batch, distance_orders(spec));
  row.bound_kind = BoundKind::poincare_poisson;
  row.bound_value = uniform_bound_poisson(terms);
  const uint32_t q = pattern.order;
  const double c_rgg =
      concentration_c_rgg(q, v, t, r, static_cast<uint32_t>(dim), window.volume());
  for (int i = 0; i < 3; ++i)
    row.tails[i].bound = poisson_tail_bound(row.tails[i].z, static_cast<int>(q), c_rgg);
  row.extras["v"] = v;
  row.extras["big_c"] = big_c;
  row.extras["a1"] = terms.a1;
  row.extras["a2"] = terms.a2;
  row.extras["a3"] = terms.a3;
  row.extras["a4"] = terms.a4;
  row.extras["a5"] = terms.a5;
  row.extras["se1"] = terms.se1;
  row.extras["se2"] = terms.se2;
  row.extras["se3"] = terms.se3;
  row.extras["se4"] = terms.se4;
  row.extras["se5"] = terms.se5;
  row.extras["bias_a1"] = terms.bias_a1;
  row.extras["bias_a4"] = terms.bias_a4;
  row.extras["bound_pushed3"] = uniform_bound_poisson_pushed(terms, 3.0);
  row.extras["std_mean"] = rspec.std_mean;
  row.extras["std_dev"] = rspec.std_dev;
  row.extras["c_rgg"] = c_rgg;
  row.extras["variance_lower"] =
      variance_lower_bound(q, v, t, r, static_cast<uint32_t>(dim));
  row.extras["dkw_1e-3"] = dkw_band(spec.n_samples, 1e-3);
  finish_ratio(row);
  return row;
}

std::vector<double> load_weights_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("two_runs: cannot open weights file " + path);
  std::vector<double> w;
  double x;
  while (in >> x) w.push_back(x);
  if (!in.eof())
    throw std::runtime_error("two_runs: malformed weights file " + path);
  if (w.empty()) throw std::domain_error("two_runs: weights file is empty");
  return w;
}

ReportRow run_two_runs(const ExperimentSpec& spec, int threads) {
  Params p{"two_runs", spec.model_params};
  p.check_keys({"m", "mode", "weights_file"});
  std::vector<double> weights;
  if (const std::string* wf = p.find("weights_file")) {
    weights = load_weights_file(*wf);
  } else {
    uint64_t m = p.req_u64("m");
    if (m < 1) bad_param("two_runs", "m", "must be >= 1");
    weights.assign(m, 1.0);
  }
  const std::string mode =
      p.opt_str("mode", weights.size() + 1 <= 20 ? "enumerate" : "mc");
  if (mode != "enumerate" && mode != "mc")
    bad_param("two_runs", "mode", "must be 'enumerate' or 'mc'");

  TwoRunsSpec tr = standardized_two_runs(weights);

  ReportRow row;
  char id[96];
  std::snprintf(id, sizeof(id), "two_runs_m%zu_%s_s%llu", weights.size(), mode.c_str(),
                static_cast<unsigned long long>(spec.seed));
  row.experiment_id = id;
  row.model = Model::two_runs;
  row.param_1 = static_cast<double>(weights.size());
  row.param_2 = mode == "enumerate" ? 0.0 : 1.0;
  row.n_samples = spec.n_samples;
  row.seed = spec.seed;
  row.extras["std_mean"] = tr.mean;
  row.extras["std_dev"] = tr.std_dev;

  const std::vector<int> orders = distance_orders(spec);
  if (mode == "enumerate") {
    RademacherSpec bits = two_runs_bits(tr);
    BitFunctional f = two_runs_functional(tr);
    std::vector<LawAtom> law = enumerate_distribution(bits, f);
    fill_from_law(row, law, orders);
    PoincareTermsR terms =
        estimate_b_terms(bits, f, BTermMode::enumerate, spec.replicas, spec.seed,
                         threads);
    row.bound_kind = BoundKind::poincare_rademacher;
    row.bound_value = uniform_bound_rademacher(terms);
    row.extras["b1"] = terms.b1;
    row.extras["b2"] = terms.b2;
    row.extras["b3"] = terms.b3;
    row.extras["b4"] = terms.b4;
    row.extras["b5"] = terms.b5;
    row.extras["se1"] = row.extras["se2"] = row.extras["se3"] = 0.0;
    row.extras["se4"] = row.extras["se5"] = 0.0;
  } else {
    SampleBatch batch = simulate_two_runs_batch(tr, spec.n_samples, spec.seed,
                                                spec.replicas, threads);
    fill_from_batch(row, batch, orders);
    row.bound_kind = BoundKind::norm_ratio;
    row.bound_value = two_runs_norm_bound(tr.weights);
    row.extras["dkw_1e-3"] = dkw_band(spec.n_samples, 1e-3);
  }
  // No concentration inequality is assembled for this model; the trivial
  // probability bound 1 keeps the tail columns numeric and never violated.
  for (int i = 0; i < 3; ++i) row.tails[i].bound = 1.0;
  finish_ratio(row);
  return row;
}

ReportRow run_er(const ExperimentSpec& spec, int threads) {
  Params p{"er", spec.model_params};
  p.check_keys({"n", "p", "pattern", "pilot", "standardize"});
  const uint64_t n = p.req_u64("n");
  const double prob = p.req_double("p");
  const std::string pat_name = p.opt_str("pattern", "triangle");
  const uint64_t pilot = p.opt_u64("pilot", 200000);
  std::string standardize = p.opt_str("standardize", "auto");
  if (n < 2 || n > 100000) bad_param("er", "n", "must lie in [2, 1e5]");
  if (standardize == "auto") standardize = n <= 6 ? "exact" : "pilot";
  if (standardize != "exact" && standardize != "pilot")
    bad_param("er", "standardize", "must be 'exact', 'pilot', or 'auto'");

  PatternGraph pattern = make_pattern(pat_name);
  ErSpec espec(static_cast<uint32_t>(n), prob, pattern);

  ReportRow row;
  char id[96];
  std::snprintf(id, sizeof(id), "er_%s_n%llu_p%.6g_s%llu", pat_name.c_str(),
                static_cast<unsigned long long>(n), prob,
                static_cast<unsigned long long>(spec.seed));
  row.experiment_id = id;
  row.model = Model::er;
  row.param_1 = static_cast<double>(n);
  row.param_2 = prob;
  row.param_3 = pattern_code(pat_name);
  row.n_samples = spec.n_samples;
  row.seed = spec.seed;
  row.extras["psi"] = psi(pattern, static_cast<uint32_t>(n), prob);

  const std::vector<int> orders = distance_orders(spec);
  if (standardize == "exact") {
    ErSpec std_spec = with_exact_standardization(espec);
    RademacherSpec bits = er_bits(std_spec);
    BitFunctional f = er_functional(std_spec);
    std::vector<LawAtom> law = enumerate_distribution(bits, f);
    fill_from_law(row, law, orders);
    PoincareTermsR terms =
        estimate_b_terms(bits, f, BTermMode::enumerate, spec.replicas, spec.seed,
                         threads);
    row.bound_kind = BoundKind::poincare_rademacher;
    row.bound_value = uniform_bound_rademacher(terms);
    row.extras["b1"] = terms.b1;
    row.extras["b2"] = terms.b2;
    row.extras["b3"] = terms.b3;
    row.extras["b4"] = terms.b4;
    row.extras["b5"] = terms.b5;
    row.extras["se1"] = row.extras["se2"] = row.extras["se3"] = 0.0;
    row.extras["se4"] = row.extras["se5"] = 0.0;
    row.extras["std_mean"] = std_spec.mean;
    row.extras["std_dev"] = std_spec.std_dev;
  } else {
    ErSpec std_spec = with_pilot_standardization(espec, pilot, spec.seed,
                                                 spec.replicas, threads);
    SampleBatch batch = simulate_er_batch(std_spec, spec.n_samples, spec.seed,
                                          spec.replicas, threads);
    fill_from_batch(row, batch, orders);
    row.bound_kind = BoundKind::er_scale;
    row.bound_value = er_bound_scale(static_cast<uint32_t>(n), prob, pattern);
    row.extras["std_mean"] = std_spec.mean;
    row.extras["std_dev"] = std_spec.std_dev;
    row.extras["dkw_1e-3"] = dkw_band(spec.n_samples, 1e-3);
  }
  for (int i = 0; i < 3; ++i) {
    row.tails[i].z = i + 1.0;
    row.tails[i].bound = 1.0;  // trivial bound; see two_runs note
  }
  finish_ratio(row);
  return row;
}

bool row_less(const ReportRow& a, const ReportRow& b) {
  auto key = [](const ReportRow& r) {
    return std::make_tuple(to_string(r.model), primary_size(r), r.param_1, r.param_2,
                           r.param_3, r.param_4, r.seed, r.experiment_id);
  };
  return key(a) < key(b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

ReportRow row_from_fields(const std::vector<std::string>& f) {
  ReportRow r;
  r.experiment_id = f[0];
  r.model = model_from_string(f[1]);
  r.param_1 = parse_double("report", "param_1", f[2]);
  r.param_2 = parse_double("report", "param_2", f[3]);
  r.param_3 = parse_double("report", "param_3", f[4]);
  r.param_4 = parse_double("report", "param_4", f[5]);
  r.n_samples = parse_u64("report", "n_samples", f[6]);
  r.seed = parse_u64("report", "seed", f[7]);
  r.ks_uniform = parse_double("report", "ks_uniform", f[8]);
  r.ks_weighted[1] = parse_double("report", "ks_w1", f[9]);
  r.ks_weighted[2] = parse_double("report", "ks_w2", f[10]);
  r.ks_weighted[3] = parse_double("report", "ks_w3", f[11]);
  r.bound_kind = bound_kind_from_string(f[12]);
  r.bound_value = parse_double("report", "bound_value", f[13]);
  r.ratio = parse_double("report", "ratio", f[14]);
  for (int i = 0; i < 3; ++i) {
    r.tails[i].z = parse_double("report", "tail_z", f[15 + 3 * i]);
    r.tails[i].empirical = parse_double("report", "tail_emp", f[16 + 3 * i]);
    r.tails[i].bound = parse_double("report", "tail_bound", f[17 + 3 * i]);
  }
  return r;
}

std::string row_to_csv(const ReportRow& r) {
  std::string line;
  line += r.experiment_id;
  line += ',';
  line += to_string(r.model);
  for (double p : {r.param_1, r.param_2, r.param_3, r.param_4})
    line += ',' + fmt_double(p);
  line += ',' + fmt_u64(r.n_samples);
  line += ',' + fmt_u64(r.seed);
  line += ',' + fmt_double(r.ks_uniform);
  for (int k : {1, 2, 3}) {
    auto it = r.ks_weighted.find(k);
    if (it == r.ks_weighted.end())
      throw std::domain_error("emit_report: row lacks weighted distance k=" +
                              std::to_string(k));
    line += ',' + fmt_double(it->second);
  }
  line += ',' + to_string(r.bound_kind);
  line += ',' + fmt_double(r.bound_value);
  line += ',' + fmt_double(r.ratio);
  for (const TailCheck& t : r.tails) {
    line += ',' + fmt_double(t.z);
    line += ',' + fmt_double(t.empirical);
    line += ',' + fmt_double(t.bound);
  }
  return line;
}

ordered_json row_to_json(const ReportRow& r) {
  ordered_json j;
  j["experiment_id"] = r.experiment_id;
  j["model"] = to_string(r.model);
  j["param_1"] = r.param_1;
  j["param_2"] = r.param_2;
  j["param_3"] = r.param_3;
  j["param_4"] = r.param_4;
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  j["ks_uniform"] = r.ks_uniform;
  for (int k : {1, 2, 3}) {
    auto it = r.ks_weighted.find(k);
    if (it == r.ks_weighted.end())
      throw std::domain_error("emit_report: row lacks weighted distance k=" +
                              std::to_string(k));
    j["ks_w" + std::to_string(k)] = it->second;
  }
  j["bound_kind"] = to_string(r.bound_kind);
  j["bound_value"] = r.bound_value;
  j["ratio"] = r.ratio;
  for (int i = 0; i < 3; ++i) {
    std::string suffix = std::to_string(i + 1);
    j["tail_z" + suffix] = r.tails[i].z;
    j["tail_emp" + suffix] = r.tails[i].empirical;
    j["tail_bound" + suffix] = r.tails[i].bound;
  }
  ordered_json ex = ordered_json::object();
  for (const auto& [k, v] : r.extras) ex[k] = v;
  j["extras"] = ex;
  return j;
}

ReportRow row_from_json(const ordered_json& j) {
  ReportRow r;
  r.experiment_id = j.at("experiment_id").get<std::string>();
  r.model = model_from_string(j.at("model").get<std::string>());
  r.param_1 = j.at("param_1").get<double>();
  r.param_2 = j.at("param_2").get<double>();
  r.param_3 = j.at("param_3").get<double>();
  r.param_4 = j.at("param_4").get<double>();
  r.n_samples = j.at("n_samples").get<uint64_t>();
  r.seed = j.at("seed").get<uint64_t>();
  r.ks_uniform = j.at("ks_uniform").get<double>();
  for (int k : {1, 2, 3})
    r.ks_weighted[k] = j.at("ks_w" + std::to_string(k)).get<double>();
  r.bound_kind = bound_kind_from_string(j.at("bound_kind").get<std::string>());
  r.bound_value = j.at("bound_value").get<double>();
  r.ratio = j.at("ratio").get<double>();
  for (int i = 0; i < 3; ++i) {
    std::string suffix = std::to_string(i + 1);
    r.tails[i].z = j.at("tail_z" + suffix).get<double>();
    r.tails[i].empirical = j.at("tail_emp" + suffix).get<double>();
    r.tails[i].bound = j.at("tail_bound" + suffix).get<double>();
  }
  if (j.contains("extras"))
    for (const auto& [k, v] : j.at("extras").items())
      r.extras[k] = v.get<double>();
  return r;
}

}  // namespace

Model model_from_string(const std::string& s) {
  if (s == "fbm") return Model::fbm;
  if (s == "rgg") return Model::rgg;
  if (s == "two_runs") return Model::two_runs;
  if (s == "er") return Model::er;
  if (s == "custom") return Model::custom;
  throw std::domain_error("unknown model '" + s + "'");
}

std::string to_string(Model m) {
  switch (m) {
    case Model::fbm: return "fbm";
    case Model::rgg: return "rgg";
    case Model::two_runs: return "two_runs";
    case Model::er: return "er";
    case Model::custom: return "custom";
  }
  throw std::logic_error("to_string(Model): bad value");
}

BoundKind bound_kind_from_string(const std::string& s) {
  if (s == "fourth_moment") return BoundKind::fourth_moment;
  if (s == "poincare_poisson") return BoundKind::poincare_poisson;
  if (s == "poincare_rademacher") return BoundKind::poincare_rademacher;
  if (s == "norm_ratio") return BoundKind::norm_ratio;
  if (s == "er_scale") return BoundKind::er_scale;
  throw std::domain_error("unknown bound kind '" + s + "'");
}

std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::fourth_moment: return "fourth_moment";
    case BoundKind::poincare_poisson: return "poincare_poisson";
    case BoundKind::poincare_rademacher: return "poincare_rademacher";
    case BoundKind::norm_ratio: return "norm_ratio";
    case BoundKind::er_scale: return "er_scale";
  }
  throw std::logic_error("to_string(BoundKind): bad value");
}

double bound_distance(const ReportRow& row) {
  switch (row.bound_kind) {
    case BoundKind::fourth_moment:
    case BoundKind::poincare_poisson:
    case BoundKind::poincare_rademacher:
      return row.ks_uniform;
    case BoundKind::norm_ratio:
    case BoundKind::er_scale:
      return row.ks_weighted.at(3);
  }
  throw std::logic_error("bound_distance: bad kind");
}

double primary_size(const ReportRow& row) {
  return row.model == Model::fbm ? row.param_2 : row.param_1;
}

ReportRow run_experiment(const ExperimentSpec& spec, int threads) {
  check_spec_basics(spec);
  switch (spec.model) {
    case Model::fbm: return run_fbm(spec, threads);
    case Model::rgg: return run_rgg(spec, threads);
    case Model::two_runs: return run_two_runs(spec, threads);
    case Model::er: return run_er(spec, threads);
    case Model::custom:
      throw std::domain_error("run_experiment: model 'custom' has no pipeline");
  }
  throw std::logic_error("run_experiment: bad model");
}

std::string report_csv_header() {
  return "experiment_id,model,param_1,param_2,param_3,param_4,n_samples,seed,"
         "ks_uniform,ks_w1,ks_w2,ks_w3,bound_kind,bound_value,ratio,"
         "tail_z1,tail_emp1,tail_bound1,tail_z2,tail_emp2,tail_bound2,"
         "tail_z3,tail_emp3,tail_bound3";
}

void emit_report(std::span<const ReportRow> rows, ReportFormat format,
                 const std::string& path) {
  if (rows.empty()) throw std::domain_error("emit_report: needs at least one row");
  std::vector<ReportRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(), row_less);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path);
  if (format == ReportFormat::csv) {
    out << report_csv_header() << '\n';
    for (const ReportRow& r : sorted) out << row_to_csv(r) << '\n';
  } else {
    ordered_json arr = ordered_json::array();
    for (const ReportRow& r : sorted) arr.push_back(row_to_json(r));
    out << arr.dump(2) << '\n';
  }
  if (!out.good()) throw std::runtime_error("emit_report: write failed for " + path);
}

std::vector<ReportRow> read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_report: cannot open " + path);
  int first = in.peek();
  while (first == ' ' || first == '\n' || first == '\r' || first == '\t') {
    in.get();
    first = in.peek();
  }
  std::vector<ReportRow> rows;
  if (first == '[') {
    ordered_json arr = ordered_json::parse(in);
    for (const auto& j : arr) rows.push_back(row_from_json(j));
    return rows;
  }
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_report: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != report_csv_header())
    throw std::runtime_error("read_report: unrecognized CSV header in " + path);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 24)
      throw std::runtime_error("read_report: malformed CSV row in " + path);
    rows.push_back(row_from_fields(f));
  }
  return rows;
}

RateVerdict rate_report(std::span<const ReportRow> rows, double expected_slope) {
  if (rows.empty()) throw std::domain_error("rate_report: no rows");
  for (const ReportRow& r : rows)
    if (r.model != rows[0].model)
      throw std::domain_error("rate_report: mixed models in one fit");
  std::set<double> sizes;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(rows.size());
  for (const ReportRow& r : rows) {
    sizes.insert(primary_size(r));
    pts.emplace_back(primary_size(r), r.ks_uniform);
  }
  if (sizes.size() < 3)
    throw std::domain_error("rate_report: needs >= 3 distinct sizes");
  RateVerdict v;
  v.fit = fit_rate(pts);
  v.expected_slope = expected_slope;
  v.pass = std::fabs(v.fit.slope - expected_slope) <= 0.15;
  return v;
}

void apply_setting(ExperimentSpec& spec, const std::string& key,
                   const std::string& value) {
  if (key == "model") {
    spec.model = model_from_string(value);
  } else if (key == "n_samples" || key == "samples") {
    spec.n_samples = parse_u64("config", key, value);
    if (spec.n_samples == 0)
      throw std::domain_error("config: n_samples must be >= 1");
  } else if (key == "seed") {
    spec.seed = parse_u64("config", key, value);
  } else if (key == "replicas") {
    uint64_t r = parse_u64("config", key, value);
    if (r == 0 || r > 0xffffffffull)
      throw std::domain_error("config: replicas must lie in [1, 2^32)");
    spec.replicas = static_cast<uint32_t>(r);
  } else if (key == "out") {
    spec.output_path = value;
  } else if (key == "k") {
    std::vector<int> ks;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) ks.push_back(static_cast<int>(parse_u64("config", key, tok)));
    if (ks.empty()) throw std::domain_error("config: k list is empty");
    spec.weights_k = ks;
  } else {
    spec.model_params[key] = value;
  }
}

ExperimentSpec parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  ExperimentSpec spec;
  bool saw_model = false;
  std::string line;
  auto trim = [](std::string s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not key=value in " + path);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: empty key on line " + std::to_string(lineno) +
                               " in " + path);
    if (key == "model") saw_model = true;
    apply_setting(spec, key, value);
  }
  if (!saw_model) throw std::domain_error("config: missing 'model' in " + path);
  return spec;
}

}  // namespace nuberry
