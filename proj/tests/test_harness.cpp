// Tests for the experiment harness: config parsing, per-model pipelines
// cross-checked against the underlying library calls (the harness must add
// orchestration, not arithmetic), report emission and round trips in both
// formats, the ratio/bound-distance invariants, rate fitting, and bitwise
// thread invariance.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nuberry/empirical.hpp"
#include "nuberry/gaussian_chaos.hpp"
#include "nuberry/harness.hpp"
#include "nuberry/poisson_geom.hpp"
#include "nuberry/rademacher.hpp"
#include "nuberry/stein.hpp"

using namespace nuberry;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

ExperimentSpec cheap_fbm() {
  ExperimentSpec spec;
  spec.model = Model::fbm;
  spec.model_params = {{"hurst", "0.5"}, {"n", "16"}};
  spec.n_samples = 4000;
  spec.seed = 5;
  spec.replicas = 8;
  return spec;
}

}  // namespace

TEST_CASE("config file parsing") {
  const std::string path = "/tmp/nuberry_cfg_test.cfg";
  spit(path,
       "# experiment configuration\n"
       "model = fbm\n"
       "hurst = 0.5\n"
       "n = 32\n"
       "\n"
       "n_samples = 5000   # inline comment\n"
       "seed=3\n"
       "replicas = 8\n"
       "k = 1,3\n");
  ExperimentSpec spec = parse_config_file(path);
  CHECK(spec.model == Model::fbm);
  CHECK(spec.model_params.at("hurst") == "0.5");
  CHECK(spec.model_params.at("n") == "32");
  CHECK(spec.n_samples == 5000);
  CHECK(spec.seed == 3);
  CHECK(spec.replicas == 8);
  CHECK(spec.weights_k == std::vector<int>{1, 3});
  std::remove(path.c_str());

  // A config without a model cannot run anything.
  spit(path, "hurst = 0.5\n");
  CHECK_THROWS_AS(parse_config_file(path), std::domain_error);
  // Lines must be key=value.
  spit(path, "model = fbm\njust a stray line\n");
  CHECK_THROWS_AS(parse_config_file(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(parse_config_file("/tmp/nuberry_no_such_file.cfg"),
                  std::runtime_error);

  // apply_setting mirrors the file keys.
  ExperimentSpec s;
  apply_setting(s, "model", "er");
  apply_setting(s, "samples", "123");
  apply_setting(s, "seed", "9");
  apply_setting(s, "replicas", "4");
  apply_setting(s, "k", "2,3");
  apply_setting(s, "p", "0.4");
  CHECK(s.model == Model::er);
  CHECK(s.n_samples == 123);
  CHECK(s.seed == 9);
  CHECK(s.replicas == 4);
  CHECK(s.weights_k == std::vector<int>{2, 3});
  CHECK(s.model_params.at("p") == "0.4");
  CHECK_THROWS_AS(apply_setting(s, "replicas", "0"), std::domain_error);
  CHECK_THROWS_AS(apply_setting(s, "model", "weibull"), std::domain_error);
  CHECK_THROWS_AS(apply_setting(s, "n_samples", "-3"), std::domain_error);
}

TEST_CASE("csv header is frozen") {
  CHECK(report_csv_header() ==
        "experiment_id,model,param_1,param_2,param_3,param_4,n_samples,seed,"
        "ks_uniform,ks_w1,ks_w2,ks_w3,bound_kind,bound_value,ratio,"
        "tail_z1,tail_emp1,tail_bound1,tail_z2,tail_emp2,tail_bound2,"
        "tail_z3,tail_emp3,tail_bound3");
}

TEST_CASE("fbm pipeline row matches direct library calls") {
  ExperimentSpec spec = cheap_fbm();
  ReportRow row = run_experiment(spec);

  CHECK(row.model == Model::fbm);
  CHECK(row.param_1 == 0.5);
  CHECK(row.param_2 == 16.0);
  CHECK(row.param_3 == 0.0);
  CHECK(row.n_samples == 4000);
  CHECK(row.seed == 5);
  CHECK(row.bound_kind == BoundKind::fourth_moment);

  // The harness must reproduce exactly what the library produces directly.
  FbmSpec fspec;
  fspec.hurst = 0.5;
  fspec.n = 16;
  const ChaosDiagnostics d = diagnostics(fspec);
  CHECK(row.bound_value == d.fm_bound);
  SampleBatch batch = simulate_fbm_batch(fspec, 4000, 5, 8, 1);
  CHECK(row.ks_uniform == ks_distance(batch));
  CHECK(row.ks_weighted.at(1) == weighted_ks(batch, 1).value);
  CHECK(row.ks_weighted.at(3) == weighted_ks(batch, 3).value);
  CHECK(row.ratio == row.ks_uniform / row.bound_value);
  CHECK(bound_distance(row) == row.ks_uniform);

  for (int i = 0; i < 3; ++i) {
    const double z = static_cast<double>(i + 1);
    CHECK(row.tails[i].z == z);
    CHECK(row.tails[i].bound == gauss_tail_bound(z, 2, d.c_n));
    CHECK(row.tails[i].empirical == tail_prob(batch, z, true));
  }
  CHECK(row.extras.at("kappa4_excess") == d.kappa4_excess);
  CHECK(row.extras.at("c_n") == d.c_n);
  CHECK(row.extras.count("dkw_1e-3") == 1);

  // Unknown model parameters are rejected, not ignored.
  ExperimentSpec bogus = cheap_fbm();
  bogus.model_params["smoothing"] = "1";
  CHECK_THROWS_AS(run_experiment(bogus), std::domain_error);
  // Required ones must be present.
  ExperimentSpec missing = cheap_fbm();
  missing.model_params.erase("hurst");
  CHECK_THROWS_AS(run_experiment(missing), std::domain_error);
  // The default-constructed spec has no pipeline.
  ExperimentSpec none;
  CHECK_THROWS_AS(run_experiment(none), std::domain_error);
}

TEST_CASE("two_runs enumerate row is the exact law") {
  ExperimentSpec spec;
  spec.model = Model::two_runs;
  spec.model_params = {{"m", "6"}, {"mode", "enumerate"}};
  spec.seed = 2;
  ReportRow row = run_experiment(spec);

  CHECK(row.param_1 == 6.0);
  CHECK(row.param_2 == 0.0);  // enumerate mode code
  CHECK(row.bound_kind == BoundKind::poincare_rademacher);

  TwoRunsSpec truns = standardized_two_runs(std::vector<double>(6, 1.0));
  std::vector<LawAtom> law =
      enumerate_distribution(two_runs_bits(truns), two_runs_functional(truns));
  CHECK(row.ks_uniform == exact_kolmogorov(law));
  CHECK(row.ks_weighted.at(3) == exact_weighted_kolmogorov(law, 3).value);

  PoincareTermsR bt = estimate_b_terms(two_runs_bits(truns), two_runs_functional(truns),
                                       BTermMode::enumerate, 0, 0);
  CHECK(row.bound_value == uniform_bound_rademacher(bt));
  CHECK(row.extras.at("b1") == bt.b1);
  CHECK(row.extras.at("b5") == bt.b5);
  CHECK(row.extras.at("se1") == 0.0);

  // No concentration inequality is assembled for this model; the tail
  // bound column carries the trivial constant 1.
  for (const TailCheck& t : row.tails) {
    CHECK(t.bound == 1.0);
    CHECK(t.empirical <= 1.0);
  }
  // Exact tail from the law.
  double tail1 = 0.0;
  for (const LawAtom& a : law)
    if (std::fabs(a.value) >= 1.0) tail1 += a.prob;
  CHECK(std::fabs(row.tails[0].empirical - tail1) < 1e-12);
}

TEST_CASE("two_runs monte carlo row uses the norm-ratio bound") {
  ExperimentSpec spec;
  spec.model = Model::two_runs;
  spec.model_params = {{"m", "12"}, {"mode", "mc"}};
  spec.n_samples = 20000;
  spec.seed = 4;
  spec.replicas = 8;
  spec.weights_k = {1, 2, 3, 5};
  ReportRow row = run_experiment(spec);

  CHECK(row.param_1 == 12.0);
  CHECK(row.param_2 == 1.0);  // monte carlo mode code
  CHECK(row.bound_kind == BoundKind::norm_ratio);
  CHECK(row.bound_value == two_runs_norm_bound(std::vector<double>(12, 1.0)));
  CHECK(std::fabs(row.bound_value - 1.0 / std::sqrt(12.0)) < 1e-14);
  CHECK(bound_distance(row) == row.ks_weighted.at(3));
  CHECK(row.ratio == row.ks_weighted.at(3) / row.bound_value);
  // Requested extra order lands in extras; 1..3 stay in the map.
  CHECK(row.extras.count("ks_w5") == 1);
  CHECK(row.ks_weighted.count(2) == 1);

  TwoRunsSpec truns = standardized_two_runs(std::vector<double>(12, 1.0));
  SampleBatch batch = simulate_two_runs_batch(truns, 20000, 4, 8, 1);
  CHECK(row.ks_uniform == ks_distance(batch));
  CHECK(row.ks_weighted.at(3) == weighted_ks(batch, 3).value);
}

TEST_CASE("er rows: exact law and pilot scale") {
  ExperimentSpec ex;
  ex.model = Model::er;
  ex.model_params = {{"n", "5"}, {"p", "0.3"}, {"pattern", "triangle"}};
  ex.seed = 6;
  ReportRow row = run_experiment(ex);

  CHECK(row.param_1 == 5.0);
  CHECK(row.param_2 == 0.3);
  CHECK(row.param_3 == 2.0);  // triangle code
  CHECK(row.bound_kind == BoundKind::poincare_rademacher);

  const PatternGraph tri = make_pattern("triangle");
  ErSpec espec = with_exact_standardization(ErSpec(5, 0.3, tri));
  std::vector<LawAtom> law = enumerate_distribution(er_bits(espec), er_functional(espec));
  CHECK(row.ks_uniform == exact_kolmogorov(law));
  CHECK(row.extras.at("psi") == psi(tri, 5, 0.3));
  for (const TailCheck& t : row.tails) CHECK(t.bound == 1.0);

  ExperimentSpec pl;
  pl.model = Model::er;
  pl.model_params = {{"n", "8"}, {"p", "0.3"}, {"pattern", "edge"},
                     {"standardize", "pilot"}, {"pilot", "100000"}};
  pl.n_samples = 20000;
  pl.seed = 7;
  pl.replicas = 8;
  ReportRow prow = run_experiment(pl);
  CHECK(prow.bound_kind == BoundKind::er_scale);
  const PatternGraph edge = make_pattern("edge");
  CHECK(prow.bound_value == er_bound_scale(8, 0.3, edge));
  CHECK(bound_distance(prow) == prow.ks_weighted.at(3));
  CHECK(prow.extras.count("std_mean") == 1);
  CHECK(prow.extras.count("std_dev") == 1);
}

TEST_CASE("rgg row carries the term estimates and tail constants") {
  ExperimentSpec spec;
  spec.model = Model::rgg;
  spec.model_params = {{"t", "20"}, {"r", "0.15"}, {"pattern", "edge"},
                       {"outer", "8"}, {"inner", "8"}, {"pilot", "100000"}};
  spec.n_samples = 4000;
  spec.seed = 11;
  spec.replicas = 8;
  ReportRow row = run_experiment(spec);

  CHECK(row.param_1 == 20.0);
  CHECK(row.param_2 == 0.15);
  CHECK(row.param_3 == 2.0);  // dim
  CHECK(row.param_4 == 1.0);  // edge code
  CHECK(row.bound_kind == BoundKind::poincare_poisson);
  CHECK(row.bound_value > 0.0);
  for (const char* key : {"a1", "a2", "a3", "a4", "a5", "se1", "se3", "c_rgg"})
    CHECK(row.extras.count(key) == 1);
  const double c = row.extras.at("c_rgg");
  for (int i = 0; i < 3; ++i) {
    const double z = static_cast<double>(i + 1);
    CHECK(row.tails[i].bound == poisson_tail_bound(z, 2, c));
  }
  CHECK(row.ratio == row.ks_uniform / row.bound_value);
}

TEST_CASE("csv emission: header, sorting, lossless numeric round trip") {
  ExperimentSpec f = cheap_fbm();
  ReportRow r1 = run_experiment(f);
  f.model_params["n"] = "8";
  f.seed = 6;
  ReportRow r2 = run_experiment(f);
  ExperimentSpec t;
  t.model = Model::two_runs;
  t.model_params = {{"m", "4"}, {"mode", "enumerate"}};
  ReportRow r3 = run_experiment(t);

  const std::string path = "/tmp/nuberry_report_test.csv";
  // Deliberately unsorted input.
  std::vector<ReportRow> rows{r1, r3, r2};
  emit_report(rows, ReportFormat::csv, path);

  const std::string text = slurp(path);
  std::istringstream lines(text);
  std::string header;
  std::getline(lines, header);
  CHECK(header == report_csv_header());

  std::vector<ReportRow> back = read_report(path);
  REQUIRE(back.size() == 3);
  // Sorted by model name, then primary size: fbm n=8, fbm n=16, two_runs.
  CHECK(back[0].model == Model::fbm);
  CHECK(back[0].param_2 == 8.0);
  CHECK(back[1].param_2 == 16.0);
  CHECK(back[2].model == Model::two_runs);

  // Every numeric column survives the %.17g round trip bit for bit.
  CHECK(back[1].experiment_id == r1.experiment_id);
  CHECK(back[1].ks_uniform == r1.ks_uniform);
  CHECK(back[1].ks_weighted.at(3) == r1.ks_weighted.at(3));
  CHECK(back[1].bound_value == r1.bound_value);
  CHECK(back[1].ratio == r1.ratio);
  CHECK(back[1].n_samples == r1.n_samples);
  CHECK(back[1].seed == r1.seed);
  CHECK(back[1].bound_kind == r1.bound_kind);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[1].tails[i].z == r1.tails[i].z);
    CHECK(back[1].tails[i].empirical == r1.tails[i].empirical);
    CHECK(back[1].tails[i].bound == r1.tails[i].bound);
  }
  // CSV intentionally drops extras.
  CHECK(back[1].extras.empty());
  std::remove(path.c_str());
}

TEST_CASE("json emission: full fidelity and byte-stable round trip") {
  ExperimentSpec f = cheap_fbm();
  ReportRow r1 = run_experiment(f);
  ExperimentSpec t;
  t.model = Model::two_runs;
  t.model_params = {{"m", "4"}, {"mode", "enumerate"}};
  ReportRow r2 = run_experiment(t);

  const std::string p1 = "/tmp/nuberry_report_test1.json";
  const std::string p2 = "/tmp/nuberry_report_test2.json";
  std::vector<ReportRow> rows{r1, r2};
  emit_report(rows, ReportFormat::json, p1);

  std::vector<ReportRow> back = read_report(p1);
  REQUIRE(back.size() == 2);
  const ReportRow& fb = back[0].model == Model::fbm ? back[0] : back[1];
  CHECK(fb.ks_uniform == r1.ks_uniform);
  CHECK(fb.extras == r1.extras);  // JSON keeps extras, values bit-exact

  emit_report(back, ReportFormat::json, p2);
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());

  CHECK_THROWS_AS(read_report("/tmp/nuberry_no_such_report.json"), std::runtime_error);
}

TEST_CASE("rate fitting over report rows") {
  // Synthetic fbm rows with ks exactly proportional to n^{-1/2}.
  std::vector<ReportRow> rows;
  for (double n : {16.0, 64.0, 256.0, 1024.0}) {
    ReportRow r;
    r.model = Model::fbm;
    r.param_1 = 0.5;
    r.param_2 = n;
    r.ks_uniform = 0.35 / std::sqrt(n);
    rows.push_back(r);
  }
  RateVerdict v = rate_report(rows, -0.5);
  CHECK(std::fabs(v.fit.slope + 0.5) < 1e-12);
  CHECK(v.fit.r2 > 0.999999);
  CHECK(v.pass);
  RateVerdict off = rate_report(rows, -0.2);
  CHECK_FALSE(off.pass);

  // Mixed models and too few sizes are rejected.
  std::vector<ReportRow> mixed = rows;
  mixed[1].model = Model::er;
  CHECK_THROWS_AS(rate_report(mixed, -0.5), std::domain_error);
  std::vector<ReportRow> twosizes{rows[0], rows[1]};
  CHECK_THROWS_AS(rate_report(twosizes, -0.5), std::domain_error);
  std::vector<ReportRow> dup{rows[0], rows[0], rows[1]};
  CHECK_THROWS_AS(rate_report(dup, -0.5), std::domain_error);
}

TEST_CASE("experiments are deterministic in the thread count") {
  std::vector<ExperimentSpec> specs;
  specs.push_back(cheap_fbm());
  {
    ExperimentSpec t;
    t.model = Model::two_runs;
    t.model_params = {{"m", "12"}, {"mode", "mc"}};
    t.n_samples = 20000;
    t.seed = 4;
    t.replicas = 8;
    specs.push_back(t);
  }
  {
    ExperimentSpec e;
    e.model = Model::er;
    e.model_params = {{"n", "8"}, {"p", "0.3"}, {"pattern", "edge"},
                      {"standardize", "pilot"}, {"pilot", "100000"}};
    e.n_samples = 20000;
    e.seed = 7;
    e.replicas = 8;
    specs.push_back(e);
  }
  {
    ExperimentSpec g;
    g.model = Model::rgg;
    g.model_params = {{"t", "20"}, {"r", "0.15"}, {"pattern", "edge"},
                      {"outer", "8"}, {"inner", "8"}, {"pilot", "100000"}};
    g.n_samples = 4000;
    g.seed = 11;
    g.replicas = 8;
    specs.push_back(g);
  }

  for (const ExperimentSpec& spec : specs) {
    ReportRow a = run_experiment(spec, 1);
    ReportRow b = run_experiment(spec, 3);
    CHECK(a.experiment_id == b.experiment_id);
    CHECK(a.ks_uniform == b.ks_uniform);
    CHECK(a.ks_weighted == b.ks_weighted);
    CHECK(a.bound_value == b.bound_value);
    CHECK(a.ratio == b.ratio);
    CHECK(a.extras == b.extras);
    for (int i = 0; i < 3; ++i) {
      CHECK(a.tails[i].empirical == b.tails[i].empirical);
      CHECK(a.tails[i].bound == b.tails[i].bound);
    }
  }
}
