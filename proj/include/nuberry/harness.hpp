#pragma once

// Experiment orchestration: flat key=value configuration, deterministic
// replica-parallel pipelines for every model, report rows with explicit
// bounds and tail checks, CSV/JSON emission, and rate fitting over sizes.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nuberry/empirical.hpp"

namespace nuberry {

enum class Model { fbm, rgg, two_runs, er, custom };

Model model_from_string(const std::string& s);
std::string to_string(Model m);

enum class BoundKind {
  fourth_moment,        // sqrt(kappa4_excess / 6); compared to ks_uniform
  poincare_poisson,     // 2*sqrt(A1)+sqrt(A2)+2(sqrt(A3)+sqrt(A4+A5)); ks_uniform
  poincare_rademacher,  // explicit B-term assembly; ks_uniform
  norm_ratio,           // sqrt(sum a^4)/sum a^2; compared to ks_w3
  er_scale,             // (q Psi)^{-1/2}; compared to ks_w3
};

BoundKind bound_kind_from_string(const std::string& s);
std::string to_string(BoundKind k);

struct ExperimentSpec {
  Model model = Model::custom;
  std::map<std::string, std::string> model_params;
  uint64_t n_samples = 1;
  std::vector<int> weights_k = {1, 2, 3};
  uint64_t seed = 0;
  uint32_t replicas = 64;
  std::string output_path;
};

struct TailCheck {
  double z = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
};

// One experiment's results.  param_1..param_4 by model:
//   fbm:      (hurst, n, 0, 0)
//   rgg:      (t, r, dim, pattern code)
//   two_runs: (m, mode code: 0 = enumerate, 1 = mc, 0, 0)
//   er:       (n, p, pattern code, 0)
// Pattern codes: 1 = edge, 2 = triangle, 3 = path3 (0 otherwise).
// `extras` carries echoed constants (c_h, big_c, v, ...) and estimator
// detail (A/B terms, standard errors); it is serialized to JSON only.
struct ReportRow {
  std::string experiment_id;
  Model model = Model::custom;
  double param_1 = 0.0, param_2 = 0.0, param_3 = 0.0, param_4 = 0.0;
  uint64_t n_samples = 0;
  uint64_t seed = 0;
  double ks_uniform = 0.0;
  std::map<int, double> ks_weighted;  // holds at least k = 1, 2, 3
  BoundKind bound_kind = BoundKind::fourth_moment;
  double bound_value = 0.0;
  double ratio = 0.0;
  std::array<TailCheck, 3> tails{};  // z = 1, 2, 3
  std::map<std::string, double> extras;
};

// The distance a bound kind is compared against (ks_uniform for the three
// inequality kinds, ks_w3 for the two shape-ratio kinds).
double bound_distance(const ReportRow& row);

// Size parameter used for sorting and rate fits (fbm: n; rgg: t;
// two_runs: m; er: n).
double primary_size(const ReportRow& row);

// Deterministic for a fixed (spec, seed) at any thread count.
ReportRow run_experiment(const ExperimentSpec& spec, int threads = 1);

enum class ReportFormat { csv, json };

// The fixed CSV header line (no newline).
std::string report_csv_header();

// Rows are written sorted by (model, primary size, remaining parameters,
// seed); CSV uses the fixed header, JSON is an array of objects with the
// same field names plus `extras`.
void emit_report(std::span<const ReportRow> rows, ReportFormat format,
                 const std::string& path);

// Reads either format back (sniffed from the leading byte).  CSV drops
// `extras`; JSON restores everything.
std::vector<ReportRow> read_report(const std::string& path);

struct RateVerdict {
  RateFit fit;
  double expected_slope = 0.0;
  bool pass = false;  // |slope - expected| <= 0.15
};

// Fits log(ks_uniform) against log(primary size).  All rows must share one
// model and cover >= 3 distinct sizes.
RateVerdict rate_report(std::span<const ReportRow> rows, double expected_slope);

// Flat key=value file, '#' comments; keys: model, n_samples, seed,
// replicas, out, k (comma-separated), plus model parameters.  Unknown keys
// are rejected when the experiment runs.
ExperimentSpec parse_config_file(const std::string& path);

// Applies one key=value pair (same keys as the config file) to the spec.
void apply_setting(ExperimentSpec& spec, const std::string& key,
                   const std::string& value);

}  // namespace nuberry
