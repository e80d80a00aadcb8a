// Command-line driver: one subcommand per model plus `stein eval`,
// config-file execution (`run`), and report post-processing (`report`).

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nuberry/harness.hpp"
#include "nuberry/stein.hpp"

namespace {

using nuberry::ExperimentSpec;
using nuberry::ReportFormat;
using nuberry::ReportRow;

ReportFormat format_for(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0
             ? ReportFormat::json
             : ReportFormat::csv;
}

void print_row(const ReportRow& row) {
  std::printf("%s: ks_uniform=%.6g ks_w3=%.6g bound[%s]=%.6g ratio=%.6g\n",
              row.experiment_id.c_str(), row.ks_uniform, row.ks_weighted.at(3),
              nuberry::to_string(row.bound_kind).c_str(), row.bound_value, row.ratio);
}

int run_and_emit(const ExperimentSpec& spec, int threads) {
  ReportRow row = nuberry::run_experiment(spec, threads);
  print_row(row);
  if (!spec.output_path.empty()) {
    std::vector<ReportRow> rows{row};
    nuberry::emit_report(rows, format_for(spec.output_path), spec.output_path);
    std::printf("wrote %s\n", spec.output_path.c_str());
  }
  return 0;
}

// Options shared by every model subcommand.
struct CommonOpts {
  uint64_t samples = 100000;
  uint64_t seed = 0;
  uint64_t replicas = 64;
  int threads = 1;
  std::string k_list = "1,2,3";
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--samples", samples, "Monte Carlo sample count");
    cmd->add_option("--seed", seed, "base RNG seed");
    cmd->add_option("--replicas", replicas, "independent replica streams");
    cmd->add_option("--threads", threads, "worker threads (result-invariant)");
    cmd->add_option("--k", k_list, "comma-separated weighted-distance orders");
    cmd->add_option("--out", out, "report path (.csv or .json)");
  }

  void fill(ExperimentSpec& spec) const {
    spec.n_samples = samples;
    spec.seed = seed;
    nuberry::apply_setting(spec, "replicas", std::to_string(replicas));
    nuberry::apply_setting(spec, "k", k_list);
    spec.output_path = out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification toolkit for normal-approximation bounds"};
  app.require_subcommand(1);

  // stein eval --z Z --w W
  CLI::App* stein_cmd = app.add_subcommand("stein", "Stein-equation kernel");
  stein_cmd->require_subcommand(1);
  CLI::App* stein_eval = stein_cmd->add_subcommand("eval", "evaluate f_z and f'_z");
  double stein_z = 0.0, stein_w = 0.0;
  stein_eval->add_option("--z", stein_z, "jump location")->required();
  stein_eval->add_option("--w", stein_w, "evaluation point")->required();

  // fbm
  CLI::App* fbm = app.add_subcommand("fbm", "quadratic variation of fBm increments");
  CommonOpts fbm_opts;
  double fbm_hurst = 0.5;
  uint64_t fbm_n = 64;
  double fbm_c_h = 1.0;
  fbm->add_option("--hurst", fbm_hurst, "Hurst index in (0, 3/4]")->required();
  fbm->add_option("--n", fbm_n, "number of increments")->required();
  fbm->add_option("--c-h", fbm_c_h, "rate constant echo (default 1)");
  fbm_opts.attach(fbm);

  // rgg
  CLI::App* rgg = app.add_subcommand("rgg", "subgraph counts of a random geometric graph");
  CommonOpts rgg_opts;
  rgg_opts.samples = 200000;
  double rgg_t = 50.0, rgg_r = 0.1, rgg_v = 1.0;
  uint64_t rgg_dim = 2, rgg_outer = 200, rgg_inner = 200, rgg_pilot = 200000;
  std::string rgg_pattern = "edge";
  rgg->add_option("--t", rgg_t, "Poisson intensity")->required();
  rgg->add_option("--r", rgg_r, "connection radius")->required();
  rgg->add_option("--dim", rgg_dim, "window dimension (unit cube)");
  rgg->add_option("--pattern", rgg_pattern, "edge | triangle | path3");
  rgg->add_option("--outer", rgg_outer, "tuple replicas for the A-terms");
  rgg->add_option("--inner", rgg_inner, "process replicas per tuple");
  rgg->add_option("--pilot", rgg_pilot, "pilot size for standardization (>= 1e5)");
  rgg->add_option("--v", rgg_v, "variance constant echo (default 1)");
  rgg_opts.attach(rgg);

  // runs2
  CLI::App* runs2 = app.add_subcommand("runs2", "weighted 2-runs on a Rademacher chain");
  CommonOpts runs2_opts;
  runs2_opts.samples = 1000000;
  std::string runs2_weights, runs2_mode;
  uint64_t runs2_uniform = 0;
  runs2->add_option("--weights", runs2_weights, "file of weights (whitespace-separated)");
  runs2->add_option("--uniform", runs2_uniform, "m unit weights");
  runs2->add_option("--mode", runs2_mode, "enumerate | mc (default by size)");
  runs2_opts.attach(runs2);

  // er
  CLI::App* er = app.add_subcommand("er", "subgraph counts of an Erdos-Renyi graph");
  CommonOpts er_opts;
  er_opts.samples = 200000;
  uint64_t er_n = 5, er_pilot = 200000;
  double er_p = 0.5;
  std::string er_pattern = "triangle", er_standardize = "auto";
  er->add_option("--n", er_n, "vertex count")->required();
  er->add_option("--p", er_p, "edge probability")->required();
  er->add_option("--pattern", er_pattern, "edge | triangle | path3");
  er->add_option("--pilot", er_pilot, "pilot size for standardization (>= 1e5)");
  er->add_option("--standardize", er_standardize, "exact | pilot | auto");
  er_opts.attach(er);

  // run --config
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string run_config;
  std::vector<std::string> run_sets;
  int run_threads = 1;
  run->add_option("--config", run_config, "key=value config file")->required();
  run->add_option("--set", run_sets, "override key=value (repeatable)");
  run->add_option("--threads", run_threads, "worker threads");

  // report
  CLI::App* report = app.add_subcommand("report", "inspect or fit a report file");
  std::string report_in;
  bool report_fit = false;
  double report_exponent = -0.5;
  report->add_option("--in", report_in, "report path (.csv or .json)")->required();
  report->add_flag("--fit-rate", report_fit, "fit log distance vs log size");
  report->add_option("--exponent", report_exponent, "expected log-log slope");

  CLI11_PARSE(app, argc, argv);

  try {
    if (stein_eval->parsed()) {
      double f = nuberry::stein::stein_solution(stein_z, stein_w);
      std::printf("f=%.17g\n", f);
      try {
        std::printf("fprime=%.17g\n", nuberry::stein::stein_derivative(stein_z, stein_w));
      } catch (const nuberry::stein::JumpError&) {
        std::printf("fprime_left=%.17g\nfprime_right=%.17g\n",
                    nuberry::stein::stein_derivative_limit(stein_z,
                                                           nuberry::stein::Side::left),
                    nuberry::stein::stein_derivative_limit(stein_z,
                                                           nuberry::stein::Side::right));
      }
      return 0;
    }
    if (fbm->parsed()) {
      ExperimentSpec spec;
      spec.model = nuberry::Model::fbm;
      fbm_opts.fill(spec);
      spec.model_params["hurst"] = std::to_string(fbm_hurst);
      spec.model_params["n"] = std::to_string(fbm_n);
      spec.model_params["c_h"] = std::to_string(fbm_c_h);
      return run_and_emit(spec, fbm_opts.threads);
    }
    if (rgg->parsed()) {
      ExperimentSpec spec;
      spec.model = nuberry::Model::rgg;
      rgg_opts.fill(spec);
      spec.model_params["t"] = std::to_string(rgg_t);
      spec.model_params["r"] = std::to_string(rgg_r);
      spec.model_params["dim"] = std::to_string(rgg_dim);
      spec.model_params["pattern"] = rgg_pattern;
      spec.model_params["outer"] = std::to_string(rgg_outer);
      spec.model_params["inner"] = std::to_string(rgg_inner);
      spec.model_params["pilot"] = std::to_string(rgg_pilot);
      spec.model_params["v"] = std::to_string(rgg_v);
      return run_and_emit(spec, rgg_opts.threads);
    }
    if (runs2->parsed()) {
      ExperimentSpec spec;
      spec.model = nuberry::Model::two_runs;
      runs2_opts.fill(spec);
      if (!runs2_weights.empty()) spec.model_params["weights_file"] = runs2_weights;
      else if (runs2_uniform > 0) spec.model_params["m"] = std::to_string(runs2_uniform);
      else throw std::domain_error("runs2: give --weights FILE or --uniform M");
      if (!runs2_mode.empty()) spec.model_params["mode"] = runs2_mode;
      return run_and_emit(spec, runs2_opts.threads);
    }
    if (er->parsed()) {
      ExperimentSpec spec;
      spec.model = nuberry::Model::er;
      er_opts.fill(spec);
      spec.model_params["n"] = std::to_string(er_n);
      spec.model_params["p"] = std::to_string(er_p);
      spec.model_params["pattern"] = er_pattern;
      spec.model_params["pilot"] = std::to_string(er_pilot);
      spec.model_params["standardize"] = er_standardize;
      return run_and_emit(spec, er_opts.threads);
    }
    if (run->parsed()) {
      ExperimentSpec spec = nuberry::parse_config_file(run_config);
      for (const std::string& kv : run_sets) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw std::domain_error("--set needs key=value, got '" + kv + "'");
        nuberry::apply_setting(spec, kv.substr(0, eq), kv.substr(eq + 1));
      }
      return run_and_emit(spec, run_threads);
    }
    if (report->parsed()) {
      std::vector<ReportRow> rows = nuberry::read_report(report_in);
      std::printf("%zu row(s)\n", rows.size());
      for (const ReportRow& row : rows) print_row(row);
      if (report_fit) {
        nuberry::RateVerdict v = nuberry::rate_report(rows, report_exponent);
        std::printf("slope=%.6g expected=%.6g r2=%.6g verdict=%s\n", v.fit.slope,
                    v.expected_slope, v.fit.r2, v.pass ? "PASS" : "FAIL");
        return v.pass ? 0 : 3;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
