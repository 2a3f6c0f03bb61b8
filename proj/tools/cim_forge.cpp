// cim_forge: experiment runner and weight-mapping tool.
#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cimforge/experiments.hpp"
#include "cimforge/format.hpp"
#include "cimforge/quantmap.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

struct QuantizeArgs {
  std::string weights;
  std::string resistances;
  std::string method = "greedy";
  int bits = 0;
  std::string out;
  bool quiet = false;
};

int do_run(const RunArgs& a) {
  cimforge::ExperimentConfig cfg = cimforge::load_config(a.config);
  if (a.seed) cfg.variation.seed = *a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  const std::string summary = cimforge::run_experiment(cfg);
  if (!a.quiet) std::cout << summary;
  return 0;
}

cimforge::ResistanceMatrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cimforge::ConfigError("cannot read resistances '" + path + "'");
  try {
    return cimforge::read_resistance_csv(in);
  } catch (const std::exception& e) {
    throw cimforge::ConfigError(path + ": " + e.what());
  }
}

std::pair<std::vector<double>, int> read_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cimforge::ConfigError("cannot read weights '" + path + "'");
  try {
    return cimforge::read_numbers_csv(in);
  } catch (const std::exception& e) {
    throw cimforge::ConfigError(path + ": " + e.what());
  }
}

int do_quantize(const QuantizeArgs& a) {
  const auto [weights, weight_rows] = read_weights(a.weights);
  const auto r = read_matrix(a.resistances);
  if (static_cast<int>(weights.size()) != r.rows || weight_rows != r.rows) {
    throw cimforge::ConfigError("shape mismatch: weights " + std::to_string(weights.size()) +
                                "x1 vs resistances " + std::to_string(r.rows) + "x" +
                                std::to_string(r.cols));
  }
  if (a.bits != 0 && a.bits != r.cols) {
    throw cimforge::ConfigError("shape mismatch: n = " + std::to_string(a.bits) +
                                " vs resistances " + std::to_string(r.rows) + "x" +
                                std::to_string(r.cols));
  }
  cimforge::WeightMapping m;
  if (a.method == "binary") m = cimforge::binary_quantize_map(weights, r);
  else if (a.method == "pseudo") m = cimforge::pseudo_binary_map(weights, r);
  else if (a.method == "greedy") m = cimforge::greedy_bitline_map(weights, r);
  else if (a.method == "exhaustive") m = cimforge::exhaustive_bitline_map(weights, r);
  else throw cimforge::ConfigError("unknown method '" + a.method + "'");

  const double ratio = cimforge::quant_error_ratio(weights, m);
  if (a.out.empty()) {
    cimforge::write_mapping(std::cout, m);
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + a.out + "'");
    cimforge::write_mapping(f, m);
  }
  if (!a.quiet || a.out.empty()) {
    std::cout << "quant_error_ratio = " << cimforge::format_real(ratio) << '\n';
    if (m.identity_fallback) std::cout << "note = greedy order lost to identity order; identity kept\n";
    if (m.loss_sign_flipped) std::cout << "note = greedy loss had a non-positive max residual\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RRAM compute-in-memory core simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  run_cmd->add_option("--config", run.config, "experiment config (INI)")->required();
  run_cmd->add_option("--seed", run.seed, "seed, overrides the config");
  run_cmd->add_option("--out", run.out, "output directory, overrides the config");
  run_cmd->add_flag("--quiet", run.quiet, "do not print the summary");

  QuantizeArgs q;
  auto* q_cmd = app.add_subcommand("quantize", "map weights onto measured resistances");
  q_cmd->add_option("--weights", q.weights, "weights CSV, one per row")->required();
  q_cmd->add_option("--resistances", q.resistances, "normalized resistance CSV, rows x n")->required();
  q_cmd->add_option("--method", q.method, "binary | pseudo | greedy | exhaustive")
      ->check(CLI::IsMember({"binary", "pseudo", "greedy", "exhaustive"}));
  q_cmd->add_option("--bits", q.bits, "bits per weight (must match the resistance columns)");
  q_cmd->add_option("--out", q.out, "mapping file (stdout if omitted)");
  q_cmd->add_flag("--quiet", q.quiet, "only write the mapping");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "cim_forge: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*run_cmd) return do_run(run);
    return do_quantize(q);
  } catch (const cimforge::ConfigError& e) {
    std::cerr << "cim_forge: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "cim_forge: " << e.what() << '\n';
    return kExitRuntime;
  }
}
