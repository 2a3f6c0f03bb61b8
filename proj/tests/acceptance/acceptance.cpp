// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// selected criterion fails. `acceptance 4 9` runs only criteria 4 and 9.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cimforge/experiments.hpp"
#include "cimforge/integrator.hpp"
#include "cimforge/metrics.hpp"
#include "cimforge/quantmap.hpp"
#include "cimforge/variation.hpp"

using namespace cimforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome golden_mac() {
  const DeviceParams dp;
  const auto ip = calibrate(dp);
  Crossbar xb(1, 1, 8);
  xb.program_binary(0, std::vector<int>{236});
  const auto r = run_mac(std::vector<int>{186}, xb, IntegratorTier::Regulated, dp, ip);
  const bool ok = r.digital == 171 && std::abs(r.v_out - 0.8316) <= 0.005;
  return {ok, fmt("code=%d v_out=%.4f mV", r.digital, r.v_out * 1e3)};
}

Outcome oracle_equivalence() {
  DeviceParams dp;
  dp.lambda_clm = 0.0;
  // full scale of 256 lines; ADC widened so one code is one unit of ideal_mac / 2^n
  auto ip = calibrate(dp, {}, 256);
  ip.adc_bits = 16;
  ip.adc_lsb_v /= 256.0;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> rows_d(1, 256), val(0, 255);
  int mismatches = 0;
  int saturated = 0;
  for (int t = 0; t < 1000; ++t) {
    const int rows = rows_d(rng);
    std::vector<int> x(rows), w(rows);
    for (int i = 0; i < rows; ++i) {
      x[i] = val(rng);
      w[i] = val(rng);
    }
    Crossbar xb(rows, 1, 8);
    xb.program_binary(0, w);
    const auto r = run_mac(x, xb, IntegratorTier::Regulated, dp, ip);
    saturated += r.saturated ? 1 : 0;
    if (r.digital != ideal_mac(x, w, 8) / 256) ++mismatches;
  }
  return {mismatches == 0 && saturated == 0, fmt("mismatches=%d saturated=%d of 1000", mismatches, saturated)};
}

Outcome worked_example() {
  const std::vector<double> r{1.05, 1.1, 1.125, 0.93};
  const std::vector<double> w{13.4};
  ResistanceMatrix m(1, 4);
  m.values = r;
  const double pseudo = pseudo_binary_quantize(13.4, r).residual;
  const double binary = binary_quantize_map(w, ResistanceMatrix(1, 4)).residuals[0];
  const double greedy = greedy_bitline_map(w, m).residuals[0];
  const double exhaustive = exhaustive_bitline_map(w, m).residuals[0];
  const bool ok = std::abs(pseudo + 0.33) <= 1e-12 && std::abs(binary - 0.4) <= 1e-12 &&
                  std::abs(greedy) <= 1e-12 && std::abs(exhaustive) <= 1e-12;
  return {ok, fmt("pseudo=%.3g binary=%.3g greedy=%.3g exhaustive=%.3g", pseudo, binary, greedy, exhaustive)};
}

Outcome monte_carlo() {
  const DeviceParams dp;
  McSetup s;  // 180 x 75 on 128 lines, 1400 trials
  const auto ip = calibrate(dp, {}, s.n_lines);
  const auto cmp = monte_carlo_compare(s, {0.2, 1, 0.05}, IntegratorTier::Regulated, dp, ip);
  const double b = cmp.binary.stats.std;
  const double g = cmp.greedy.stats.std;
  const bool b_ok = b >= 0.9 && b <= 2.6;
  const bool g_ok = g <= 0.25;
  const bool ratio_ok = b >= 5.0 * g;
  return {b_ok && g_ok && ratio_ok,
          fmt("binary std=%.3f [0.9,2.6]:%s greedy std=%.3f <=0.25:%s ratio=%.2f >=5:%s", b,
              b_ok ? "ok" : "no", g, g_ok ? "ok" : "no", g > 0 ? b / g : INFINITY,
              ratio_ok ? "ok" : "no")};
}

Outcome linearity() {
  const DeviceParams dp;
  const auto ip = calibrate(dp);
  std::map<IntegratorTier, double> inl;
  for (auto t : {IntegratorTier::PassiveNaive, IntegratorTier::OneR1T, IntegratorTier::OneR1T_WithT0,
                 IntegratorTier::Regulated}) {
    inl[t] = inl_dnl_from_sweep(duration_sweep_codes(t, dp, ip, 2048, 0.3)).max_abs_inl();
  }
  const double p = inl[IntegratorTier::PassiveNaive];
  const double a = inl[IntegratorTier::OneR1T];
  const double t0 = inl[IntegratorTier::OneR1T_WithT0];
  const bool order = p > a && p >= 1.2 * a && a > t0 && a >= 1.2 * t0;

  const auto lip = calibrate(dp, {}, 256);
  const double reg = input_lines_sweep(IntegratorTier::Regulated, dp, lip, 256, 255, 255).max_abs_deviation;
  double worst_unreg = INFINITY;
  for (auto t : {IntegratorTier::PassiveNaive, IntegratorTier::OneR1T, IntegratorTier::OneR1T_WithT0}) {
    worst_unreg = std::min(worst_unreg, input_lines_sweep(t, dp, lip, 256, 255, 255).max_abs_deviation);
  }
  const bool lines = worst_unreg >= 3.0 * reg;
  return {order && lines, fmt("inl passive=%.3f 1r1t=%.3f 1r1t-t0=%.3f; lines regulated=%.3f best unregulated=%.3f",
                              p, a, t0, reg, worst_unreg)};
}

Outcome method_ordering() {
  int held = 0;
  int total = 0;
  std::string bad;
  for (double s : {0.05, 0.1, 0.2, 0.3}) {
    for (int n : {4, 6, 8}) {
      const auto row = quantize_compare(s, n, 20, 256, 1);
      ++total;
      if (row.ratio_a <= row.ratio_c && row.ratio_c <= row.ratio_b) ++held;
      else bad += fmt(" (%.2f,%d)", s, n);
    }
  }
  return {held == total, fmt("A<=C<=B in %d/%d%s", held, total, bad.c_str())};
}

Outcome greedy_vs_exhaustive() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> rows_d(1, 4), cols_d(1, 6);
  int violations = 0;
  for (int t = 0; t < 500; ++t) {
    const int rows = rows_d(rng);
    const int cols = cols_d(rng);
    const auto r = sample_lrs_resistances(rows, cols, {0.2, rng(), 0.05});
    std::uniform_real_distribution<double> u(0.0, std::ldexp(1.0, cols) - 1.0);
    std::vector<double> w(rows);
    for (double& x : w) x = u(rng);
    const double e = exhaustive_bitline_map(w, r).total_squared_residual();
    const double g = greedy_bitline_map(w, r).total_squared_residual();
    const double id = pseudo_binary_map(w, r).total_squared_residual();
    if (e > g + 1e-12 || g > id + 1e-12) ++violations;
  }
  return {violations == 0, fmt("violations=%d of 500", violations)};
}

Outcome enob() {
  const DeviceParams dp;
  const auto ip = calibrate(dp);
  const auto d = dynamic_performance(dp, ip, {0.2, 1, 0.05}, 1024, 67);
  const double i = d.ideal.enob_bits;
  const double b = d.binary.enob_bits;
  const double g = d.greedy.enob_bits;
  const bool ok = std::abs(i - 8.0) <= 0.2 && b < i && g - b >= 0.5 * (i - b);
  return {ok, fmt("enob ideal=%.3f binary=%.3f greedy=%.3f", i, b, g)};
}

Outcome read_back() {
  const DeviceParams dp;
  auto ip = calibrate(dp, {}, 128);
  set_read_window_for_code(dp, ip, 85);
  const auto truth = sample_lrs_resistances(100, 1, {0.2, 5, 0.05});
  Crossbar xb(101, 1, 1);
  std::vector<double> r = truth.values;
  r.push_back(1.0);
  xb.set_lrs_values(r);
  xb.cell(100, 0).state = CellState::HRS;
  int within = 0;
  for (int i = 0; i < 100; ++i) {
    try {
      const auto rd = read_resistance(xb, i, 0, IntegratorTier::Regulated, dp, ip);
      const double measured = rd.resistance / dp.r_lrs_nominal;
      const double bound = read_relative_bound(rd, IntegratorTier::Regulated, dp, ip);
      if (!rd.over_range && std::abs(measured - truth.values[i]) / measured <= bound * (1 + 1e-9)) ++within;
    } catch (const UnmeasurableError&) {
    }
  }
  bool hrs = false;
  try {
    (void)read_resistance(xb, 100, 0, IntegratorTier::Regulated, dp, ip);
  } catch (const UnmeasurableError&) {
    hrs = true;
  }
  return {within == 100 && hrs, fmt("within bound %d/100, hrs unmeasurable=%s", within, hrs ? "yes" : "no")};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

Outcome determinism() {
  const fs::path configs = CIMFORGE_CONFIG_DIR;
  const fs::path out = fs::temp_directory_path() / "cimforge_acceptance_det";
  int identical = 0;
  int total = 0;
  std::string bad;
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(configs)) {
    if (e.path().extension() == ".ini") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    auto cfg = load_config(p);
    cfg.out_dir = out;
    fs::remove_all(out);
    run_experiment(cfg);
    const auto first = snapshot(out);
    fs::remove_all(out);
    run_experiment(cfg);
    const auto second = snapshot(out);
    fs::remove_all(out);
    ++total;
    if (first == second && !first.empty()) ++identical;
    else bad += " " + p.filename().string();
  }
  return {identical == total && total > 0, fmt("byte-identical %d/%d configs%s", identical, total, bad.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "golden MAC", 1, golden_mac},
      {2, "oracle equivalence", 30, oracle_equivalence},
      {3, "worked quantization example", 0, worked_example},
      {4, "Monte Carlo error spread", 60, monte_carlo},
      {5, "linearity orderings", 30, linearity},
      {6, "method ordering", 60, method_ordering},
      {7, "greedy vs exhaustive", 60, greedy_vs_exhaustive},
      {8, "ENOB property", 30, enob},
      {9, "resistance read-back", 10, read_back},
      {10, "determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs,
                c.budget_s == 0 ? "" : fmt(" < %.0f s%s", c.budget_s, in_time ? "" : " exceeded").c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
