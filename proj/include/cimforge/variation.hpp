#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "cimforge/device.hpp"
#include "cimforge/integrator.hpp"
#include "cimforge/metrics.hpp"
#include "cimforge/quantmap.hpp"

namespace cimforge {

struct VariationSpec {
  double sigma = 0.2;
  std::uint64_t seed = 1;
  double clip_min = 0.05;

  void validate() const;
};

std::uint64_t splitmix64(std::uint64_t x);
/// Independent stream seed for trial `index`, order-insensitive.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index);

/// i.i.d. N(1, sigma^2) values, redrawn while <= clip_min.
ResistanceMatrix sample_lrs_resistances(int rows, int cols, const VariationSpec& spec);

struct MeasuredArray {
  ResistanceMatrix values;          // normalized measured resistance
  std::vector<bool> unmeasurable;   // row-major; value is +inf there
  std::size_t unmeasurable_count = 0;
};

/// Reads every cell of the (all-LRS) array through the ADC.
MeasuredArray measure_array(const Crossbar& xb, IntegratorTier tier, const DeviceParams& dp,
                            const IntegratorParams& ip);

/// Conductance-like strength of each cell relative to a nominal one,
/// I(r R0) / I(R0) under the regulated read, which is what scales a bit's
/// contribution to the MAC. Unmeasurable cells map to the smallest
/// positive value.
ResistanceMatrix strength_matrix(const ResistanceMatrix& normalized, const DeviceParams& dp);

enum class MapMethod { Binary, Greedy };
std::string_view to_string(MapMethod m);
MapMethod parse_method(std::string_view name);

struct McSetup {
  int input_value = 180;
  int weight_value = 75;
  int n_lines = 128;
  int n_trials = 1400;
  /// Code a nominal cell reads back as during the measurement pass.
  double read_code = 85.0;
  /// Lines whose full-scale MAC spans the ADC range; the reference code is
  /// floor(ideal_mac / (2^n * full_scale_lines)). 0 means n_lines.
  int full_scale_lines = 0;
  int threads = 0;  // 0: CIM_FORGE_THREADS or hardware concurrency

  void validate(int n_bits) const;
  int resolved_full_scale() const { return full_scale_lines > 0 ? full_scale_lines : n_lines; }
};

struct McReport {
  std::string method;
  int trials = 0;
  std::vector<double> errors_lsb;  // by trial index
  ErrorStats stats;
  int saturated_trials = 0;
  std::size_t unmeasurable_cells = 0;
};

struct McComparison {
  McReport binary;
  McReport greedy;
};

/// Reference code the MC compares against.
std::int64_t mc_reference_code(const McSetup& setup, int n_bits);

/// ip is the MAC integrator configuration (normally calibrated to
/// setup.resolved_full_scale()); the measurement pass uses ip with its read
/// window set for setup.read_code.
McReport monte_carlo_mac(const McSetup& setup, const VariationSpec& spec, MapMethod method,
                         IntegratorTier tier, const DeviceParams& dp, const IntegratorParams& ip);

/// Both methods on the same sampled and measured arrays.
McComparison monte_carlo_compare(const McSetup& setup, const VariationSpec& spec,
                                 IntegratorTier tier, const DeviceParams& dp,
                                 const IntegratorParams& ip);

/// Worker count: min(requested or hardware, CIM_FORGE_THREADS, jobs), >= 1.
int resolve_threads(int requested, int jobs);

inline constexpr double kHistogramBinLsb = 0.05;

/// trial,error_lsb
void write_mc_csv(std::ostream& os, const McReport& report);
/// method=.. trials=.. mean=.. std=.. min=.. max=..
void write_mc_summary(std::ostream& os, const McReport& report);
/// bin_start_lsb,count over the occupied range.
void write_histogram_csv(std::ostream& os, const std::vector<double>& errors,
                         double bin = kHistogramBinLsb);

}  // namespace cimforge
