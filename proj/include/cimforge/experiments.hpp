#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimforge/device.hpp"
#include "cimforge/integrator.hpp"
#include "cimforge/metrics.hpp"
#include "cimforge/variation.hpp"

namespace cimforge {

/// Bad or missing configuration; the CLI maps it to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  Mac,
  LinearitySweep,
  InputLinesSweep,
  MonteCarlo,
  QuantizeCompare,
  ReadResistance,
  DynamicPerf,
};

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);

/// Parsed [device], [integrator], [variation] and [experiment] sections.
/// Experiment-specific keys stay as text in `options` and are validated by
/// the experiment that reads them.
struct ExperimentConfig {
  DeviceParams device;
  IntegratorParams integrator;
  IntegratorTier tier = IntegratorTier::Regulated;
  std::optional<int> full_scale_lines;  // calibration load; default per kind
  std::optional<double> t_int;
  std::optional<double> t_read;
  VariationSpec variation;
  ExperimentKind kind = ExperimentKind::Mac;
  std::filesystem::path out_dir = "out";
  std::map<std::string, std::string> options;

  /// Calibration load: the configured value or the kind's default.
  int resolved_full_scale() const;
  /// Integrator parameters after calibration and overrides.
  IntegratorParams resolved_integrator() const;
};

/// Reads an INI file. Unknown sections or keys throw ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::istream& is);
/// Writes every setting, including defaults and resolved timing.
void write_resolved_config(std::ostream& os, const ExperimentConfig& cfg);

/// Runs the configured experiment into cfg.out_dir (summary.txt, CSVs and
/// resolved.cfg). Files already written are removed if the run fails.
/// Returns the summary text.
std::string run_experiment(const ExperimentConfig& cfg);

// --- building blocks shared with the tests

/// Integrates one nominal LRS cell for durations 0..T (steps + 1 points)
/// where T takes the integrating node from v_init down by `swing`; the
/// drop is digitized by an adc_bits converter spanning `swing`.
std::vector<int> duration_sweep_codes(IntegratorTier tier, const DeviceParams& dp,
                                      const IntegratorParams& ip, int steps, double swing);

struct LinesSweep {
  std::vector<int> lines;
  std::vector<int> codes;
  std::vector<double> deviation;  // code minus endpoint line, LSB
  double max_abs_deviation = 0.0;
};

/// MAC codes for 1..max_lines identical active rows (input x weight),
/// compared against the line through the first and last points.
LinesSweep input_lines_sweep(IntegratorTier tier, const DeviceParams& dp,
                             const IntegratorParams& ip, int max_lines, int input, int weight);

struct QuantCompareRow {
  double sigma = 0.0;
  int n_bits = 0;
  double ratio_a = 0.0;  // greedy + pseudo-binary
  double ratio_b = 0.0;  // binary
  double ratio_c = 0.0;  // pseudo-binary, identity order
};

/// Mean quantization error ratio of the three methods over `vectors`
/// Gaussian weight vectors of `length` entries, each on its own sampled
/// resistance matrix.
QuantCompareRow quantize_compare(double sigma, int n_bits, int vectors, int length,
                                 std::uint64_t seed, double clip_min = 0.05);

/// |w| scaled onto the n-bit grid by step_size(max|w|, 0, n), clipped to
/// 2^n - 1.
std::vector<double> scale_weights(const std::vector<double>& w, int n_bits);

struct DynamicPerf {
  SpectrumMetrics ideal;
  SpectrumMetrics binary;
  SpectrumMetrics greedy;
};

/// One row with input 2^n - 1 whose weight follows a coherent full-scale
/// sine (`cycles` periods over `samples` points); the MAC codes are
/// analysed spectrally. `ideal` uses nominal cells, the others one sampled
/// cell row mapped by the named method from its measured strengths.
DynamicPerf dynamic_performance(const DeviceParams& dp, const IntegratorParams& ip,
                                const VariationSpec& spec, int samples, int cycles,
                                double read_code = 85.0);

}  // namespace cimforge
