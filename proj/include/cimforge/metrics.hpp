#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace cimforge {

struct ErrorStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample std, n - 1 divisor (0 for a single value)
  double min = 0.0;
  double max = 0.0;
};

/// Throws std::invalid_argument on empty input.
ErrorStats error_stats(std::span<const double> errors);

/// Endpoint-fit linearity of a converter transfer. Entries are indexed by
/// code starting at first_code: inl[i] is the deviation of the lower edge
/// of code first_code + i, dnl[i] the width error of that code. inl has one
/// more entry than dnl (the top transition), and inl[i + 1] = inl[i] + dnl[i].
struct LinearityReport {
  int first_code = 0;
  std::vector<double> inl;
  std::vector<double> dnl;
  std::pair<double, double> inl_range{0.0, 0.0};
  std::pair<double, double> dnl_range{0.0, 0.0};
  std::vector<int> missing_codes;  // DNL = -1

  double max_abs_inl() const;
  double max_abs_dnl() const;
};

/// From the output code at each step of a monotone stimulus grid. Needs at
/// least three distinct codes.
LinearityReport inl_dnl_from_sweep(std::span<const int> transfer);

/// Histogram estimator over the full 0..2^adc_bits-1 range; the two end
/// codes are excluded. Refuses fewer than 100 * 2^adc_bits samples.
LinearityReport code_density_linearity(std::span<const int> samples, int adc_bits);

/// Minimum sample count code_density_linearity accepts.
std::size_t code_density_min_samples(int adc_bits);

struct SpectrumMetrics {
  double sfdr_db = 0.0;
  double sndr_db = 0.0;
  double enob_bits = 0.0;
  std::size_t fundamental_bin = 0;
  std::vector<double> magnitude_db;  // one-sided, dB relative to the fundamental
};

double enob_from_sndr(double sndr_db);

/// Rectangular-window spectrum of a coherently sampled sine record. The
/// length must be a power of two (>= 8); a record without a tone is refused.
SpectrumMetrics spectrum_metrics(std::span<const double> samples);

/// code,inl,dnl (dnl is empty on the top transition row).
void write_linearity_csv(std::ostream& os, const LinearityReport& report);
/// bin,magnitude_db
void write_spectrum_csv(std::ostream& os, const SpectrumMetrics& metrics);
/// key = value lines for sfdr_db, sndr_db, enob_bits.
void write_spectrum_summary(std::ostream& os, const SpectrumMetrics& metrics);

}  // namespace cimforge
