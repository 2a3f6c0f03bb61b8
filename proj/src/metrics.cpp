#include "cimforge/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cimforge/format.hpp"

namespace cimforge {

ErrorStats error_stats(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("error_stats: empty input");
  ErrorStats s;
  double m2 = 0.0;
  s.min = errors.front();
  s.max = errors.front();
  for (double x : errors) {
    ++s.count;
    const double d = x - s.mean;
    s.mean += d / static_cast<double>(s.count);
    m2 += d * (x - s.mean);
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.std = s.count > 1 ? std::sqrt(m2 / static_cast<double>(s.count - 1)) : 0.0;
  return s;
}

double LinearityReport::max_abs_inl() const {
  return std::max(std::abs(inl_range.first), std::abs(inl_range.second));
}

double LinearityReport::max_abs_dnl() const {
  return std::max(std::abs(dnl_range.first), std::abs(dnl_range.second));
}

namespace {

// Builds the report from code widths (in any unit) of the interior codes
// first_code .. first_code + widths.size() - 1.
LinearityReport from_widths(int first_code, const std::vector<double>& widths) {
  double total = 0.0;
  for (double w : widths) total += w;
  if (!(total > 0)) throw std::invalid_argument("linearity: no code transitions in range");
  const double ideal = total / static_cast<double>(widths.size());

  LinearityReport r;
  r.first_code = first_code;
  r.dnl.reserve(widths.size());
  r.inl.reserve(widths.size() + 1);
  r.inl.push_back(0.0);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const double d = widths[i] / ideal - 1.0;
    r.dnl.push_back(d);
    r.inl.push_back(r.inl.back() + d);
    if (widths[i] == 0.0) r.missing_codes.push_back(first_code + static_cast<int>(i));
  }
  auto [dmin, dmax] = std::minmax_element(r.dnl.begin(), r.dnl.end());
  auto [imin, imax] = std::minmax_element(r.inl.begin(), r.inl.end());
  r.dnl_range = {*dmin, *dmax};
  r.inl_range = {*imin, *imax};
  return r;
}

}  // namespace

LinearityReport inl_dnl_from_sweep(std::span<const int> transfer) {
  if (transfer.empty()) throw std::invalid_argument("inl_dnl_from_sweep: empty transfer");
  const auto [lo_it, hi_it] = std::minmax_element(transfer.begin(), transfer.end());
  const int kmin = *lo_it;
  const int kmax = *hi_it;
  if (kmax - kmin < 2) {
    throw std::invalid_argument("inl_dnl_from_sweep: transfer spans fewer than three codes");
  }
  // t[k - kmin - 1]: first step whose code reaches k
  std::vector<std::size_t> t(static_cast<std::size_t>(kmax - kmin));
  std::size_t i = 0;
  for (int k = kmin + 1; k <= kmax; ++k) {
    while (transfer[i] < k) ++i;
    t[k - kmin - 1] = i;
  }
  std::vector<double> widths(t.size() - 1);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    widths[k] = static_cast<double>(t[k + 1] - t[k]);
  }
  return from_widths(kmin + 1, widths);
}

std::size_t code_density_min_samples(int adc_bits) {
  if (adc_bits < 2 || adc_bits > 24) throw std::invalid_argument("code density: adc_bits out of range");
  return std::size_t{100} << adc_bits;
}

LinearityReport code_density_linearity(std::span<const int> samples, int adc_bits) {
  const std::size_t need = code_density_min_samples(adc_bits);
  if (samples.size() < need) {
    throw std::invalid_argument("code density: " + std::to_string(samples.size()) +
                                " samples given, at least " + std::to_string(need) +
                                " required");
  }
  const int top = (1 << adc_bits) - 1;
  std::vector<double> hist(static_cast<std::size_t>(top) + 1, 0.0);
  for (int c : samples) {
    if (c < 0 || c > top) throw std::invalid_argument("code density: code " + std::to_string(c) + " out of range");
    hist[c] += 1.0;
  }
  return from_widths(1, std::vector<double>(hist.begin() + 1, hist.end() - 1));
}

double enob_from_sndr(double sndr_db) { return (sndr_db - 1.76) / 6.02; }

SpectrumMetrics spectrum_metrics(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 8 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("spectrum: record length " + std::to_string(n) +
                                " is not a power of two >= 8");
  }
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);

  const std::size_t half = n / 2;
  std::vector<double> in(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    in[i] = samples[i] - mean;
    var += in[i] * in[i];
  }
  if (!(var > 1e-24 * static_cast<double>(n) * std::max(mean * mean, 1.0))) {
    throw std::invalid_argument("spectrum: record has no tone");
  }
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (half + 1)));
  if (out == nullptr) throw std::bad_alloc();
  {
    // the planner is not thread safe
    static std::mutex planner;
    fftw_plan plan;
    {
      std::lock_guard lock(planner);
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(planner);
    fftw_destroy_plan(plan);
  }
  std::vector<double> power(half + 1, 0.0);
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 1; k <= half; ++k) {
    const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    power[k] = (k == half ? 1.0 : 2.0) * mag2 * norm;
  }
  fftw_free(out);

  const auto fund = static_cast<std::size_t>(
      std::max_element(power.begin() + 1, power.end()) - power.begin());
  const double p_fund = power[fund];
  double rest = 0.0;
  double spur = 0.0;
  for (std::size_t k = 1; k <= half; ++k) {
    if (k == fund) continue;
    rest += power[k];
    spur = std::max(spur, power[k]);
  }
  const double inf = std::numeric_limits<double>::infinity();
  SpectrumMetrics m;
  m.fundamental_bin = fund;
  m.sndr_db = rest > 0 ? 10.0 * std::log10(p_fund / rest) : inf;
  m.sfdr_db = spur > 0 ? 10.0 * std::log10(p_fund / spur) : inf;
  m.enob_bits = enob_from_sndr(m.sndr_db);
  m.magnitude_db.resize(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    m.magnitude_db[k] = power[k] > 0 ? std::max(10.0 * std::log10(power[k] / p_fund), -300.0) : -300.0;
  }
  return m;
}

void write_linearity_csv(std::ostream& os, const LinearityReport& report) {
  os << "code,inl,dnl\n";
  for (std::size_t i = 0; i < report.inl.size(); ++i) {
    os << report.first_code + static_cast<int>(i) << ',' << format_real(report.inl[i]) << ',';
    if (i < report.dnl.size()) os << format_real(report.dnl[i]);
    os << '\n';
  }
}

void write_spectrum_csv(std::ostream& os, const SpectrumMetrics& metrics) {
  os << "bin,magnitude_db\n";
  for (std::size_t k = 0; k < metrics.magnitude_db.size(); ++k) {
    os << k << ',' << format_real(metrics.magnitude_db[k]) << '\n';
  }
}

void write_spectrum_summary(std::ostream& os, const SpectrumMetrics& metrics) {
  os << "sfdr_db = " << format_real(metrics.sfdr_db) << '\n'
     << "sndr_db = " << format_real(metrics.sndr_db) << '\n'
     << "enob_bits = " << format_real(metrics.enob_bits) << '\n';
}

}  // namespace cimforge
