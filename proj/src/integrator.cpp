#include "cimforge/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "cimforge/format.hpp"

namespace cimforge {

namespace {

// Floating-point slack at exact code boundaries, in LSB. Ideal MAC outputs
// land on multiples of 2^-2n LSB, far coarser than this.
constexpr double kAdcEdgeTolerance = 1e-7;

}  // namespace

void IntegratorParams::validate() const {
  if (n_bits < 1 || n_bits > 16) throw std::invalid_argument("integrator: n_bits must be in [1, 16]");
  if (!(c_f > 0)) throw std::invalid_argument("integrator: c_f must be > 0");
  if (!(t_int > 0)) throw std::invalid_argument("integrator: t_int must be > 0");
  if (!(v_init > 0)) throw std::invalid_argument("integrator: v_init must be > 0");
  if (adc_bits < 1 || adc_bits > 30) throw std::invalid_argument("integrator: adc_bits must be in [1, 30]");
  if (!(adc_lsb_v > 0)) throw std::invalid_argument("integrator: adc_lsb_v must be > 0");
  if (!(t_read > 0)) throw std::invalid_argument("integrator: t_read must be > 0");
  if (substeps < 1) throw std::invalid_argument("integrator: substeps must be >= 1");
}

double IntegratorParams::cap_ratio(int k) const { return std::ldexp(1.0, k - n_bits); }

IntegratorParams calibrate(const DeviceParams& device, IntegratorParams base,
                           int full_scale_lines) {
  device.validate();
  if (full_scale_lines < 1) throw std::invalid_argument("calibrate: full_scale_lines must be >= 1");
  const double i_nom = nominal_regulated_current(device);
  base.t_int = kCalibratedCycleDrop * base.c_f / (full_scale_lines * i_nom);
  base.adc_lsb_v = std::ldexp(kCalibratedCycleDrop, -base.n_bits);
  base.t_read = kDefaultReadWindowRatio * base.t_int;
  base.validate();
  return base;
}

double nominal_cell_drop(const DeviceParams& device, const IntegratorParams& ip) {
  return nominal_regulated_current(device) * ip.t_int / ip.c_f;
}

void set_read_window_for_code(const DeviceParams& device, IntegratorParams& ip,
                              double code) {
  if (!(code > 0)) throw std::invalid_argument("read window: code must be > 0");
  ip.t_read = 2.0 * code * ip.adc_lsb_v * ip.c_f / nominal_regulated_current(device);
}

// ---------------------------------------------------------------- Crossbar

Crossbar::Crossbar(int rows, int groups, int n_bits)
    : rows_(rows), groups_(groups), n_bits_(n_bits) {
  if (rows < 1 || groups < 1 || n_bits < 1) {
    throw std::invalid_argument("crossbar: rows, groups and n_bits must be >= 1");
  }
  cells_.resize(static_cast<std::size_t>(rows) * groups * n_bits);
  order_.resize(static_cast<std::size_t>(groups) * n_bits);
  for (int g = 0; g < groups; ++g) {
    std::iota(order_.begin() + g * n_bits, order_.begin() + (g + 1) * n_bits, 0);
  }
}

void Crossbar::check(int row, int col) const {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols()) {
    throw std::out_of_range("crossbar: cell (" + std::to_string(row) + ", " +
                            std::to_string(col) + ") out of range");
  }
}

RramCell& Crossbar::cell(int row, int col) {
  check(row, col);
  return cells_[static_cast<std::size_t>(row) * cols() + col];
}

const RramCell& Crossbar::cell(int row, int col) const {
  check(row, col);
  return cells_[static_cast<std::size_t>(row) * cols() + col];
}

int Crossbar::bit_line(int group, int k) const {
  if (group < 0 || group >= groups_ || k < 0 || k >= n_bits_) {
    throw std::out_of_range("crossbar: bit position out of range");
  }
  return group * n_bits_ + order_[group * n_bits_ + (n_bits_ - 1 - k)];
}

void Crossbar::set_bit_order(int group, std::span<const int> msb_first) {
  if (group < 0 || group >= groups_) throw std::out_of_range("crossbar: group out of range");
  if (static_cast<int>(msb_first.size()) != n_bits_) {
    throw std::invalid_argument("crossbar: bit order needs n_bits entries");
  }
  std::vector<int> sorted(msb_first.begin(), msb_first.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n_bits_; ++i) {
    if (sorted[i] != i) throw std::invalid_argument("crossbar: bit order is not a permutation");
  }
  std::copy(msb_first.begin(), msb_first.end(), order_.begin() + group * n_bits_);
}

std::span<const int> Crossbar::bit_order(int group) const {
  if (group < 0 || group >= groups_) throw std::out_of_range("crossbar: group out of range");
  return {order_.data() + group * n_bits_, static_cast<std::size_t>(n_bits_)};
}

void Crossbar::program_binary(int group, std::span<const int> weights) {
  if (static_cast<int>(weights.size()) != rows_) {
    throw std::invalid_argument("crossbar: one weight per row required");
  }
  const int top = (1 << n_bits_) - 1;
  for (int r = 0; r < rows_; ++r) {
    if (weights[r] < 0 || weights[r] > top) {
      throw std::domain_error("crossbar: weight " + std::to_string(weights[r]) +
                              " outside the n-bit range");
    }
    for (int k = 0; k < n_bits_; ++k) {
      cell(r, bit_line(group, k)).state = ((weights[r] >> k) & 1) ? CellState::LRS : CellState::HRS;
    }
  }
}

void Crossbar::program_states(int group, int row, const std::vector<bool>& lrs_msb_first) {
  if (static_cast<int>(lrs_msb_first.size()) != n_bits_) {
    throw std::invalid_argument("crossbar: n_bits states required");
  }
  for (int p = 0; p < n_bits_; ++p) {
    cell(row, bit_line(group, n_bits_ - 1 - p)).state =
        lrs_msb_first[p] ? CellState::LRS : CellState::HRS;
  }
}

void Crossbar::set_lrs_values(std::span<const double> r_norm) {
  if (r_norm.size() != cells_.size()) throw std::invalid_argument("crossbar: r_norm shape mismatch");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!(r_norm[i] > 0)) throw std::domain_error("crossbar: r_norm must be > 0");
    cells_[i].r_norm = r_norm[i];
  }
}

// ------------------------------------------------------------ integration

BitLineResult integrate_bit_line(std::span<const RramCell> active, IntegratorTier tier,
                                 const DeviceParams& dp, const IntegratorParams& ip,
                                 double v_start, double duration) {
  BitLineResult out{v_start, false, false};
  if (active.empty() || duration <= 0) return out;

  double v = v_start;
  switch (tier) {
    case IntegratorTier::Regulated: {
      const double vd2 = regulator_vd2(dp);
      double i = 0.0;
      for (const auto& c : active) i += cell_current(c, tier, v, vd2, dp);
      v -= i * duration / ip.c_f;
      break;
    }
    case IntegratorTier::OneR1T_WithT0: {
      double sat = 0.0;
      for (const auto& c : active) sat += cell_current(c, tier, v, 0.0, dp);
      const NodeVoltage node = cascode_node_for_load(sat, dp.cascode_gate(), dp);
      out.node_clamped = node.saturated;
      double i = 0.0;
      for (const auto& c : active) i += cell_current(c, tier, v, node.volts, dp);
      v -= i * duration / ip.c_f;
      break;
    }
    case IntegratorTier::PassiveNaive:
    case IntegratorTier::OneR1T: {
      const double h = duration / ip.substeps;
      for (int s = 0; s < ip.substeps && v > 0; ++s) {
        double i = 0.0;
        for (const auto& c : active) i += cell_current(c, tier, v, 0.0, dp);
        v -= i * h / ip.c_f;
      }
      break;
    }
  }
  if (v < 0) {
    v = 0;
    out.saturated = true;
  }
  out.v = v;
  return out;
}

CycleIntegration integrate_cycle(const Crossbar& xb, int group,
                                 std::span<const std::uint8_t> input_bits,
                                 IntegratorTier tier, const DeviceParams& dp,
                                 const IntegratorParams& ip,
                                 std::span<const double> start_voltages) {
  const int n = xb.n_bits();
  if (static_cast<int>(input_bits.size()) != xb.rows()) {
    throw std::invalid_argument("integrate_cycle: one input bit per row required");
  }
  if (static_cast<int>(start_voltages.size()) != n) {
    throw std::invalid_argument("integrate_cycle: one start voltage per bit required");
  }
  CycleIntegration out;
  out.v_c.resize(n);
  std::vector<RramCell> active;
  active.reserve(xb.rows());
  for (int k = 0; k < n; ++k) {
    const int col = xb.bit_line(group, k);
    active.clear();
    for (int r = 0; r < xb.rows(); ++r) {
      if (input_bits[r] > 1) throw std::domain_error("integrate_cycle: input bits must be 0 or 1");
      if (input_bits[r]) active.push_back(xb.cell(r, col));
    }
    const auto res = integrate_bit_line(active, tier, dp, ip, start_voltages[k], ip.t_int);
    out.v_c[k] = res.v;
    out.saturated = out.saturated || res.saturated;
  }
  return out;
}

double charge_redistribute(std::span<const double> v_c, double v_init) {
  const int n = static_cast<int>(v_c.size());
  if (n < 1) throw std::invalid_argument("charge_redistribute: empty capacitor array");
  double v_s = std::ldexp(v_init, -n);
  for (int k = 0; k < n; ++k) v_s += std::ldexp(v_c[k], k - n);
  return v_s;
}

int adc_convert(double v_out, const IntegratorParams& ip) {
  const double x = (ip.v_init - v_out) / ip.adc_lsb_v;
  const double code = std::floor(x + kAdcEdgeTolerance);
  if (code <= 0) return 0;
  if (code >= ip.max_code()) return ip.max_code();
  return static_cast<int>(code);
}

std::int64_t ideal_mac(std::span<const int> inputs, std::span<const int> weights, int n_bits) {
  if (inputs.size() != weights.size()) throw std::invalid_argument("ideal_mac: length mismatch");
  const int top = (1 << n_bits) - 1;
  std::int64_t y = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i] < 0 || inputs[i] > top || weights[i] < 0 || weights[i] > top) {
      throw std::domain_error("ideal_mac: operand outside the n-bit range");
    }
    y += std::int64_t{inputs[i]} * weights[i];
  }
  return y;
}

MacResult run_mac(std::span<const int> inputs, const Crossbar& xb, IntegratorTier tier,
                  const DeviceParams& dp, const IntegratorParams& ip, int group) {
  const int n = xb.n_bits();
  if (n != ip.n_bits) throw std::invalid_argument("run_mac: crossbar and integrator bit widths differ");
  if (static_cast<int>(inputs.size()) != xb.rows()) {
    throw std::invalid_argument("run_mac: one input per row required");
  }
  const int top = (1 << n) - 1;
  for (int x : inputs) {
    if (x < 0 || x > top) throw std::domain_error("run_mac: input outside the n-bit range");
  }

  MacResult result;
  result.trace.reserve(n);
  const std::vector<double> reset(n, ip.v_init);
  std::vector<std::uint8_t> bits(xb.rows());
  double v_out = ip.v_init;
  for (int j = 0; j < n; ++j) {
    for (int r = 0; r < xb.rows(); ++r) bits[r] = static_cast<std::uint8_t>((inputs[r] >> j) & 1);
    auto caps = integrate_cycle(xb, group, bits, tier, dp, ip, reset);
    const double v_s = charge_redistribute(caps.v_c, ip.v_init);
    v_out = accumulate_output(v_s, v_out);
    result.saturated = result.saturated || caps.saturated;
    result.trace.push_back({j, std::move(caps.v_c), v_s, v_out});
  }
  result.v_out = v_out;
  result.digital = adc_convert(v_out, ip);
  return result;
}

// ------------------------------------------------------------------ reads

namespace {

double single_cell_drop(double r_ohm, IntegratorTier tier, const DeviceParams& dp,
                        const IntegratorParams& ip) {
  const RramCell cell{CellState::LRS, r_ohm / dp.r_lrs_nominal};
  const auto res = integrate_bit_line({&cell, 1}, tier, dp, ip, ip.v_init, ip.t_read);
  return ip.v_init - res.v;
}

}  // namespace

double invert_read(double delta_v_out, IntegratorTier tier, const DeviceParams& dp,
                   const IntegratorParams& ip) {
  if (!(delta_v_out > 0)) throw UnmeasurableError("read: no measurable discharge, resistance above range");
  const double target = 2.0 * delta_v_out;  // drop on the integrating capacitor
  double lo = std::log(dp.r_lrs_nominal * 1e-4);
  double hi = std::log(dp.r_lrs_nominal * 1e4);
  if (single_cell_drop(std::exp(lo), tier, dp, ip) <= target) return std::exp(lo);
  if (single_cell_drop(std::exp(hi), tier, dp, ip) >= target) return std::exp(hi);
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (single_cell_drop(std::exp(mid), tier, dp, ip) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

ReadResult read_resistance(const Crossbar& xb, int row, int col, IntegratorTier tier,
                           const DeviceParams& dp, const IntegratorParams& ip) {
  const RramCell& cell = xb.cell(row, col);
  const auto res = integrate_bit_line({&cell, 1}, tier, dp, ip, ip.v_init, ip.t_read);
  ReadResult out;
  out.v_out = 0.5 * (ip.v_init + res.v);
  out.code = adc_convert(out.v_out, ip);
  if (out.code == 0) {
    throw UnmeasurableError("read: cell (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") shows no measurable discharge, resistance above range");
  }
  out.over_range = out.code == ip.max_code();
  out.resistance = invert_read((out.code + 0.5) * ip.adc_lsb_v, tier, dp, ip);
  return out;
}

double read_relative_bound(const ReadResult& read, IntegratorTier tier,
                           const DeviceParams& dp, const IntegratorParams& ip) {
  const double r_high = invert_read(read.code * ip.adc_lsb_v, tier, dp, ip);
  const double r_low = invert_read((read.code + 1.0) * ip.adc_lsb_v, tier, dp, ip);
  return std::max(r_high - read.resistance, read.resistance - r_low) / read.resistance;
}

void write_trace_csv(std::ostream& os, const MacResult& result) {
  os << "cycle,k,v_ck,v_s,v_out\n";
  for (const auto& t : result.trace) {
    for (std::size_t k = 0; k < t.v_c.size(); ++k) {
      os << t.cycle << ',' << k << ',' << format_real(t.v_c[k]) << ',' << format_real(t.v_s)
         << ',' << format_real(t.v_out) << '\n';
    }
  }
}

}  // namespace cimforge
