#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "cimforge/device.hpp"

namespace cimforge {

/// Per-cycle voltage drop (V) of the calibration load: the integrating
/// capacitor goes from 1 V to 745.2 mV in one integration phase.
inline constexpr double kCalibratedCycleDrop = 0.2548;

/// Read window relative to the MAC integration window (110 ns vs 20 ns).
inline constexpr double kDefaultReadWindowRatio = 110.0 / 20.0;

struct IntegratorParams {
  int n_bits = 8;
  double c_f = 100e-15;  // unit/feedback capacitance; C_k = c_f * 2^(k-n)
  double t_int = 20e-9;
  double v_init = 1.0;
  int adc_bits = 8;
  double adc_lsb_v = kCalibratedCycleDrop / 256.0;
  double t_read = 110e-9;
  int substeps = 64;  // explicit sub-steps for node-dependent tiers

  void validate() const;
  /// C_k / C_f for the capacitor of logical bit k (LSB = 0).
  double cap_ratio(int k) const;
  int max_code() const { return static_cast<int>((std::int64_t{1} << adc_bits) - 1); }
};

/// Solves t_int so that `full_scale_lines` nominal LRS cells in the
/// regulated tier discharge one integrating capacitor by
/// kCalibratedCycleDrop per cycle, and sets the ADC range to that drop
/// (adc_lsb_v = drop / 2^n). t_read defaults to kDefaultReadWindowRatio
/// integration windows.
IntegratorParams calibrate(const DeviceParams& device, IntegratorParams base = {},
                           int full_scale_lines = 1);

/// Voltage drop one nominal cell produces in one integration window.
double nominal_cell_drop(const DeviceParams& device, const IntegratorParams& ip);

/// Sets ip.t_read so a nominal LRS cell reads back as `code`.
void set_read_window_for_code(const DeviceParams& device, IntegratorParams& ip,
                              double code);

/// R x (groups * n_bits) grid of cells. Each weight group owns n_bits
/// adjacent physical bit lines; a per-group bit order (the MUX setting)
/// assigns physical lines to logical bit positions.
class Crossbar {
 public:
  Crossbar(int rows, int groups, int n_bits);

  int rows() const { return rows_; }
  int groups() const { return groups_; }
  int n_bits() const { return n_bits_; }
  int cols() const { return groups_ * n_bits_; }

  RramCell& cell(int row, int col);
  const RramCell& cell(int row, int col) const;

  /// Physical column carrying logical bit k (LSB = 0) of `group`.
  int bit_line(int group, int k) const;

  /// Group-local physical columns, MSB first. Must be a permutation of
  /// 0..n_bits-1.
  void set_bit_order(int group, std::span<const int> msb_first);
  std::span<const int> bit_order(int group) const;

  /// Writes the plain binary code of each row's weight through the current
  /// bit order.
  void program_binary(int group, std::span<const int> weights);

  /// Per-row LRS flags in logical MSB-first order.
  void program_states(int group, int row, const std::vector<bool>& lrs_msb_first);

  /// Sets r_norm of every cell from a row-major rows x cols matrix.
  void set_lrs_values(std::span<const double> r_norm);

 private:
  void check(int row, int col) const;

  int rows_;
  int groups_;
  int n_bits_;
  std::vector<RramCell> cells_;
  std::vector<int> order_;  // groups * n_bits, group-local, MSB first
};

struct CycleTrace {
  int cycle = 0;
  std::vector<double> v_c;  // per logical bit k, LSB = 0
  double v_s = 0.0;
  double v_out = 0.0;
};

struct MacResult {
  double v_out = 0.0;
  int digital = 0;
  bool saturated = false;  // some integrating capacitor hit 0 V
  std::vector<CycleTrace> trace;
};

struct BitLineResult {
  double v = 0.0;
  bool saturated = false;     // integrating capacitor clamped at 0 V
  bool node_clamped = false;  // unregulated read node collapsed to 0 V
};

/// Integrates one bit line carrying `active` cells for `duration`, starting
/// from v_start. Node-dependent tiers use ip.substeps explicit steps.
BitLineResult integrate_bit_line(std::span<const RramCell> active, IntegratorTier tier,
                                 const DeviceParams& dp, const IntegratorParams& ip,
                                 double v_start, double duration);

struct CycleIntegration {
  std::vector<double> v_c;  // per logical bit k, LSB = 0
  bool saturated = false;
};

/// One integration phase of `group` for one input bit per row.
CycleIntegration integrate_cycle(const Crossbar& xb, int group,
                                 std::span<const std::uint8_t> input_bits,
                                 IntegratorTier tier, const DeviceParams& dp,
                                 const IntegratorParams& ip,
                                 std::span<const double> start_voltages);

/// Charge sharing of the binary-weighted array plus the extra C_0 held at
/// v_init: V_S = sum_k V_ck 2^(k-n) + v_init 2^-n.
double charge_redistribute(std::span<const double> v_c, double v_init);

/// Sharing with the ADC sampling capacitor (C_S = C_f).
inline double accumulate_output(double v_s, double v_out_prev) {
  return 0.5 * (v_s + v_out_prev);
}

/// Truncating ADC referenced to v_init, clamped to [0, max_code].
int adc_convert(double v_out, const IntegratorParams& ip);

/// Exact sum of inputs[i] * weights[i].
std::int64_t ideal_mac(std::span<const int> inputs, std::span<const int> weights, int n_bits);

/// Bit-serial MAC of one weight group: n cycles, LSB first.
MacResult run_mac(std::span<const int> inputs, const Crossbar& xb, IntegratorTier tier,
                  const DeviceParams& dp, const IntegratorParams& ip, int group = 0);

class UnmeasurableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReadResult {
  double resistance = 0.0;  // Ohm
  int code = 0;
  double v_out = 0.0;       // analog sampled voltage
  bool over_range = false;  // ADC clipped at max_code
};

/// Single-cell read: integrate over ip.t_read, sample (v_init + V_S) / 2,
/// digitize, and invert the cell model at the code-centre voltage. Throws
/// UnmeasurableError when the code is 0.
ReadResult read_resistance(const Crossbar& xb, int row, int col, IntegratorTier tier,
                           const DeviceParams& dp, const IntegratorParams& ip);

/// Resistance whose single-cell read discharges the sample node by
/// `delta_v_out` (V) over ip.t_read.
double invert_read(double delta_v_out, IntegratorTier tier, const DeviceParams& dp,
                   const IntegratorParams& ip);

/// Relative resistance uncertainty of a read from +/- half an LSB on the
/// sampled voltage, propagated through invert_read.
double read_relative_bound(const ReadResult& read, IntegratorTier tier,
                           const DeviceParams& dp, const IntegratorParams& ip);

/// CSV with columns cycle,k,v_ck,v_s,v_out.
void write_trace_csv(std::ostream& os, const MacResult& result);

}  // namespace cimforge
