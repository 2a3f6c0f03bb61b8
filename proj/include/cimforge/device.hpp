#pragma once

#include <limits>
#include <string_view>

namespace cimforge {

/// Transistor and RRAM constants of one 1R1T column plus its read-node
/// circuitry. Units are SI throughout (A/V^2, V, A, Ohm).
struct DeviceParams {
  double k0 = 200e-6;  // T0 cascode
  double k1 = 200e-6;  // T1 regulator
  double k2 = 200e-6;  // T2 (1R1T access transistor)
  double vth0 = 0.4;
  double vth1 = 0.4;
  double vth2 = 0.4;
  double lambda_clm = 0.1;  // channel-length modulation, 1/V
  double i_ref = 2e-6;      // sets the regulated read node to 0.5 V
  double v_g2 = 0.9;
  double v_g0_fixed = 0.0;  // 0 selects cascode_gate_for_load(256)
  double r_lrs_nominal = 100e3;
  double hrs_ratio = std::numeric_limits<double>::infinity();

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  /// Fixed T0 gate used by the unregulated tier, resolving the 0 default.
  double cascode_gate() const;
};

enum class IntegratorTier {
  PassiveNaive,   // 1T1R, cell driven directly by the integrating node
  OneR1T,         // 1R1T, drain sits on the integrating node
  OneR1T_WithT0,  // 1R1T behind a fixed-gate cascode T0
  Regulated,      // 1R1T behind T0 with the T1 feedback regulator
};

std::string_view to_string(IntegratorTier tier);
/// Accepts the lower-case names used in config files
/// ("passive", "1r1t", "1r1t-t0", "regulated"). Throws std::invalid_argument.
IntegratorTier parse_tier(std::string_view name);

enum class CellState { HRS, LRS };

struct RramCell {
  CellState state = CellState::LRS;
  double r_norm = 1.0;  // LRS resistance in multiples of r_lrs_nominal

  /// Ohms; infinite for HRS when hrs_ratio is infinite.
  double resistance(const DeviceParams& p) const;
};

/// A node voltage that may have been clamped at ground.
struct NodeVoltage {
  double volts = 0.0;
  bool saturated = false;
};

/// Source voltage of the 1R1T access transistor in saturation, i.e. the
/// voltage across the RRAM, for resistance r (Ohm). Throws on r <= 0.
double cell_read_voltage(double r, const DeviceParams& p);

/// Saturation current V_R(R)/R of a 1R1T unit before channel-length
/// modulation. Zero for infinite r.
double cell_saturation_current(double r, const DeviceParams& p);

/// Read-node voltage held by the T1 regulator; independent of the bit-line
/// load.
double regulator_vd2(const DeviceParams& p);

/// Gate voltage the regulator drives onto T0 for bit-line current i_b.
double regulator_vg0(double i_b, const DeviceParams& p);

/// Read-node voltage under a fixed cascode gate v_g0 carrying i_b. Clamped
/// at 0 V (flagged) once the load exceeds what T0 can carry.
NodeVoltage cascode_vd2(double i_b, double v_g0, const DeviceParams& p);

/// Self-consistent read node of an unregulated T0 column whose cells
/// together draw sat_current * (1 + lambda * v_d2).
NodeVoltage cascode_node_for_load(double sat_current, double v_g0,
                                  const DeviceParams& p);

/// Integrating current of one cell. v_c is the integrating-node voltage,
/// v_d2 the 1R1T drain (read-node) voltage; which one matters depends on
/// the tier.
double cell_current(const RramCell& cell, IntegratorTier tier, double v_c,
                    double v_d2, const DeviceParams& p);

/// Current of a nominal LRS cell (r_norm = 1) in the regulated tier.
double nominal_regulated_current(const DeviceParams& p);

/// v_g0 that puts the unregulated read node at regulator_vd2() when
/// `lines` nominal cells conduct.
double cascode_gate_for_load(int lines, const DeviceParams& p);

}  // namespace cimforge
