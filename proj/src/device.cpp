#include "cimforge/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cimforge {

void DeviceParams::validate() const {
  if (!(k0 > 0 && k1 > 0 && k2 > 0)) {
    throw std::invalid_argument("device: transconductance parameters must be > 0");
  }
  if (!(i_ref > 0)) throw std::invalid_argument("device: i_ref must be > 0");
  if (!(r_lrs_nominal > 0)) {
    throw std::invalid_argument("device: r_lrs_nominal must be > 0");
  }
  if (!(hrs_ratio > 1)) throw std::invalid_argument("device: hrs_ratio must be > 1");
  if (!(lambda_clm >= 0)) throw std::invalid_argument("device: lambda_clm must be >= 0");
  if (!(v_g2 > vth2)) throw std::invalid_argument("device: v_g2 must exceed vth2");
  if (!(v_g0_fixed >= 0)) throw std::invalid_argument("device: v_g0_fixed must be >= 0");
}

double DeviceParams::cascode_gate() const {
  return v_g0_fixed > 0 ? v_g0_fixed : cascode_gate_for_load(256, *this);
}

std::string_view to_string(IntegratorTier tier) {
  switch (tier) {
    case IntegratorTier::PassiveNaive: return "passive";
    case IntegratorTier::OneR1T: return "1r1t";
    case IntegratorTier::OneR1T_WithT0: return "1r1t-t0";
    case IntegratorTier::Regulated: return "regulated";
  }
  return "unknown";
}

IntegratorTier parse_tier(std::string_view name) {
  if (name == "passive") return IntegratorTier::PassiveNaive;
  if (name == "1r1t") return IntegratorTier::OneR1T;
  if (name == "1r1t-t0") return IntegratorTier::OneR1T_WithT0;
  if (name == "regulated") return IntegratorTier::Regulated;
  throw std::invalid_argument("unknown integrator tier '" + std::string(name) + "'");
}

double RramCell::resistance(const DeviceParams& p) const {
  if (state == CellState::LRS) return r_norm * p.r_lrs_nominal;
  return p.hrs_ratio * p.r_lrs_nominal;
}

double cell_read_voltage(double r, const DeviceParams& p) {
  if (!(r > 0)) throw std::domain_error("cell_read_voltage: resistance must be > 0");
  const double overdrive = p.v_g2 - p.vth2;
  if (std::isinf(r)) return overdrive;
  // ov - (sqrt(1+x)-1)/(K R) with x = 2 K R ov, rearranged to avoid
  // cancellation at small K R.
  const double root = std::sqrt(1.0 + 2.0 * p.k2 * r * overdrive);
  return overdrive * (root - 1.0) / (root + 1.0);
}

double cell_saturation_current(double r, const DeviceParams& p) {
  if (std::isinf(r)) return 0.0;
  return cell_read_voltage(r, p) / r;
}

double regulator_vd2(const DeviceParams& p) {
  return p.vth1 + std::sqrt(p.i_ref / p.k1);
}

double regulator_vg0(double i_b, const DeviceParams& p) {
  if (i_b < 0) throw std::domain_error("regulator_vg0: negative bit-line current");
  return regulator_vd2(p) + p.vth0 + std::sqrt(2.0 * i_b / p.k0);
}

NodeVoltage cascode_vd2(double i_b, double v_g0, const DeviceParams& p) {
  if (i_b < 0) throw std::domain_error("cascode_vd2: negative bit-line current");
  if (!(v_g0 > p.vth0)) throw std::domain_error("cascode_vd2: v_g0 must exceed vth0");
  const double v = v_g0 - p.vth0 - std::sqrt(2.0 * i_b / p.k0);
  if (v <= 0) return {0.0, true};
  return {v, false};
}

NodeVoltage cascode_node_for_load(double sat_current, double v_g0,
                                  const DeviceParams& p) {
  if (sat_current < 0) throw std::domain_error("cascode_node_for_load: negative current");
  if (!(v_g0 > p.vth0)) throw std::domain_error("cascode_node_for_load: v_g0 must exceed vth0");
  const double headroom = v_g0 - p.vth0;
  // u = headroom - v solves u^2 + b u - c = 0.
  const double b = 2.0 * sat_current * p.lambda_clm / p.k0;
  const double c = 2.0 * sat_current * (1.0 + p.lambda_clm * headroom) / p.k0;
  const double u = 0.5 * (-b + std::sqrt(b * b + 4.0 * c));
  const double v = headroom - u;
  if (v <= 0) return {0.0, true};
  return {v, false};
}

double cell_current(const RramCell& cell, IntegratorTier tier, double v_c,
                    double v_d2, const DeviceParams& p) {
  const double r = cell.resistance(p);
  if (std::isinf(r)) return 0.0;
  switch (tier) {
    case IntegratorTier::PassiveNaive:
      return std::max(v_c, 0.0) / r;
    case IntegratorTier::OneR1T:
      return cell_saturation_current(r, p) * (1.0 + p.lambda_clm * std::max(v_c, 0.0));
    case IntegratorTier::OneR1T_WithT0:
    case IntegratorTier::Regulated:
      return cell_saturation_current(r, p) * (1.0 + p.lambda_clm * std::max(v_d2, 0.0));
  }
  return 0.0;
}

double nominal_regulated_current(const DeviceParams& p) {
  return cell_saturation_current(p.r_lrs_nominal, p) *
         (1.0 + p.lambda_clm * regulator_vd2(p));
}

double cascode_gate_for_load(int lines, const DeviceParams& p) {
  const double i_b = lines * nominal_regulated_current(p);
  return regulator_vg0(i_b, p);
}

}  // namespace cimforge
