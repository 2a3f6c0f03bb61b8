#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>

#include "cimforge/device.hpp"

using namespace cimforge;

namespace {

// Solves K/2 (ov - v)^2 = v / R for v in (0, ov) by bisection, independent
// of the closed form.
double read_voltage_bisect(double r, const DeviceParams& p) {
  const double ov = p.v_g2 - p.vth2;
  double lo = 0.0;
  double hi = ov;
  for (int i = 0; i < 200; ++i) {
    const double v = 0.5 * (lo + hi);
    const double transistor = 0.5 * p.k2 * (ov - v) * (ov - v);
    (transistor > v / r ? lo : hi) = v;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("read voltage limits") {
  const DeviceParams p;
  CHECK(std::abs(cell_read_voltage(1e18, p) - (p.v_g2 - p.vth2)) < 1e-6);
  CHECK(cell_read_voltage(1e12, p) < p.v_g2 - p.vth2);
  CHECK(cell_read_voltage(1e-3, p) < 1e-4);
  CHECK(cell_read_voltage(1e-3, p) > 0);
  CHECK_THROWS_AS(cell_read_voltage(0.0, p), std::domain_error);
  CHECK_THROWS_AS(cell_read_voltage(-5.0, p), std::domain_error);
}

TEST_CASE("read voltage satisfies both device equations over a resistance sweep") {
  DeviceParams p;
  for (double k2 : {50e-6, 200e-6, 1e-3}) {
    p.k2 = k2;
    for (double e = 3.0; e <= 7.0; e += 0.25) {
      const double r = std::pow(10.0, e);
      const double v = cell_read_voltage(r, p);
      const double ov = p.v_g2 - p.vth2;
      REQUIRE(v > 0);
      REQUIRE(v < ov);
      const double i_transistor = 0.5 * p.k2 * (ov - v) * (ov - v);
      const double i_resistor = v / r;
      CHECK(std::abs(i_transistor - i_resistor) <= 1e-9 * i_resistor);
      CHECK(v == doctest::Approx(read_voltage_bisect(r, p)).epsilon(1e-9));
    }
  }
}

TEST_CASE("regulator node") {
  DeviceParams p;
  CHECK(regulator_vd2(p) == doctest::Approx(p.vth1 + std::sqrt(p.i_ref / p.k1)));
  const double base = regulator_vd2(p) - p.vth1;
  p.i_ref *= 4;
  CHECK(regulator_vd2(p) - p.vth1 == doctest::Approx(2 * base).epsilon(1e-12));
  p.i_ref = 1e-30;  // limit of i_ref -> 0
  CHECK(regulator_vd2(p) == doctest::Approx(p.vth1).epsilon(1e-12));
  p.i_ref = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("regulator gate reproduces the bit-line current") {
  const DeviceParams p;
  for (double i_b : {1e-7, 3.3e-6, 1e-4, 8.6e-4}) {
    const double vg0 = regulator_vg0(i_b, p);
    const double vd2 = regulator_vd2(p);
    const double i_t0 = 0.5 * p.k0 * std::pow(vg0 - vd2 - p.vth0, 2);
    CHECK(std::abs(i_t0 - i_b) <= 1e-9 * i_b);
    CHECK(std::abs(cascode_vd2(i_b, vg0, p).volts - vd2) < 1e-12);
  }
}

TEST_CASE("cascode droop") {
  const DeviceParams p;
  const double vg0 = 2.0;
  CHECK(cascode_vd2(0.0, vg0, p).volts == doctest::Approx(vg0 - p.vth0));
  const double i = 1e-5;
  const double d1 = (vg0 - p.vth0) - cascode_vd2(i, vg0, p).volts;
  const double d2 = (vg0 - p.vth0) - cascode_vd2(2 * i, vg0, p).volts;
  CHECK(d2 / d1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  const auto sat = cascode_vd2(1.0, vg0, p);
  CHECK(sat.saturated);
  CHECK(sat.volts == 0.0);
  CHECK_THROWS_AS(cascode_vd2(-1e-6, vg0, p), std::domain_error);
  CHECK_THROWS_AS(cascode_vd2(1e-6, p.vth0, p), std::domain_error);
}

TEST_CASE("self-consistent cascode node") {
  const DeviceParams p;
  const double vg0 = p.cascode_gate();
  for (double sat : {3e-6, 1e-4, 8e-4}) {
    const auto node = cascode_node_for_load(sat, vg0, p);
    REQUIRE_FALSE(node.saturated);
    const double i_b = sat * (1.0 + p.lambda_clm * node.volts);
    CHECK(cascode_vd2(i_b, vg0, p).volts == doctest::Approx(node.volts).epsilon(1e-12));
  }
  // full nominal load lands on the regulated level
  const double full = 256 * cell_saturation_current(p.r_lrs_nominal, p);
  CHECK(cascode_node_for_load(full, vg0, p).volts == doctest::Approx(regulator_vd2(p)).epsilon(1e-9));
}

TEST_CASE("droop ordering with the gate tuned at one line") {
  const DeviceParams p;
  const double vg0 = cascode_gate_for_load(1, p);
  const double i1 = nominal_regulated_current(p);
  CHECK(cascode_vd2(i1, vg0, p).volts == doctest::Approx(regulator_vd2(p)).epsilon(1e-12));
  const auto loaded = cascode_vd2(256 * i1, vg0, p);
  CHECK(loaded.volts < regulator_vd2(p));
}

TEST_CASE("cell current per tier") {
  DeviceParams p;
  RramCell hrs{CellState::HRS, 1.0};
  for (auto t : {IntegratorTier::PassiveNaive, IntegratorTier::OneR1T,
                 IntegratorTier::OneR1T_WithT0, IntegratorTier::Regulated}) {
    CHECK(cell_current(hrs, t, 1.0, 0.5, p) == 0.0);
  }
  RramCell lrs;
  p.lambda_clm = 0.0;
  CHECK(cell_current(lrs, IntegratorTier::Regulated, 1.0, regulator_vd2(p), p) ==
        cell_read_voltage(p.r_lrs_nominal, p) / p.r_lrs_nominal);
  p = DeviceParams{};
  CHECK(cell_current(lrs, IntegratorTier::PassiveNaive, 0.4, 0, p) ==
        doctest::Approx(2 * cell_current(lrs, IntegratorTier::PassiveNaive, 0.2, 0, p)));
  CHECK(cell_current(lrs, IntegratorTier::OneR1T, 1.0, 0, p) >
        cell_current(lrs, IntegratorTier::OneR1T, 0.5, 0, p));

  // finite HRS ratio leaves a small current
  p.hrs_ratio = 1000;
  CHECK(cell_current(hrs, IntegratorTier::Regulated, 1.0, 0.5, p) > 0);
  CHECK(cell_current(hrs, IntegratorTier::Regulated, 1.0, 0.5, p) <
        1e-2 * cell_current(lrs, IntegratorTier::Regulated, 1.0, 0.5, p));
}

TEST_CASE("current never increases with resistance") {
  const DeviceParams p;
  for (auto t : {IntegratorTier::PassiveNaive, IntegratorTier::OneR1T,
                 IntegratorTier::OneR1T_WithT0, IntegratorTier::Regulated}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double r = 0.05; r < 50; r *= 1.3) {
      const double i = cell_current({CellState::LRS, r}, t, 0.8, 0.5, p);
      CHECK(i <= prev);
      prev = i;
    }
  }
}

TEST_CASE("regulated current is isolated from node and load") {
  const DeviceParams p;
  const RramCell c{CellState::LRS, 1.3};
  const double vd2 = regulator_vd2(p);
  const double ref = cell_current(c, IntegratorTier::Regulated, 1.0, vd2, p);
  for (double vc : {0.9, 0.5, 0.1}) CHECK(cell_current(c, IntegratorTier::Regulated, vc, vd2, p) == ref);
}

TEST_CASE("parameter validation") {
  DeviceParams p;
  CHECK_NOTHROW(p.validate());
  p.k1 = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.lambda_clm = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.hrs_ratio = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.r_lrs_nominal = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("tier names round-trip") {
  for (auto t : {IntegratorTier::PassiveNaive, IntegratorTier::OneR1T,
                 IntegratorTier::OneR1T_WithT0, IntegratorTier::Regulated}) {
    CHECK(parse_tier(to_string(t)) == t);
  }
  CHECK_THROWS_AS(parse_tier("opamp"), std::invalid_argument);
}
