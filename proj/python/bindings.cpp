#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cimforge/device.hpp"
#include "cimforge/experiments.hpp"
#include "cimforge/integrator.hpp"
#include "cimforge/metrics.hpp"
#include "cimforge/quantmap.hpp"
#include "cimforge/variation.hpp"

namespace py = pybind11;
using namespace cimforge;

namespace {

ResistanceMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  ResistanceMatrix m;
  m.rows = static_cast<int>(rows.size());
  m.cols = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != m.cols) throw std::invalid_argument("ragged resistance matrix");
    m.values.insert(m.values.end(), r.begin(), r.end());
  }
  m.validate();
  return m;
}

std::vector<std::vector<double>> to_rows(const ResistanceMatrix& m) {
  std::vector<std::vector<double>> out(m.rows);
  for (int r = 0; r < m.rows; ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

MacResult mac(const std::vector<int>& inputs, const std::vector<int>& weights,
              IntegratorTier tier, const DeviceParams& dp, const IntegratorParams& ip,
              const std::vector<std::vector<double>>& r_norm) {
  Crossbar xb(static_cast<int>(inputs.size()), 1, ip.n_bits);
  if (!r_norm.empty()) xb.set_lrs_values(to_matrix(r_norm).values);
  xb.program_binary(0, weights);
  return run_mac(inputs, xb, tier, dp, ip);
}

}  // namespace

PYBIND11_MODULE(_cimforge, m) {
  m.doc() = "RRAM compute-in-memory core simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnmeasurableError>(m, "UnmeasurableError", PyExc_RuntimeError);

  py::enum_<IntegratorTier>(m, "IntegratorTier")
      .value("PassiveNaive", IntegratorTier::PassiveNaive)
      .value("OneR1T", IntegratorTier::OneR1T)
      .value("OneR1T_WithT0", IntegratorTier::OneR1T_WithT0)
      .value("Regulated", IntegratorTier::Regulated);

  py::class_<DeviceParams>(m, "DeviceParams")
      .def(py::init<>())
      .def_readwrite("k0", &DeviceParams::k0)
      .def_readwrite("k1", &DeviceParams::k1)
      .def_readwrite("k2", &DeviceParams::k2)
      .def_readwrite("vth0", &DeviceParams::vth0)
      .def_readwrite("vth1", &DeviceParams::vth1)
      .def_readwrite("vth2", &DeviceParams::vth2)
      .def_readwrite("lambda_clm", &DeviceParams::lambda_clm)
      .def_readwrite("i_ref", &DeviceParams::i_ref)
      .def_readwrite("v_g2", &DeviceParams::v_g2)
      .def_readwrite("v_g0_fixed", &DeviceParams::v_g0_fixed)
      .def_readwrite("r_lrs_nominal", &DeviceParams::r_lrs_nominal)
      .def_readwrite("hrs_ratio", &DeviceParams::hrs_ratio)
      .def("validate", &DeviceParams::validate);

  py::class_<IntegratorParams>(m, "IntegratorParams")
      .def(py::init<>())
      .def_readwrite("n_bits", &IntegratorParams::n_bits)
      .def_readwrite("c_f", &IntegratorParams::c_f)
      .def_readwrite("t_int", &IntegratorParams::t_int)
      .def_readwrite("v_init", &IntegratorParams::v_init)
      .def_readwrite("adc_bits", &IntegratorParams::adc_bits)
      .def_readwrite("adc_lsb_v", &IntegratorParams::adc_lsb_v)
      .def_readwrite("t_read", &IntegratorParams::t_read)
      .def_readwrite("substeps", &IntegratorParams::substeps);

  m.def("calibrate", &calibrate, py::arg("device") = DeviceParams{},
        py::arg("base") = IntegratorParams{}, py::arg("full_scale_lines") = 1);
  m.def("cell_read_voltage", &cell_read_voltage, py::arg("r"), py::arg("device") = DeviceParams{});
  m.def("regulator_vd2", &regulator_vd2, py::arg("device") = DeviceParams{});
  m.def("cascode_vd2",
        [](double i_b, double v_g0, const DeviceParams& p) {
          const auto v = cascode_vd2(i_b, v_g0, p);
          return py::make_tuple(v.volts, v.saturated);
        },
        py::arg("i_b"), py::arg("v_g0"), py::arg("device") = DeviceParams{});

  py::class_<CycleTrace>(m, "CycleTrace")
      .def_readonly("cycle", &CycleTrace::cycle)
      .def_readonly("v_c", &CycleTrace::v_c)
      .def_readonly("v_s", &CycleTrace::v_s)
      .def_readonly("v_out", &CycleTrace::v_out);
  py::class_<MacResult>(m, "MacResult")
      .def_readonly("v_out", &MacResult::v_out)
      .def_readonly("digital", &MacResult::digital)
      .def_readonly("saturated", &MacResult::saturated)
      .def_readonly("trace", &MacResult::trace);

  m.def("ideal_mac",
        [](const std::vector<int>& x, const std::vector<int>& w, int n) { return ideal_mac(x, w, n); },
        py::arg("inputs"), py::arg("weights"), py::arg("n_bits") = 8);
  m.def("run_mac", &mac, py::arg("inputs"), py::arg("weights"),
        py::arg("tier") = IntegratorTier::Regulated, py::arg("device") = DeviceParams{},
        py::arg("integrator") = calibrate(DeviceParams{}),
        py::arg("r_norm") = std::vector<std::vector<double>>{},
        "Bit-serial MAC of one weight column; r_norm optionally sets rows x n LRS values.");

  py::class_<QuantResult>(m, "QuantResult")
      .def_readonly("lrs", &QuantResult::lrs)
      .def_readonly("value_hat", &QuantResult::value_hat)
      .def_readonly("residual", &QuantResult::residual);
  m.def("uniform_quantize", &uniform_quantize, py::arg("x"), py::arg("delta"));
  m.def("step_size", &step_size);
  m.def("pseudo_binary_quantize",
        [](double w, const std::vector<double>& r) { return pseudo_binary_quantize(w, r); },
        py::arg("w"), py::arg("r"));

  py::class_<WeightMapping>(m, "WeightMapping")
      .def_readonly("method", &WeightMapping::method)
      .def_readonly("perm", &WeightMapping::perm)
      .def_readonly("lrs", &WeightMapping::lrs)
      .def_readonly("residuals", &WeightMapping::residuals)
      .def_readonly("loss_trace", &WeightMapping::loss_trace)
      .def_readonly("identity_fallback", &WeightMapping::identity_fallback)
      .def("total_squared_residual", &WeightMapping::total_squared_residual);

  auto mapper = [](WeightMapping (*fn)(std::span<const double>, const ResistanceMatrix&)) {
    return [fn](const std::vector<double>& w, const std::vector<std::vector<double>>& r) {
      return fn(w, to_matrix(r));
    };
  };
  m.def("binary_quantize_map", mapper(&binary_quantize_map), py::arg("weights"), py::arg("r"));
  m.def("pseudo_binary_map", mapper(&pseudo_binary_map), py::arg("weights"), py::arg("r"));
  m.def("greedy_bitline_map", mapper(&greedy_bitline_map), py::arg("weights"), py::arg("r"));
  m.def("exhaustive_bitline_map", mapper(&exhaustive_bitline_map), py::arg("weights"), py::arg("r"));
  m.def("quant_error_ratio",
        [](const std::vector<double>& w, const WeightMapping& map) { return quant_error_ratio(w, map); });

  m.def("sample_lrs_resistances",
        [](int rows, int cols, double sigma, std::uint64_t seed, double clip_min) {
          return to_rows(sample_lrs_resistances(rows, cols, {sigma, seed, clip_min}));
        },
        py::arg("rows"), py::arg("cols"), py::arg("sigma") = 0.2, py::arg("seed") = 1,
        py::arg("clip_min") = 0.05);

  py::class_<ErrorStats>(m, "ErrorStats")
      .def_readonly("count", &ErrorStats::count)
      .def_readonly("mean", &ErrorStats::mean)
      .def_readonly("std", &ErrorStats::std)
      .def_readonly("min", &ErrorStats::min)
      .def_readonly("max", &ErrorStats::max);
  m.def("error_stats", [](const std::vector<double>& e) { return error_stats(e); });

  py::class_<LinearityReport>(m, "LinearityReport")
      .def_readonly("first_code", &LinearityReport::first_code)
      .def_readonly("inl", &LinearityReport::inl)
      .def_readonly("dnl", &LinearityReport::dnl)
      .def_readonly("missing_codes", &LinearityReport::missing_codes)
      .def("max_abs_inl", &LinearityReport::max_abs_inl)
      .def("max_abs_dnl", &LinearityReport::max_abs_dnl);
  m.def("inl_dnl_from_sweep", [](const std::vector<int>& t) { return inl_dnl_from_sweep(t); });
  m.def("code_density_linearity",
        [](const std::vector<int>& s, int bits) { return code_density_linearity(s, bits); },
        py::arg("samples"), py::arg("adc_bits"));

  py::class_<SpectrumMetrics>(m, "SpectrumMetrics")
      .def_readonly("sfdr_db", &SpectrumMetrics::sfdr_db)
      .def_readonly("sndr_db", &SpectrumMetrics::sndr_db)
      .def_readonly("enob_bits", &SpectrumMetrics::enob_bits)
      .def_readonly("fundamental_bin", &SpectrumMetrics::fundamental_bin);
  m.def("spectrum_metrics", [](const std::vector<double>& s) { return spectrum_metrics(s); });

  py::class_<McReport>(m, "McReport")
      .def_readonly("method", &McReport::method)
      .def_readonly("trials", &McReport::trials)
      .def_readonly("errors_lsb", &McReport::errors_lsb)
      .def_readonly("stats", &McReport::stats);
  m.def("monte_carlo_mac",
        [](int input, int weight, int lines, int trials, double sigma, std::uint64_t seed,
           const std::string& method) {
          McSetup s;
          s.input_value = input;
          s.weight_value = weight;
          s.n_lines = lines;
          s.n_trials = trials;
          const DeviceParams dp;
          const auto ip = calibrate(dp, {}, lines);
          py::gil_scoped_release release;
          return monte_carlo_mac(s, {sigma, seed, 0.05}, parse_method(method),
                                 IntegratorTier::Regulated, dp, ip);
        },
        py::arg("input") = 180, py::arg("weight") = 75, py::arg("lines") = 128,
        py::arg("trials") = 100, py::arg("sigma") = 0.2, py::arg("seed") = 1,
        py::arg("method") = "greedy");

  m.def("run_experiment",
        [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
           std::optional<std::filesystem::path> out) {
          auto cfg = load_config(config);
          if (seed) cfg.variation.seed = *seed;
          if (out) cfg.out_dir = *out;
          return run_experiment(cfg);
        },
        py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
        "Runs a config file; returns the summary text.");
}
