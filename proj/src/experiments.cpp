#include "cimforge/experiments.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "cimforge/format.hpp"
#include "cimforge/quantmap.hpp"

namespace cimforge {

namespace fs = std::filesystem;

// ------------------------------------------------------------ kinds

namespace {

struct KindInfo {
  ExperimentKind kind;
  const char* name;
  // option key, default
  std::vector<std::pair<std::string, std::string>> options;
};

const std::vector<KindInfo>& kinds() {
  static const std::vector<KindInfo> table = {
      {ExperimentKind::Mac, "mac", {{"inputs", "186"}, {"weights", "236"}}},
      {ExperimentKind::LinearitySweep, "linearity-sweep", {{"steps", "2048"}, {"swing", "0.3"}}},
      {ExperimentKind::InputLinesSweep,
       "input-lines-sweep",
       {{"max_lines", "256"}, {"input", "255"}, {"weight", "255"}, {"tiers", "regulated,1r1t-t0"}}},
      {ExperimentKind::MonteCarlo,
       "monte-carlo",
       {{"input", "180"},
        {"weight", "75"},
        {"lines", "128"},
        {"trials", "1400"},
        {"read_code", "85"},
        {"methods", "binary,greedy"},
        {"threads", "0"}}},
      {ExperimentKind::QuantizeCompare,
       "quantize-compare",
       {{"sigmas", "0.05,0.1,0.2,0.3"}, {"bits", "4,6,8"}, {"vectors", "20"}, {"length", "256"}}},
      {ExperimentKind::ReadResistance, "read-resistance", {{"cells", "100"}, {"read_code", "85"}}},
      {ExperimentKind::DynamicPerf,
       "dynamic-perf",
       {{"samples", "1024"}, {"cycles", "67"}, {"read_code", "85"}}},
  };
  return table;
}

const KindInfo& info(ExperimentKind k) {
  for (const auto& i : kinds()) {
    if (i.kind == k) return i;
  }
  throw std::logic_error("unregistered experiment kind");
}

}  // namespace

std::string_view to_string(ExperimentKind kind) { return info(kind).name; }

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& i : kinds()) {
    if (name == i.name) return i.kind;
  }
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

// ------------------------------------------------------------ parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw ConfigError(key + ": '" + text + "' is not a number");
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw ConfigError(key + ": '" + text + "' is not an integer");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!t.empty() && t.front() != '-') v = std::stoull(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw ConfigError(key + ": '" + text + "' is not an unsigned integer");
  return v;
}

int to_small_int(const std::string& key, const std::string& text) {
  const long long v = to_int(key, text);
  if (v < -1'000'000'000 || v > 1'000'000'000) throw ConfigError(key + ": value out of range");
  return static_cast<int>(v);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(to_real(key, s));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::vector<int> int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split_list(text)) out.push_back(to_small_int(key, s));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

void reject_unknown(const boost::property_tree::ptree& section, const std::string& name,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : section) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
  }
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) {
      throw ConfigError("config: key '" + name + "' outside any section");
    }
    if (name != "device" && name != "integrator" && name != "variation" && name != "experiment") {
      throw ConfigError("config: unknown section [" + name + "]");
    }
  }

  if (auto dev = tree.get_child_optional("device")) {
    reject_unknown(*dev, "device",
                   {"k0", "k1", "k2", "vth0", "vth1", "vth2", "lambda_clm", "i_ref", "v_g2",
                    "v_g0_fixed", "r_lrs_nominal", "hrs_ratio"});
    auto& d = cfg.device;
    const std::pair<const char*, double*> fields[] = {
        {"k0", &d.k0},     {"k1", &d.k1},         {"k2", &d.k2},
        {"vth0", &d.vth0}, {"vth1", &d.vth1},     {"vth2", &d.vth2},
        {"lambda_clm", &d.lambda_clm},            {"i_ref", &d.i_ref},
        {"v_g2", &d.v_g2}, {"v_g0_fixed", &d.v_g0_fixed},
        {"r_lrs_nominal", &d.r_lrs_nominal},      {"hrs_ratio", &d.hrs_ratio}};
    for (const auto& [key, dst] : fields) {
      if (auto v = dev->get_optional<std::string>(key)) *dst = to_real(std::string("device.") + key, *v);
    }
  }

  if (auto in = tree.get_child_optional("integrator")) {
    reject_unknown(*in, "integrator",
                   {"tier", "n_bits", "c_f", "v_init", "adc_bits", "substeps", "full_scale_lines",
                    "t_int", "t_read"});
    auto& ip = cfg.integrator;
    if (auto v = in->get_optional<std::string>("tier")) {
      try {
        cfg.tier = parse_tier(trim(*v));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("integrator.tier: ") + e.what());
      }
    }
    if (auto v = in->get_optional<std::string>("n_bits")) ip.n_bits = to_small_int("integrator.n_bits", *v);
    if (auto v = in->get_optional<std::string>("adc_bits")) ip.adc_bits = to_small_int("integrator.adc_bits", *v);
    if (auto v = in->get_optional<std::string>("substeps")) ip.substeps = to_small_int("integrator.substeps", *v);
    if (auto v = in->get_optional<std::string>("c_f")) ip.c_f = to_real("integrator.c_f", *v);
    if (auto v = in->get_optional<std::string>("v_init")) ip.v_init = to_real("integrator.v_init", *v);
    if (auto v = in->get_optional<std::string>("full_scale_lines")) {
      cfg.full_scale_lines = to_small_int("integrator.full_scale_lines", *v);
    }
    if (auto v = in->get_optional<std::string>("t_int")) cfg.t_int = to_real("integrator.t_int", *v);
    if (auto v = in->get_optional<std::string>("t_read")) cfg.t_read = to_real("integrator.t_read", *v);
  }

  if (auto var = tree.get_child_optional("variation")) {
    reject_unknown(*var, "variation", {"sigma", "clip_min"});
    if (auto v = var->get_optional<std::string>("sigma")) cfg.variation.sigma = to_real("variation.sigma", *v);
    if (auto v = var->get_optional<std::string>("clip_min")) cfg.variation.clip_min = to_real("variation.clip_min", *v);
  }

  const auto exp = tree.get_child_optional("experiment");
  if (!exp) throw ConfigError("config: missing [experiment] section");
  const auto kind = exp->get_optional<std::string>("kind");
  if (!kind) throw ConfigError("config: experiment.kind is required");
  cfg.kind = parse_kind(trim(*kind));
  std::set<std::string> allowed = {"kind", "out", "seed"};
  for (const auto& [key, def] : info(cfg.kind).options) {
    allowed.insert(key);
    cfg.options[key] = def;
  }
  reject_unknown(*exp, "experiment", allowed);
  for (const auto& [key, value] : *exp) {
    if (key == "kind") continue;
    if (key == "out") cfg.out_dir = trim(value.data());
    else if (key == "seed") cfg.variation.seed = to_u64("experiment.seed", value.data());
    else cfg.options[key] = trim(value.data());
  }

  try {
    cfg.device.validate();
    cfg.variation.validate();
    if (cfg.full_scale_lines && *cfg.full_scale_lines < 1) {
      throw std::invalid_argument("integrator: full_scale_lines must be >= 1");
    }
    (void)cfg.resolved_integrator();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  return parse_config(in);
}

int ExperimentConfig::resolved_full_scale() const {
  if (full_scale_lines) return *full_scale_lines;
  switch (kind) {
    case ExperimentKind::InputLinesSweep:
      return to_small_int("max_lines", options.at("max_lines"));
    case ExperimentKind::MonteCarlo:
      return to_small_int("lines", options.at("lines"));
    default:
      return 1;
  }
}

IntegratorParams ExperimentConfig::resolved_integrator() const {
  IntegratorParams ip = calibrate(device, integrator, std::max(1, resolved_full_scale()));
  if (t_int) {
    ip.t_int = *t_int;
    ip.t_read = kDefaultReadWindowRatio * ip.t_int;
  }
  if (t_read) ip.t_read = *t_read;
  ip.validate();
  return ip;
}

void write_resolved_config(std::ostream& os, const ExperimentConfig& cfg) {
  const auto& d = cfg.device;
  const IntegratorParams ip = cfg.resolved_integrator();
  os << "[device]\n"
     << "k0 = " << format_exact(d.k0) << "\nk1 = " << format_exact(d.k1)
     << "\nk2 = " << format_exact(d.k2) << "\nvth0 = " << format_exact(d.vth0)
     << "\nvth1 = " << format_exact(d.vth1) << "\nvth2 = " << format_exact(d.vth2)
     << "\nlambda_clm = " << format_exact(d.lambda_clm) << "\ni_ref = " << format_exact(d.i_ref)
     << "\nv_g2 = " << format_exact(d.v_g2) << "\nv_g0_fixed = " << format_exact(d.cascode_gate())
     << "\nr_lrs_nominal = " << format_exact(d.r_lrs_nominal)
     << "\nhrs_ratio = " << format_exact(d.hrs_ratio) << "\n\n";
  os << "[integrator]\n"
     << "tier = " << to_string(cfg.tier) << "\nn_bits = " << ip.n_bits
     << "\nc_f = " << format_exact(ip.c_f) << "\nv_init = " << format_exact(ip.v_init)
     << "\nadc_bits = " << ip.adc_bits << "\nsubsteps = " << ip.substeps
     << "\nfull_scale_lines = " << cfg.resolved_full_scale()
     << "\nt_int = " << format_exact(ip.t_int) << "\nt_read = " << format_exact(ip.t_read)
     << "\n\n";
  os << "[variation]\n"
     << "sigma = " << format_exact(cfg.variation.sigma)
     << "\nclip_min = " << format_exact(cfg.variation.clip_min) << "\n\n";
  os << "[experiment]\n"
     << "kind = " << to_string(cfg.kind) << "\nout = " << cfg.out_dir.string()
     << "\nseed = " << cfg.variation.seed << '\n';
  for (const auto& [key, value] : cfg.options) os << key << " = " << value << '\n';
}

// ------------------------------------------------------------ building blocks

std::vector<int> duration_sweep_codes(IntegratorTier tier, const DeviceParams& dp,
                                      const IntegratorParams& ip, int steps, double swing) {
  if (steps < 2) throw std::invalid_argument("duration sweep: steps must be >= 2");
  if (!(swing > 0 && swing < ip.v_init)) throw std::invalid_argument("duration sweep: swing must be in (0, v_init)");
  const RramCell cell{CellState::LRS, 1.0};
  auto drop = [&](double t) {
    return ip.v_init - integrate_bit_line({&cell, 1}, tier, dp, ip, ip.v_init, t).v;
  };
  double lo = 0.0;
  double hi = ip.t_int;
  for (int i = 0; drop(hi) < swing; ++i) {
    if (i > 200) throw std::runtime_error("duration sweep: swing not reachable");
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (drop(mid) < swing ? lo : hi) = mid;
  }
  const double t_end = hi;
  const double lsb = std::ldexp(swing, -ip.adc_bits);
  const int top = ip.max_code();
  std::vector<int> codes(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double c = std::floor(drop(t_end * k / steps) / lsb + 1e-7);
    codes[k] = static_cast<int>(std::clamp(c, 0.0, static_cast<double>(top)));
  }
  return codes;
}

LinesSweep input_lines_sweep(IntegratorTier tier, const DeviceParams& dp,
                             const IntegratorParams& ip, int max_lines, int input, int weight) {
  if (max_lines < 2) throw std::invalid_argument("lines sweep: max_lines must be >= 2");
  LinesSweep out;
  for (int n = 1; n <= max_lines; ++n) {
    Crossbar xb(n, 1, ip.n_bits);
    const std::vector<int> weights(n, weight);
    const std::vector<int> inputs(n, input);
    xb.program_binary(0, weights);
    out.lines.push_back(n);
    out.codes.push_back(run_mac(inputs, xb, tier, dp, ip).digital);
  }
  const double c0 = out.codes.front();
  const double slope = (out.codes.back() - c0) / static_cast<double>(max_lines - 1);
  for (int i = 0; i < max_lines; ++i) {
    const double d = out.codes[i] - (c0 + slope * i);
    out.deviation.push_back(d);
    out.max_abs_deviation = std::max(out.max_abs_deviation, std::abs(d));
  }
  return out;
}

std::vector<double> scale_weights(const std::vector<double>& w, int n_bits) {
  double w_max = 0.0;
  for (double x : w) w_max = std::max(w_max, std::abs(x));
  std::vector<double> out(w.size(), 0.0);
  if (w_max == 0.0) return out;
  const double delta = step_size(w_max, 0.0, n_bits);
  const double top = std::ldexp(1.0, n_bits) - 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::min(std::abs(w[i]) / delta, top);
  return out;
}

QuantCompareRow quantize_compare(double sigma, int n_bits, int vectors, int length,
                                 std::uint64_t seed, double clip_min) {
  if (vectors < 1 || length < 1) throw std::invalid_argument("quantize compare: empty workload");
  QuantCompareRow row;
  row.sigma = sigma;
  row.n_bits = n_bits;
  for (int v = 0; v < vectors; ++v) {
    const std::uint64_t s = trial_seed(seed, static_cast<std::uint64_t>(v));
    std::mt19937_64 rng(trial_seed(s, 0));
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> raw(length);
    for (double& x : raw) x = dist(rng);
    const auto w = scale_weights(raw, n_bits);
    const auto r = sample_lrs_resistances(length, n_bits, {sigma, trial_seed(s, 1), clip_min});
    row.ratio_a += quant_error_ratio(w, greedy_bitline_map(w, r));
    row.ratio_b += quant_error_ratio(w, binary_quantize_map(w, r));
    row.ratio_c += quant_error_ratio(w, pseudo_binary_map(w, r));
  }
  row.ratio_a /= vectors;
  row.ratio_b /= vectors;
  row.ratio_c /= vectors;
  return row;
}

DynamicPerf dynamic_performance(const DeviceParams& dp, const IntegratorParams& ip,
                                const VariationSpec& spec, int samples, int cycles,
                                double read_code) {
  if (samples < 8 || cycles < 1 || 2 * cycles >= samples) {
    throw std::invalid_argument("dynamic perf: need samples >= 8 and 1 <= cycles < samples / 2");
  }
  const int n = ip.n_bits;
  const double top = std::ldexp(1.0, n) - 1.0;
  std::vector<double> weights(samples);
  for (int k = 0; k < samples; ++k) {
    weights[k] = 0.5 * top * (1.0 + std::sin(2.0 * std::numbers::pi * cycles * k / samples));
  }
  const std::vector<int> input{static_cast<int>(top)};

  auto run = [&](const std::vector<double>& truth, const ResistanceMatrix& strength,
                 MapMethod method) {
    const WeightMapping map = method == MapMethod::Binary ? binary_quantize_map(weights, strength)
                                                          : greedy_bitline_map(weights, strength);
    Crossbar xb(1, 1, n);
    xb.set_lrs_values(truth);
    xb.set_bit_order(0, map.perm);
    std::vector<double> codes(samples);
    for (int k = 0; k < samples; ++k) {
      xb.program_states(0, 0, map.lrs[k]);
      codes[k] = run_mac(input, xb, IntegratorTier::Regulated, dp, ip).digital;
    }
    return spectrum_metrics(codes);
  };
  // one physical row serves every sample, so its strengths repeat per sample
  auto replicate = [&](const ResistanceMatrix& row) {
    ResistanceMatrix m(samples, n, 1.0, row.source);
    for (int k = 0; k < samples; ++k) std::copy(row.values.begin(), row.values.end(), m.values.begin() + static_cast<std::ptrdiff_t>(k) * n);
    return m;
  };

  DynamicPerf out;
  const std::vector<double> nominal(n, 1.0);
  out.ideal = run(nominal, replicate(ResistanceMatrix(1, n)), MapMethod::Binary);

  const auto truth = sample_lrs_resistances(1, n, spec);
  Crossbar probe(1, 1, n);
  probe.set_lrs_values(truth.values);
  IntegratorParams read_ip = ip;
  set_read_window_for_code(dp, read_ip, read_code);
  const auto measured = measure_array(probe, IntegratorTier::Regulated, dp, read_ip);
  const auto strengths = replicate(strength_matrix(measured.values, dp));
  out.binary = run(truth.values, strengths, MapMethod::Binary);
  out.greedy = run(truth.values, strengths, MapMethod::Greedy);
  return out;
}

// ------------------------------------------------------------ runner

namespace {

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  std::ostringstream summary;

  std::ostream& file(const std::string& name) {
    files.emplace_back(name, std::string());
    streams.emplace_back();
    return streams.back();
  }
  void finish() {
    for (std::size_t i = 0; i < streams.size(); ++i) files[i].second = streams[i].str();
  }

 private:
  std::deque<std::ostringstream> streams;  // stable references
};

std::int64_t reference_code(std::int64_t y, int n_bits, int full_scale) {
  return y / ((std::int64_t{1} << n_bits) * full_scale);
}

void run_mac_kind(const ExperimentConfig& cfg, const IntegratorParams& ip, Outputs& out) {
  const auto inputs = int_list("inputs", cfg.options.at("inputs"));
  const auto weights = int_list("weights", cfg.options.at("weights"));
  if (inputs.size() != weights.size()) {
    throw ConfigError("mac: " + std::to_string(inputs.size()) + " inputs vs " +
                      std::to_string(weights.size()) + " weights");
  }
  const int rows = static_cast<int>(inputs.size());
  Crossbar xb(rows, 1, ip.n_bits);
  xb.program_binary(0, weights);
  const auto y = ideal_mac(inputs, weights, ip.n_bits);
  const auto mac = run_mac(inputs, xb, cfg.tier, cfg.device, ip);
  write_trace_csv(out.file("trace.csv"), mac);
  out.summary << "rows = " << rows << "\nideal_mac = " << y
              << "\nreference_code = " << reference_code(y, ip.n_bits, cfg.resolved_full_scale())
              << "\ndigital_code = " << mac.digital << "\nv_out = " << format_real(mac.v_out)
              << "\nsaturated = " << (mac.saturated ? "true" : "false") << '\n';
}

constexpr IntegratorTier kAllTiers[] = {IntegratorTier::PassiveNaive, IntegratorTier::OneR1T,
                                        IntegratorTier::OneR1T_WithT0, IntegratorTier::Regulated};

void run_linearity_kind(const ExperimentConfig& cfg, const IntegratorParams& ip, Outputs& out) {
  const int steps = to_small_int("steps", cfg.options.at("steps"));
  const double swing = to_real("swing", cfg.options.at("swing"));
  std::vector<std::vector<int>> transfers;
  for (auto tier : kAllTiers) {
    transfers.push_back(duration_sweep_codes(tier, cfg.device, ip, steps, swing));
    const auto rep = inl_dnl_from_sweep(transfers.back());
    write_linearity_csv(out.file("linearity_" + std::string(to_string(tier)) + ".csv"), rep);
    out.summary << "max_abs_inl." << to_string(tier) << " = " << format_real(rep.max_abs_inl())
                << "\nmax_abs_dnl." << to_string(tier) << " = " << format_real(rep.max_abs_dnl())
                << '\n';
  }
  auto& t = out.file("transfer.csv");
  t << "step";
  for (auto tier : kAllTiers) t << ',' << to_string(tier);
  t << '\n';
  for (int k = 0; k <= steps; ++k) {
    t << k;
    for (const auto& tr : transfers) t << ',' << tr[k];
    t << '\n';
  }
}

void run_lines_kind(const ExperimentConfig& cfg, const IntegratorParams& ip, Outputs& out) {
  const int max_lines = to_small_int("max_lines", cfg.options.at("max_lines"));
  const int input = to_small_int("input", cfg.options.at("input"));
  const int weight = to_small_int("weight", cfg.options.at("weight"));
  std::vector<IntegratorTier> tiers;
  for (const auto& name : split_list(cfg.options.at("tiers"))) {
    try {
      tiers.push_back(parse_tier(name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("tiers: ") + e.what());
    }
  }
  if (tiers.empty()) throw ConfigError("tiers: empty list");
  std::vector<LinesSweep> sweeps;
  for (auto tier : tiers) {
    sweeps.push_back(input_lines_sweep(tier, cfg.device, ip, max_lines, input, weight));
    out.summary << "max_abs_inl." << to_string(tier) << " = "
                << format_real(sweeps.back().max_abs_deviation) << '\n';
  }
  auto& f = out.file("input_lines.csv");
  f << "lines";
  for (auto tier : tiers) f << ",code_" << to_string(tier) << ",inl_" << to_string(tier);
  f << '\n';
  for (int i = 0; i < max_lines; ++i) {
    f << i + 1;
    for (const auto& s : sweeps) f << ',' << s.codes[i] << ',' << format_real(s.deviation[i]);
    f << '\n';
  }
}

void run_mc_kind(const ExperimentConfig& cfg, const IntegratorParams& ip, Outputs& out) {
  McSetup setup;
  setup.input_value = to_small_int("input", cfg.options.at("input"));
  setup.weight_value = to_small_int("weight", cfg.options.at("weight"));
  setup.n_lines = to_small_int("lines", cfg.options.at("lines"));
  setup.n_trials = to_small_int("trials", cfg.options.at("trials"));
  setup.read_code = to_real("read_code", cfg.options.at("read_code"));
  setup.threads = to_small_int("threads", cfg.options.at("threads"));
  setup.full_scale_lines = cfg.resolved_full_scale();
  try {
    setup.validate(ip.n_bits);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  bool binary = false;
  bool greedy = false;
  for (const auto& m : split_list(cfg.options.at("methods"))) {
    try {
      (parse_method(m) == MapMethod::Binary ? binary : greedy) = true;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("methods: ") + e.what());
    }
  }
  if (!binary && !greedy) throw ConfigError("methods: empty list");
  std::vector<McReport> reports;
  if (binary && greedy) {
    auto cmp = monte_carlo_compare(setup, cfg.variation, cfg.tier, cfg.device, ip);
    reports.push_back(std::move(cmp.binary));
    reports.push_back(std::move(cmp.greedy));
  } else {
    reports.push_back(monte_carlo_mac(setup, cfg.variation, binary ? MapMethod::Binary : MapMethod::Greedy,
                                      cfg.tier, cfg.device, ip));
  }
  out.summary << "reference_code = " << mc_reference_code(setup, ip.n_bits) << '\n';
  for (const auto& r : reports) {
    write_mc_summary(out.summary, r);
    write_mc_csv(out.file("mc_" + r.method + ".csv"), r);
    write_histogram_csv(out.file("hist_" + r.method + ".csv"), r.errors_lsb);
  }
}

void run_quantize_kind(const ExperimentConfig& cfg, Outputs& out) {
  const auto sigmas = real_list("sigmas", cfg.options.at("sigmas"));
  const auto bits = int_list("bits", cfg.options.at("bits"));
  const int vectors = to_small_int("vectors", cfg.options.at("vectors"));
  const int length = to_small_int("length", cfg.options.at("length"));
  for (int b : bits) {
    if (b < 1 || b > 16) throw ConfigError("bits: values must be in 1..16");
  }
  auto& f = out.file("quant_compare.csv");
  f << "sigma,n_bits,ratio_a,ratio_b,ratio_c\n";
  int held = 0;
  int total = 0;
  for (double s : sigmas) {
    for (int b : bits) {
      const auto row = quantize_compare(s, b, vectors, length, cfg.variation.seed, cfg.variation.clip_min);
      f << format_real(s) << ',' << b << ',' << format_real(row.ratio_a) << ','
        << format_real(row.ratio_b) << ',' << format_real(row.ratio_c) << '\n';
      ++total;
      if (row.ratio_a <= row.ratio_c && row.ratio_c <= row.ratio_b) ++held;
    }
  }
  out.summary << "ordering_a_le_c_le_b = " << held << '/' << total << '\n';
}

void run_read_kind(const ExperimentConfig& cfg, IntegratorParams ip, Outputs& out) {
  const int cells = to_small_int("cells", cfg.options.at("cells"));
  if (cells < 1) throw ConfigError("cells: must be >= 1");
  if (!cfg.t_read) set_read_window_for_code(cfg.device, ip, to_real("read_code", cfg.options.at("read_code")));
  const auto truth = sample_lrs_resistances(cells, 1, cfg.variation);
  Crossbar xb(cells + 1, 1, 1);
  std::vector<double> r(truth.values);
  r.push_back(1.0);
  xb.set_lrs_values(r);
  xb.cell(cells, 0).state = CellState::HRS;

  auto& f = out.file("read_resistance.csv");
  f << "cell,r_true,r_measured,code,v_out,rel_bound,within\n";
  int within = 0;
  int unmeasurable = 0;
  double worst = 0.0;
  for (int i = 0; i < cells; ++i) {
    try {
      const auto rd = read_resistance(xb, i, 0, cfg.tier, cfg.device, ip);
      const double measured = rd.resistance / cfg.device.r_lrs_nominal;
      const double bound = read_relative_bound(rd, cfg.tier, cfg.device, ip);
      const double rel = std::abs(measured - truth.values[i]) / measured;
      const bool ok = !rd.over_range && rel <= bound * (1.0 + 1e-9);
      within += ok ? 1 : 0;
      worst = std::max(worst, rel);
      f << i << ',' << format_real(truth.values[i]) << ',' << format_real(measured) << ','
        << rd.code << ',' << format_real(rd.v_out) << ',' << format_real(bound) << ','
        << (ok ? 1 : 0) << '\n';
    } catch (const UnmeasurableError&) {
      ++unmeasurable;
      f << i << ',' << format_real(truth.values[i]) << ",,0,,,0\n";
    }
  }
  bool hrs_flagged = false;
  try {
    (void)read_resistance(xb, cells, 0, cfg.tier, cfg.device, ip);
  } catch (const UnmeasurableError&) {
    hrs_flagged = true;
  }
  out.summary << "t_read = " << format_real(ip.t_read) << "\nwithin_bound = " << within << '/'
              << cells << "\nunmeasurable = " << unmeasurable
              << "\nmax_rel_error = " << format_real(worst)
              << "\nhrs_unmeasurable = " << (hrs_flagged ? "true" : "false") << '\n';
}

void run_dynamic_kind(const ExperimentConfig& cfg, const IntegratorParams& ip, Outputs& out) {
  const int samples = to_small_int("samples", cfg.options.at("samples"));
  const int cycles = to_small_int("cycles", cfg.options.at("cycles"));
  const double read_code = to_real("read_code", cfg.options.at("read_code"));
  const auto perf = dynamic_performance(cfg.device, ip, cfg.variation, samples, cycles, read_code);
  const std::pair<const char*, const SpectrumMetrics*> rows[] = {
      {"ideal", &perf.ideal}, {"binary", &perf.binary}, {"greedy", &perf.greedy}};
  for (const auto& [name, m] : rows) {
    write_spectrum_csv(out.file(std::string("spectrum_") + name + ".csv"), *m);
    out.summary << name << ".sfdr_db = " << format_real(m->sfdr_db) << '\n'
                << name << ".sndr_db = " << format_real(m->sndr_db) << '\n'
                << name << ".enob_bits = " << format_real(m->enob_bits) << '\n';
  }
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg) {
  IntegratorParams ip;
  try {
    ip = cfg.resolved_integrator();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Outputs out;
  out.summary << "experiment = " << to_string(cfg.kind) << "\ntier = " << to_string(cfg.tier)
              << "\nseed = " << cfg.variation.seed << '\n';
  switch (cfg.kind) {
    case ExperimentKind::Mac: run_mac_kind(cfg, ip, out); break;
    case ExperimentKind::LinearitySweep: run_linearity_kind(cfg, ip, out); break;
    case ExperimentKind::InputLinesSweep: run_lines_kind(cfg, ip, out); break;
    case ExperimentKind::MonteCarlo: run_mc_kind(cfg, ip, out); break;
    case ExperimentKind::QuantizeCompare: run_quantize_kind(cfg, out); break;
    case ExperimentKind::ReadResistance: run_read_kind(cfg, ip, out); break;
    case ExperimentKind::DynamicPerf: run_dynamic_kind(cfg, ip, out); break;
  }
  out.finish();
  std::ostringstream resolved;
  write_resolved_config(resolved, cfg);
  out.files.emplace_back("resolved.cfg", resolved.str());
  out.files.emplace_back("summary.txt", out.summary.str());

  // everything is computed; now write, undoing on failure
  std::vector<fs::path> written;
  const bool created = !fs::exists(cfg.out_dir);
  try {
    fs::create_directories(cfg.out_dir);
    for (const auto& [name, body] : out.files) {
      const fs::path p = cfg.out_dir / name;
      std::ofstream f(p, std::ios::binary);
      written.push_back(p);
      f << body;
      if (!f.flush()) throw std::runtime_error("cannot write '" + p.string() + "'");
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (created) fs::remove(cfg.out_dir, ec);
    throw;
  }
  return out.summary.str();
}

}  // namespace cimforge
