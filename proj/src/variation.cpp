#include "cimforge/variation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include "cimforge/format.hpp"

namespace cimforge {

void VariationSpec::validate() const {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw std::invalid_argument("variation: sigma must be >= 0");
  if (!(clip_min > 0)) throw std::invalid_argument("variation: clip_min must be > 0");
  if (clip_min >= 1.0) throw std::invalid_argument("variation: clip_min must be < 1");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x5851F42D4C957F2DULL));
}

ResistanceMatrix sample_lrs_resistances(int rows, int cols, const VariationSpec& spec) {
  spec.validate();
  ResistanceMatrix m(rows, cols, 1.0, ResistanceSource::Sampled);
  if (spec.sigma == 0.0) return m;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> dist(1.0, spec.sigma);
  for (double& v : m.values) {
    do {
      v = dist(rng);
    } while (v <= spec.clip_min);
  }
  return m;
}

MeasuredArray measure_array(const Crossbar& xb, IntegratorTier tier, const DeviceParams& dp,
                            const IntegratorParams& ip) {
  MeasuredArray out;
  out.values = ResistanceMatrix(xb.rows(), xb.cols(), 1.0, ResistanceSource::AdcMeasured);
  out.unmeasurable.assign(out.values.values.size(), false);
  for (int r = 0; r < xb.rows(); ++r) {
    for (int c = 0; c < xb.cols(); ++c) {
      if (xb.cell(r, c).state != CellState::LRS) {
        throw std::invalid_argument("measure_array: all cells must be LRS");
      }
      try {
        out.values.at(r, c) = read_resistance(xb, r, c, tier, dp, ip).resistance / dp.r_lrs_nominal;
      } catch (const UnmeasurableError&) {
        out.values.at(r, c) = std::numeric_limits<double>::infinity();
        out.unmeasurable[static_cast<std::size_t>(r) * xb.cols() + c] = true;
        ++out.unmeasurable_count;
      }
    }
  }
  return out;
}

ResistanceMatrix strength_matrix(const ResistanceMatrix& normalized, const DeviceParams& dp) {
  ResistanceMatrix s = normalized;
  const double nominal = cell_saturation_current(dp.r_lrs_nominal, dp);
  for (double& v : s.values) {
    const double i = std::isfinite(v) ? cell_saturation_current(v * dp.r_lrs_nominal, dp) : 0.0;
    v = std::max(i / nominal, std::numeric_limits<double>::min());
  }
  return s;
}

std::string_view to_string(MapMethod m) { return m == MapMethod::Binary ? "binary" : "greedy"; }

MapMethod parse_method(std::string_view name) {
  if (name == "binary") return MapMethod::Binary;
  if (name == "greedy") return MapMethod::Greedy;
  throw std::invalid_argument("unknown mapping method '" + std::string(name) + "'");
}

void McSetup::validate(int n_bits) const {
  const int top = (1 << n_bits) - 1;
  if (input_value < 0 || input_value > top) throw std::invalid_argument("monte carlo: input outside the n-bit range");
  if (weight_value < 0 || weight_value > top) throw std::invalid_argument("monte carlo: weight outside the n-bit range");
  if (n_lines < 1) throw std::invalid_argument("monte carlo: n_lines must be >= 1");
  if (n_trials < 1) throw std::invalid_argument("monte carlo: n_trials must be >= 1");
  if (!(read_code > 0)) throw std::invalid_argument("monte carlo: read_code must be > 0");
  if (full_scale_lines < 0) throw std::invalid_argument("monte carlo: full_scale_lines must be >= 0");
}

std::int64_t mc_reference_code(const McSetup& setup, int n_bits) {
  const std::int64_t y = std::int64_t{setup.input_value} * setup.weight_value * setup.n_lines;
  return y / ((std::int64_t{1} << n_bits) * setup.resolved_full_scale());
}

int resolve_threads(int requested, int jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CIM_FORGE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, std::min(n, jobs));
}

namespace {

struct TrialOutcome {
  double error[2] = {0.0, 0.0};  // binary, greedy
  bool saturated[2] = {false, false};
  std::size_t unmeasurable = 0;
};

// Runs fn(i) for i in [0, jobs) on a small pool; rethrows the first error.
template <class Fn>
void parallel_for(int jobs, int threads, Fn fn) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

TrialOutcome run_trial(int index, const McSetup& setup, const VariationSpec& spec, bool want_binary,
                       bool want_greedy, IntegratorTier tier, const DeviceParams& dp,
                       const IntegratorParams& ip, const IntegratorParams& read_ip,
                       std::int64_t reference) {
  const int n = ip.n_bits;
  VariationSpec trial_spec = spec;
  trial_spec.seed = trial_seed(spec.seed, static_cast<std::uint64_t>(index));
  const auto truth = sample_lrs_resistances(setup.n_lines, n, trial_spec);

  Crossbar xb(setup.n_lines, 1, n);
  xb.set_lrs_values(truth.values);
  TrialOutcome out;
  const auto measured = measure_array(xb, tier, dp, read_ip);
  out.unmeasurable = measured.unmeasurable_count;
  const auto strength = strength_matrix(measured.values, dp);

  const std::vector<double> weights(setup.n_lines, static_cast<double>(setup.weight_value));
  const std::vector<int> inputs(setup.n_lines, setup.input_value);
  for (int m = 0; m < 2; ++m) {
    if ((m == 0 && !want_binary) || (m == 1 && !want_greedy)) continue;
    const WeightMapping map =
        m == 0 ? binary_quantize_map(weights, strength) : greedy_bitline_map(weights, strength);
    xb.set_bit_order(0, map.perm);
    for (int r = 0; r < setup.n_lines; ++r) xb.program_states(0, r, map.lrs[r]);
    const auto mac = run_mac(inputs, xb, tier, dp, ip);
    out.error[m] = static_cast<double>(mac.digital - reference);
    out.saturated[m] = mac.saturated;
  }
  return out;
}

std::vector<TrialOutcome> run_trials(const McSetup& setup, const VariationSpec& spec,
                                     bool want_binary, bool want_greedy, IntegratorTier tier,
                                     const DeviceParams& dp, const IntegratorParams& ip) {
  dp.validate();
  ip.validate();
  spec.validate();
  setup.validate(ip.n_bits);
  IntegratorParams read_ip = ip;
  set_read_window_for_code(dp, read_ip, setup.read_code);
  const std::int64_t reference = mc_reference_code(setup, ip.n_bits);

  std::vector<TrialOutcome> outcomes(setup.n_trials);
  parallel_for(setup.n_trials, resolve_threads(setup.threads, setup.n_trials), [&](int i) {
    outcomes[i] = run_trial(i, setup, spec, want_binary, want_greedy, tier, dp, ip, read_ip, reference);
  });
  return outcomes;
}

McReport collect(const std::vector<TrialOutcome>& outcomes, int m) {
  McReport rep;
  rep.method = std::string(to_string(m == 0 ? MapMethod::Binary : MapMethod::Greedy));
  rep.trials = static_cast<int>(outcomes.size());
  rep.errors_lsb.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    rep.errors_lsb.push_back(o.error[m]);
    rep.saturated_trials += o.saturated[m] ? 1 : 0;
    rep.unmeasurable_cells += o.unmeasurable;
  }
  rep.stats = error_stats(rep.errors_lsb);
  return rep;
}

}  // namespace

McReport monte_carlo_mac(const McSetup& setup, const VariationSpec& spec, MapMethod method,
                         IntegratorTier tier, const DeviceParams& dp, const IntegratorParams& ip) {
  const bool binary = method == MapMethod::Binary;
  const auto outcomes = run_trials(setup, spec, binary, !binary, tier, dp, ip);
  return collect(outcomes, binary ? 0 : 1);
}

McComparison monte_carlo_compare(const McSetup& setup, const VariationSpec& spec,
                                 IntegratorTier tier, const DeviceParams& dp,
                                 const IntegratorParams& ip) {
  const auto outcomes = run_trials(setup, spec, true, true, tier, dp, ip);
  return {collect(outcomes, 0), collect(outcomes, 1)};
}

void write_mc_csv(std::ostream& os, const McReport& report) {
  os << "trial,error_lsb\n";
  for (std::size_t i = 0; i < report.errors_lsb.size(); ++i) {
    os << i << ',' << format_real(report.errors_lsb[i]) << '\n';
  }
}

void write_mc_summary(std::ostream& os, const McReport& report) {
  os << "method=" << report.method << " trials=" << report.trials
     << " mean=" << format_real(report.stats.mean) << " std=" << format_real(report.stats.std)
     << " min=" << format_real(report.stats.min) << " max=" << format_real(report.stats.max)
     << '\n';
}

void write_histogram_csv(std::ostream& os, const std::vector<double>& errors, double bin) {
  if (!(bin > 0)) throw std::invalid_argument("histogram: bin width must be > 0");
  os << "bin_start_lsb,count\n";
  if (errors.empty()) return;
  // small guard so values on a bin edge do not fall into the bin below
  auto index = [bin](double e) { return static_cast<long long>(std::floor(e / bin + 1e-9)); };
  long long lo = index(errors.front());
  long long hi = lo;
  for (double e : errors) {
    lo = std::min(lo, index(e));
    hi = std::max(hi, index(e));
  }
  std::vector<long long> counts(static_cast<std::size_t>(hi - lo + 1), 0);
  for (double e : errors) ++counts[static_cast<std::size_t>(index(e) - lo)];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    os << format_real(static_cast<double>(lo + static_cast<long long>(i)) * bin) << ','
       << counts[i] << '\n';
  }
}

}  // namespace cimforge
