#include "cimforge/quantmap.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cimforge/format.hpp"

namespace cimforge {

ResistanceMatrix::ResistanceMatrix(int rows_, int cols_, double fill, ResistanceSource source_)
    : rows(rows_), cols(cols_), values(static_cast<std::size_t>(rows_) * cols_, fill),
      source(source_) {
  if (rows_ < 0 || cols_ < 0) throw std::invalid_argument("resistance matrix: negative shape");
}

void ResistanceMatrix::validate() const {
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("resistance matrix: value count does not match shape");
  }
  for (double v : values) {
    if (!(v > 0)) throw std::domain_error("resistance matrix: values must be > 0");
  }
}

double WeightMapping::total_squared_residual() const {
  double s = 0.0;
  for (double r : residuals) s += r * r;
  return s;
}

// ------------------------------------------------------------ quantizer

double uniform_quantize(double x, double delta) {
  if (!(delta > 0)) throw std::domain_error("uniform_quantize: step must be > 0");
  return delta * std::floor(x / delta + 0.5);
}

double step_size(double w_max, double w_min, int n) {
  if (!(w_max > w_min)) throw std::domain_error("step_size: w_max must exceed w_min");
  if (n < 0) throw std::domain_error("step_size: negative bit count");
  return std::ldexp(w_max - w_min, -n);
}

double quant_noise_power(double delta) {
  if (delta < 0) throw std::domain_error("quant_noise_power: negative step");
  return delta * delta / 12.0;
}

std::pair<double, double> quant_error_moments(double delta) {
  if (delta < 0) throw std::domain_error("quant_error_moments: negative step");
  return {1.0 + delta * delta / 12.0, 2.0 + 4.0 * delta * delta};
}

// ------------------------------------------------------------ pseudo-binary

namespace {

// Whether a cell of normalized value r at significance m should be LRS
// given the remaining weight.
bool takes_lrs(double r, double m, double w_res) {
  const double contribution = r * m;
  return !((contribution - w_res > 0.5) || (r <= 0.5) || (contribution > 2.0 * w_res));
}

void check_weights(std::span<const double> weights, const ResistanceMatrix& r) {
  r.validate();
  if (r.cols < 1) throw std::domain_error("mapping: at least one bit line required");
  if (static_cast<int>(weights.size()) != r.rows) {
    throw std::invalid_argument("mapping: weights " + std::to_string(weights.size()) +
                                "x1 vs resistances " + std::to_string(r.rows) + "x" +
                                std::to_string(r.cols));
  }
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw std::domain_error("mapping: weights must be finite and >= 0");
  }
}

}  // namespace

double pseudo_binary_value(const std::vector<bool>& lrs_msb_first, std::span<const double> r_msb_first) {
  if (lrs_msb_first.size() != r_msb_first.size()) {
    throw std::invalid_argument("pseudo_binary_value: length mismatch");
  }
  const int n = static_cast<int>(r_msb_first.size());
  double v = 0.0;
  for (int p = 0; p < n; ++p) {
    if (lrs_msb_first[p]) v += r_msb_first[p] * std::ldexp(1.0, n - 1 - p);
  }
  return v;
}

QuantResult pseudo_binary_quantize(double w, std::span<const double> r_msb_first) {
  if (!(w >= 0)) throw std::domain_error("pseudo_binary_quantize: weight must be >= 0");
  const int n = static_cast<int>(r_msb_first.size());
  QuantResult q;
  q.lrs.assign(n, false);
  double w_res = w;
  for (int p = 0; p < n; ++p) {
    const double m = std::ldexp(1.0, n - 1 - p);
    if (takes_lrs(r_msb_first[p], m, w_res)) {
      q.lrs[p] = true;
      w_res -= r_msb_first[p] * m;
    }
  }
  q.value_hat = pseudo_binary_value(q.lrs, r_msb_first);
  q.residual = w_res;
  return q;
}

// ------------------------------------------------------------ mappings

WeightMapping map_with_order(std::span<const double> weights, const ResistanceMatrix& r,
                             std::span<const int> perm, std::string method) {
  check_weights(weights, r);
  WeightMapping m;
  m.rows = r.rows;
  m.cols = r.cols;
  m.method = std::move(method);
  m.perm.assign(perm.begin(), perm.end());
  std::vector<int> sorted = m.perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < r.cols; ++i) {
    if (static_cast<int>(sorted.size()) != r.cols || sorted[i] != i) {
      throw std::invalid_argument("mapping: order is not a permutation of the bit lines");
    }
  }
  std::vector<double> ordered(r.cols);
  m.lrs.reserve(r.rows);
  m.residuals.reserve(r.rows);
  for (int j = 0; j < r.rows; ++j) {
    for (int p = 0; p < r.cols; ++p) ordered[p] = r.at(j, m.perm[p]);
    auto q = pseudo_binary_quantize(weights[j], ordered);
    m.lrs.push_back(std::move(q.lrs));
    m.residuals.push_back(q.residual);
  }
  return m;
}

WeightMapping pseudo_binary_map(std::span<const double> weights, const ResistanceMatrix& r) {
  std::vector<int> identity(r.cols);
  std::iota(identity.begin(), identity.end(), 0);
  return map_with_order(weights, r, identity, "pseudo");
}

WeightMapping binary_quantize_map(std::span<const double> weights, const ResistanceMatrix& r) {
  check_weights(weights, r);
  const int n = r.cols;
  const double top = std::ldexp(1.0, n) - 1.0;
  WeightMapping m;
  m.rows = r.rows;
  m.cols = n;
  m.method = "binary";
  m.perm.resize(n);
  std::iota(m.perm.begin(), m.perm.end(), 0);
  for (int j = 0; j < r.rows; ++j) {
    if (weights[j] > top) {
      throw std::domain_error("binary_quantize_map: weight " + format_real(weights[j]) +
                              " outside [0, 2^n - 1]");
    }
    const auto code = static_cast<long long>(std::min(uniform_quantize(weights[j], 1.0), top));
    std::vector<bool> bits(n);
    for (int p = 0; p < n; ++p) bits[p] = (code >> (n - 1 - p)) & 1;
    const double w_hat = pseudo_binary_value(bits, r.row(j));
    m.lrs.push_back(std::move(bits));
    m.residuals.push_back(weights[j] - w_hat);
  }
  return m;
}

WeightMapping greedy_bitline_map(std::span<const double> weights, const ResistanceMatrix& r) {
  check_weights(weights, r);
  const int n = r.cols;
  const int rows = r.rows;

  std::vector<double> w_res(weights.begin(), weights.end());
  std::vector<double> trial(rows);
  std::vector<double> best_res(rows);
  std::vector<bool> used(n, false);
  std::vector<int> perm;
  std::vector<double> loss_trace;
  bool flipped = false;

  for (int p = 0; p < n; ++p) {
    const double m = std::ldexp(1.0, n - 1 - p);
    double best_loss = std::numeric_limits<double>::infinity();
    int best_col = -1;
    bool best_flipped = false;
    for (int c = 0; c < n; ++c) {
      if (used[c]) continue;
      double worst = -std::numeric_limits<double>::infinity();
      double sq = 0.0;
      for (int j = 0; j < rows; ++j) {
        const double rv = r.at(j, c);
        trial[j] = takes_lrs(rv, m, w_res[j]) ? w_res[j] - rv * m : w_res[j];
        worst = std::max(worst, trial[j]);
        sq += trial[j] * trial[j];
      }
      const bool neg = worst <= 0;
      const double loss = rows == 0 ? 0.0 : std::abs(worst) * sq;
      if (loss < best_loss) {  // strict: lowest column index wins ties
        best_loss = loss;
        best_col = c;
        best_flipped = neg;
        best_res = trial;
      }
    }
    used[best_col] = true;
    perm.push_back(best_col);
    loss_trace.push_back(best_loss);
    flipped = flipped || best_flipped;
    w_res = best_res;
  }

  WeightMapping searched = map_with_order(weights, r, perm, "greedy");
  WeightMapping identity = pseudo_binary_map(weights, r);
  WeightMapping& chosen =
      identity.total_squared_residual() < searched.total_squared_residual() ? identity : searched;
  chosen.identity_fallback = &chosen == &identity;
  chosen.method = "greedy";
  chosen.loss_trace = std::move(loss_trace);
  chosen.loss_sign_flipped = flipped;
  return chosen;
}

WeightMapping exhaustive_bitline_map(std::span<const double> weights, const ResistanceMatrix& r) {
  check_weights(weights, r);
  if (r.cols > kExhaustiveMaxColumns) {
    throw std::domain_error("exhaustive_bitline_map: " + std::to_string(r.cols) +
                            " bit lines exceed the limit of " +
                            std::to_string(kExhaustiveMaxColumns));
  }
  const int n = r.cols;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> ordered(n);
  do {
    double cost = 0.0;
    for (int j = 0; j < r.rows && cost < best_cost; ++j) {
      for (int p = 0; p < n; ++p) ordered[p] = r.at(j, perm[p]);
      const double res = pseudo_binary_quantize(weights[j], ordered).residual;
      cost += res * res;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return map_with_order(weights, r, best, "exhaustive");
}

double quant_error_ratio(std::span<const double> weights, const WeightMapping& mapping) {
  if (weights.size() != mapping.residuals.size()) {
    throw std::invalid_argument("quant_error_ratio: weights and residuals differ in length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    num += std::abs(mapping.residuals[i]);
    den += std::abs(weights[i]);
  }
  if (den == 0.0) throw std::domain_error("quant_error_ratio: all weights are zero");
  return num / den;
}

// ------------------------------------------------------------ text formats

void write_mapping(std::ostream& os, const WeightMapping& m) {
  os << "mapping rows=" << m.rows << " cols=" << m.cols << " n=" << m.cols
     << " method=" << m.method << '\n';
  os << "perm";
  for (int c : m.perm) os << ' ' << c;
  os << '\n';
  for (int j = 0; j < m.rows; ++j) {
    for (bool b : m.lrs[j]) os << (b ? '1' : '0');
    os << ' ' << format_real(m.residuals[j]) << '\n';
  }
}

WeightMapping read_mapping(std::istream& is) {
  auto fail = [](const std::string& why) -> WeightMapping {
    throw std::invalid_argument("mapping file: " + why);
  };
  WeightMapping m;
  std::string line;
  if (!std::getline(is, line)) return fail("missing header");
  {
    std::istringstream hs(line);
    std::string tag;
    hs >> tag;
    if (tag != "mapping") return fail("bad header");
    std::string kv;
    while (hs >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) return fail("bad header field '" + kv + "'");
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      if (key == "rows") m.rows = std::stoi(val);
      else if (key == "cols") m.cols = std::stoi(val);
      else if (key == "n") { /* equals cols */ }
      else if (key == "method") m.method = val;
      else return fail("unknown header field '" + key + "'");
    }
  }
  if (!std::getline(is, line)) return fail("missing perm line");
  {
    std::istringstream ps(line);
    std::string tag;
    ps >> tag;
    if (tag != "perm") return fail("bad perm line");
    int c;
    while (ps >> c) m.perm.push_back(c);
    if (static_cast<int>(m.perm.size()) != m.cols) return fail("perm length differs from cols");
  }
  for (int j = 0; j < m.rows; ++j) {
    if (!std::getline(is, line)) return fail("missing row " + std::to_string(j));
    std::istringstream rs(line);
    std::string bits;
    double res = 0.0;
    if (!(rs >> bits >> res) || static_cast<int>(bits.size()) != m.cols) {
      return fail("bad row " + std::to_string(j));
    }
    std::vector<bool> lrs(m.cols);
    for (int p = 0; p < m.cols; ++p) {
      if (bits[p] != '0' && bits[p] != '1') return fail("bad state in row " + std::to_string(j));
      lrs[p] = bits[p] == '1';
    }
    m.lrs.push_back(std::move(lrs));
    m.residuals.push_back(res);
  }
  return m;
}

void write_resistance_csv(std::ostream& os, const ResistanceMatrix& r) {
  for (int j = 0; j < r.rows; ++j) {
    for (int c = 0; c < r.cols; ++c) {
      if (c) os << ',';
      os << format_real(r.at(j, c));
    }
    os << '\n';
  }
}

std::pair<std::vector<double>, int> read_numbers_csv(std::istream& is) {
  std::vector<double> values;
  int rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("csv: '" + cell + "' is not a number");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument("csv: '" + cell + "' is not a number");
      }
      values.push_back(v);
    }
    ++rows;
  }
  return {std::move(values), rows};
}

ResistanceMatrix read_resistance_csv(std::istream& is) {
  auto [values, rows] = read_numbers_csv(is);
  if (rows == 0) throw std::invalid_argument("resistance csv: empty");
  if (values.size() % rows != 0) throw std::invalid_argument("resistance csv: ragged rows");
  ResistanceMatrix r;
  r.rows = rows;
  r.cols = static_cast<int>(values.size() / rows);
  r.values = std::move(values);
  r.source = ResistanceSource::AdcMeasured;
  r.validate();
  return r;
}

}  // namespace cimforge
