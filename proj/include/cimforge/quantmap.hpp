#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cimforge {

enum class ResistanceSource { AssumedIdeal, Sampled, AdcMeasured };

/// rows x cols grid of normalized LRS values (mean about 1). In the mapping
/// algorithms each value scales the significance of the bit stored in that
/// cell.
struct ResistanceMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major
  ResistanceSource source = ResistanceSource::AssumedIdeal;

  ResistanceMatrix() = default;
  ResistanceMatrix(int rows, int cols, double fill = 1.0,
                   ResistanceSource source = ResistanceSource::AssumedIdeal);

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const {
    return {values.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  void validate() const;
};

struct QuantResult {
  std::vector<bool> lrs;  // MSB first
  double value_hat = 0.0;
  double residual = 0.0;
};

/// One shared bit-line order for all rows plus the resulting cell states.
struct WeightMapping {
  int rows = 0;
  int cols = 0;
  std::string method;
  std::vector<int> perm;               // physical column per logical position, MSB first
  std::vector<std::vector<bool>> lrs;  // per row, logical MSB-first order
  std::vector<double> residuals;       // per row, w - w_hat
  std::vector<double> loss_trace;      // greedy: chosen loss per position
  bool loss_sign_flipped = false;      // greedy: a step had max residual <= 0
  bool identity_fallback = false;      // greedy: identity order beat the search

  double total_squared_residual() const;
};

// --- uniform quantizer and its analytic statistics

double uniform_quantize(double x, double delta);
double step_size(double w_max, double w_min, int n);
double quant_noise_power(double delta);
/// Mean and variance of the quantization error under Gaussian resistance
/// spread, in normalized units: (1 + delta^2/12, 2 + 4 delta^2).
std::pair<double, double> quant_error_moments(double delta);

// --- pseudo-binary code

/// sum over LRS positions of r_i * 2^i, i counted from the LSB.
double pseudo_binary_value(const std::vector<bool>& lrs_msb_first, std::span<const double> r_msb_first);

/// Greedy MSB-to-LSB assignment: position i becomes LRS unless the cell
/// would overshoot the remaining weight by more than 0.5, the cell is too
/// weak (r <= 0.5), or it exceeds twice the remaining weight.
QuantResult pseudo_binary_quantize(double w, std::span<const double> r_msb_first);

// --- mapping methods (one weight per row, C = n bit lines per weight)

/// Plain binary code of round(w), identity bit order.
WeightMapping binary_quantize_map(std::span<const double> weights, const ResistanceMatrix& r);
/// Pseudo-binary quantization with the identity bit order.
WeightMapping pseudo_binary_map(std::span<const double> weights, const ResistanceMatrix& r);
/// Pseudo-binary quantization of every row through a given shared order.
WeightMapping map_with_order(std::span<const double> weights, const ResistanceMatrix& r,
                             std::span<const int> perm, std::string method);
/// Greedy bit-line selection, MSB first, O(C^2 R).
WeightMapping greedy_bitline_map(std::span<const double> weights, const ResistanceMatrix& r);
/// All C! orders; minimum total squared residual, lexicographic tie-break.
WeightMapping exhaustive_bitline_map(std::span<const double> weights, const ResistanceMatrix& r);

inline constexpr int kExhaustiveMaxColumns = 8;

/// sum |residual| / sum |w|.
double quant_error_ratio(std::span<const double> weights, const WeightMapping& mapping);

// --- text formats

void write_mapping(std::ostream& os, const WeightMapping& m);
WeightMapping read_mapping(std::istream& is);
void write_resistance_csv(std::ostream& os, const ResistanceMatrix& r);
ResistanceMatrix read_resistance_csv(std::istream& is);
/// Every number in the stream, row by row; returns values and the row count.
std::pair<std::vector<double>, int> read_numbers_csv(std::istream& is);

}  // namespace cimforge
