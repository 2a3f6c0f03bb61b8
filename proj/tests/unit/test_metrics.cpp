#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cimforge/metrics.hpp"

using namespace cimforge;

namespace {

std::vector<int> staircase(const std::vector<int>& widths, int first = 0) {
  std::vector<int> t;
  for (std::size_t k = 0; k < widths.size(); ++k) t.insert(t.end(), widths[k], first + static_cast<int>(k));
  return t;
}

std::vector<double> sine(int n, int cycles, double amp, double offset) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = offset + amp * std::sin(2 * std::numbers::pi * cycles * i / n);
  return x;
}

}  // namespace

TEST_CASE("error statistics") {
  const auto s = error_stats(std::vector<double>{1, 2, 3, 4});
  CHECK(s.count == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3)));
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(error_stats(std::vector<double>{7}).std == 0.0);
  CHECK_THROWS(error_stats(std::vector<double>{}));
}

TEST_CASE("error statistics agree with a two-pass computation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(1e6, 2.0);
  std::vector<double> x(1'000'000);
  for (double& v : x) v = d(rng);
  double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  double sq = 0;
  for (double v : x) sq += (v - mean) * (v - mean);
  const auto s = error_stats(x);
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.std == doctest::Approx(std::sqrt(sq / (x.size() - 1))).epsilon(1e-8));
}

TEST_CASE("a perfect staircase has no INL or DNL") {
  const auto r = inl_dnl_from_sweep(staircase(std::vector<int>(20, 4), 3));
  CHECK(r.first_code == 4);
  CHECK(r.dnl.size() == 18);
  CHECK(r.inl.size() == 19);
  CHECK(r.max_abs_inl() == 0.0);
  CHECK(r.max_abs_dnl() == 0.0);
  CHECK(r.missing_codes.empty());
}

TEST_CASE("a doubled code width shows DNL of one") {
  std::vector<int> w(12, 4);
  w[5] = 8;
  const auto r = inl_dnl_from_sweep(staircase(w));
  // the ideal width is the mean over the interior codes
  const double ideal = (9 * 4 + 8) / 10.0;
  CHECK(r.dnl[4] == doctest::Approx(8 / ideal - 1));
  CHECK(r.dnl[0] == doctest::Approx(4 / ideal - 1));
  double sum = 0;
  for (double v : r.dnl) sum += v;
  CHECK(std::abs(sum) < 1e-12);
  for (std::size_t i = 0; i < r.dnl.size(); ++i) CHECK(r.inl[i + 1] == doctest::Approx(r.inl[i] + r.dnl[i]));
  CHECK(r.inl.front() == 0.0);
  CHECK(std::abs(r.inl.back()) < 1e-12);
}

TEST_CASE("missing codes count") {
  std::vector<int> t = staircase(std::vector<int>(10, 3));
  for (int& v : t) if (v >= 5) v += 1;
  const auto r = inl_dnl_from_sweep(t);
  CHECK(r.missing_codes == std::vector<int>{5});
  CHECK(r.max_abs_dnl() >= 0.9);
}

TEST_CASE("sweep estimator refuses short or flat input") {
  CHECK_THROWS(inl_dnl_from_sweep(std::vector<int>{}));
  CHECK_THROWS(inl_dnl_from_sweep(std::vector<int>(10, 2)));
  CHECK_THROWS(inl_dnl_from_sweep(std::vector<int>{0, 1}));
}

TEST_CASE("code density of an ideal quantizer on a uniform ramp is flat") {
  std::vector<int> s(1'000'000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<int>(std::floor(256.0 * (static_cast<double>(i) + 0.5) / s.size()));
  }
  const auto r = code_density_linearity(s, 8);
  CHECK(r.max_abs_dnl() <= 0.05);
  CHECK(r.missing_codes.empty());
}

TEST_CASE("code density of random uniform codes stays within counting noise") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<int> s(1'000'000);
  for (int& v : s) v = u(rng);
  const auto r = code_density_linearity(s, 8);
  // binomial count per code: sd of DNL is about 1 / sqrt(samples / 256)
  const double sd = 1.0 / std::sqrt(1e6 / 256);
  CHECK(r.max_abs_dnl() <= 5 * sd);
  CHECK(r.missing_codes.empty());
}

TEST_CASE("code density agrees with the sweep estimator on a ramp") {
  std::vector<int> w(64);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> width(100, 200);
  for (int& x : w) x = width(rng);
  const auto t = staircase(w);
  const auto a = inl_dnl_from_sweep(t);
  const auto b = code_density_linearity(t, 6);
  REQUIRE(a.dnl.size() == b.dnl.size());
  for (std::size_t i = 0; i < a.dnl.size(); ++i) CHECK(std::abs(a.dnl[i] - b.dnl[i]) < 0.1);
}

TEST_CASE("code density refuses thin data") {
  CHECK_THROWS(code_density_linearity(std::vector<int>{}, 8));
  CHECK_THROWS(code_density_linearity(std::vector<int>(100, 1), 8));
  CHECK(code_density_min_samples(8) == 25600);
}

TEST_CASE("an ideally quantized sine reaches its nominal resolution") {
  for (int bits : {6, 8, 10}) {
    const double top = std::ldexp(1.0, bits) - 1;
    auto x = sine(4096, 67, top / 2, top / 2);
    for (double& v : x) v = std::round(v);
    const auto m = spectrum_metrics(x);
    CHECK(m.fundamental_bin == 67);
    CHECK(m.enob_bits == doctest::Approx(bits).epsilon(0.2 / bits));
    // time-domain oracle
    auto ref = sine(4096, 67, top / 2, top / 2);
    double sig = 0, noise = 0, mean = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mean += x[i] - ref[i];
    mean /= x.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      sig += (ref[i] - top / 2) * (ref[i] - top / 2);
      noise += (x[i] - ref[i] - mean) * (x[i] - ref[i] - mean);
    }
    CHECK(m.sndr_db == doctest::Approx(10 * std::log10(sig / noise)).epsilon(0.01));
  }
}

TEST_CASE("a known harmonic sets the SFDR") {
  auto x = sine(1024, 31, 1.0, 0.0);
  const auto h = sine(1024, 93, 1e-3, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += h[i];
  const auto m = spectrum_metrics(x);
  CHECK(m.sfdr_db == doctest::Approx(60.0).epsilon(0.5 / 60));
  CHECK(m.sndr_db == doctest::Approx(60.0).epsilon(0.5 / 60));
  CHECK(m.enob_bits == doctest::Approx(enob_from_sndr(m.sndr_db)));
  CHECK(m.magnitude_db.size() == 513);
}

TEST_CASE("ENOB conversion") {
  CHECK(enob_from_sndr(1.76) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(enob_from_sndr(49.92) == doctest::Approx(8.0));
}

TEST_CASE("spectrum input checks") {
  CHECK_THROWS(spectrum_metrics(std::vector<double>(1000, 0.0)));
  CHECK_THROWS(spectrum_metrics(std::vector<double>(1024, 3.0)));
  CHECK_THROWS(spectrum_metrics(std::vector<double>(4, 1.0)));
  const auto pure = spectrum_metrics(sine(256, 5, 1.0, 2.0));
  CHECK(pure.sndr_db > 200);
}

TEST_CASE("linearity CSV") {
  const auto r = inl_dnl_from_sweep(staircase({2, 2, 4, 2, 2}));
  std::ostringstream os;
  write_linearity_csv(os, r);
  const std::string s = os.str();
  CHECK(s.rfind("code,inl,dnl\n", 0) == 0);
  CHECK(s.substr(s.size() - 2) == ",\n");
}
