// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "heml/encoding.hpp"

namespace heml {

// Comparison polynomial chain: g applied g_count times, then (f + 1)/2 with f
// applied f_count times.
struct CompareChain {
  int g_count = 2;
  int f_count = 1;
};

struct SoftmaxConfig {
  double r_orig = 8.0;     // radius the exp/inverse stage is accurate on
  double ext_ratio = 2.0;  // L
  int ext_index = 5;       // n; 0 disables domain extension
  bool precise = true;     // apply the cubic/quintic inverse correction
  double exp_range = 8.0;  // B; power of two
  double inv_range = 100.0;
  int inv_iters = 16;
  CompareChain compare{};

  void validate() const;
  // Inputs in [-coverage, coverage] are handled: L^n * r_orig / 2.
  double coverage_radius() const;
  // Comparison inputs are divided by 2 * compare_radius() so differences fall in [-1, 1].
  double compare_radius() const;
};

// Polynomial in the monomial basis. Evaluation (scalar and encrypted) builds
// powers x^k = x^a * x^(k-a) with a the largest power of two below k (k/2 for
// powers of two), then sums c_k x^k in increasing k, then adds c_0.
struct Poly {
  std::vector<double> coeffs;
  double domain_lo = -1.0;
  double domain_hi = 1.0;

  int degree() const;
  bool is_odd() const;
  bool is_even() const;
  // Multiplicative depth of the evaluation scheme above.
  int depth() const;
  double operator()(double x) const;
};

const Poly& compare_f();
const Poly& compare_g();
// (f + 1) / 2 folded into one polynomial.
const Poly& compare_step();
// Degree-12 L2 approximation of exp(u) on [-1, 1].
const Poly& exp_base();
// exp_base(x / B) with the scale folded into the coefficients.
Poly exp_scaled(double B);

// ---- scalar reference path ----------------------------------------------------

double approx_exp(double x, double B);
double approx_inv(double x, double R, int iters);
// Approximately 1 when a > b, 0 when a < b, 0.5 when equal. Inputs in [-1/2, 1/2].
double approx_compare(double a, double b, const CompareChain& chain = {});
double domain_extend(double x, const SoftmaxConfig& cfg);
double inverse_correction(double x, const SoftmaxConfig& cfg);

// Intermediate values of the scalar softmax pipeline for one row.
struct SoftmaxTrace {
  double amax = 0.0;              // approximate row maximum, unscaled
  std::vector<double> extended;   // values fed to the exp/inverse stage
  std::vector<double> output;
};

// period 0 means tile_period(row.size()).
double approx_max(std::span<const double> row, const SoftmaxConfig& cfg, std::size_t period = 0);
std::vector<double> approx_softmax(std::span<const double> row, const SoftmaxConfig& cfg,
                                   std::size_t period = 0);
SoftmaxTrace approx_softmax_trace(std::span<const double> row, const SoftmaxConfig& cfg,
                                  std::size_t period = 0);
// The exp/inverse stage alone: AExp(y_j) * AInv(sum_k AExp(y_k)).
std::vector<double> approx_exp_normalize(std::span<const double> y, const SoftmaxConfig& cfg);

std::vector<double> softmax_exact(std::span<const double> x);

// Error bound for inputs whose approximate max lies within r of the true max.
double softmax_error_bound(const SoftmaxConfig& cfg, std::size_t c, double r);
// r in [r_min, 3 r_orig / 2] minimizing softmax_error_bound.
double error_bound_radius(const SoftmaxConfig& cfg, std::size_t c, double r_min);

// ---- encrypted path -------------------------------------------------------------

EncodedMatrix eval_poly(const Backend& be, const EncodedMatrix& x, const Poly& p);
EncodedMatrix a_exp(const Backend& be, const EncodedMatrix& x, double B);
EncodedMatrix a_inv(const Backend& be, const EncodedMatrix& x, double R, int iters);
// Comparison of a against b, slotwise.
EncodedMatrix a_comp(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                     const CompareChain& chain = {});
EncodedMatrix domain_extend(const Backend& be, const EncodedMatrix& x, const SoftmaxConfig& cfg);
EncodedMatrix inverse_correction(const Backend& be, const EncodedMatrix& x,
                                 const SoftmaxConfig& cfg);
// M holds rows of c logits (horizontally tiled, or untiled in one block column).
// Every slot of each row of the result holds the row's approximate maximum.
EncodedMatrix a_max(const Backend& be, const EncodedMatrix& m, std::size_t c,
                    const SoftmaxConfig& cfg);
// Row-wise softmax; result is horizontally tiled with the input's period.
EncodedMatrix a_softmax(const Backend& be, const EncodedMatrix& m, std::size_t c,
                        const SoftmaxConfig& cfg);

}  // namespace heml
