// SPDX-License-Identifier: Apache-2.0
#include "heml/approx.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "heml/error.hpp"

namespace heml {

namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(Module::kApprox, ErrorCode::kInvalidArgument, what);
}

// Factors x^k = x^a * x^b used by both evaluation paths.
std::pair<int, int> power_split(int k) {
  if (std::has_single_bit(static_cast<unsigned>(k))) return {k / 2, k / 2};
  const int a = static_cast<int>(std::bit_floor(static_cast<unsigned>(k)));
  return {a, k - a};
}

int power_depth(int k) {
  return k <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<unsigned>(k - 1)));
}

Poly make_poly(std::vector<double> c, double lo = -1.0, double hi = 1.0) {
  Poly p;
  p.coeffs = std::move(c);
  p.domain_lo = lo;
  p.domain_hi = hi;
  return p;
}

double inverse_correction_gain(const SoftmaxConfig& cfg) {
  const double l2 = cfg.ext_ratio * cfg.ext_ratio;
  const double l2n = std::pow(l2, cfg.ext_index);
  return 4.0 / 27.0 * l2 * (l2n - 1.0) / (l2n * (l2 - 1.0));
}

Poly inverse_correction_poly(const SoftmaxConfig& cfg) {
  const double k = inverse_correction_gain(cfg);
  const double r2 = cfg.r_orig * cfg.r_orig;
  return make_poly({0.0, 1.0, 0.0, k / r2, 0.0, -k / (r2 * r2)}, -cfg.r_orig, cfg.r_orig);
}

double extension_kappa(const SoftmaxConfig& cfg, int i) {
  return 4.0 / (27.0 * cfg.r_orig * cfg.r_orig * std::pow(cfg.ext_ratio, 2 * i));
}

int log2_exact(double b) {
  if (!(b >= 1.0) || b != std::floor(b) || !std::has_single_bit(static_cast<unsigned long>(b))) {
    bad_config("exp range must be a power of two");
  }
  const auto n = static_cast<unsigned long>(b);
  return static_cast<int>(std::countr_zero(n));
}

double compare_chain(double d, const CompareChain& chain) {
  for (int i = 0; i < chain.g_count; ++i) d = compare_g()(d);
  for (int i = 1; i < chain.f_count; ++i) d = compare_f()(d);
  return compare_step()(d);
}

std::size_t resolve_period(std::size_t c, std::size_t period) {
  const std::size_t p = period == 0 ? tile_period(c) : period;
  if (c == 0 || !std::has_single_bit(p) || p < c) bad_config("invalid softmax period");
  return p;
}

}  // namespace

// ---- configuration -------------------------------------------------------------

void SoftmaxConfig::validate() const {
  if (!(r_orig > 0.0)) bad_config("r_orig must be positive");
  if (!(ext_ratio > 1.0)) bad_config("extension ratio must exceed 1");
  if (ext_index < 0) bad_config("extension index must be >= 0");
  const double b = exp_range;
  if (!(b >= 1.0) || b != std::floor(b) || !std::has_single_bit(static_cast<unsigned long>(b))) {
    bad_config("exp_range must be a power of two");
  }
  if (!(inv_range > 0.0)) bad_config("inv_range must be positive");
  if (inv_iters < 0) bad_config("inv_iters must be >= 0");
  if (compare.g_count < 0 || compare.f_count < 1) bad_config("comparison chain needs f at least once");
}

double SoftmaxConfig::coverage_radius() const {
  return 0.5 * std::pow(ext_ratio, ext_index) * r_orig;
}

double SoftmaxConfig::compare_radius() const { return std::ceil(coverage_radius()); }

// ---- polynomials ------------------------------------------------------------------

int Poly::degree() const {
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k) {
    if (coeffs[static_cast<std::size_t>(k)] != 0.0) return k;
  }
  return 0;
}

bool Poly::is_odd() const {
  for (std::size_t k = 0; k < coeffs.size(); k += 2) {
    if (coeffs[k] != 0.0) return false;
  }
  return true;
}

bool Poly::is_even() const {
  for (std::size_t k = 1; k < coeffs.size(); k += 2) {
    if (coeffs[k] != 0.0) return false;
  }
  return true;
}

int Poly::depth() const {
  int d = 0;
  for (std::size_t k = 1; k < coeffs.size(); ++k) {
    if (coeffs[k] != 0.0) d = std::max(d, power_depth(static_cast<int>(k)) + 1);
  }
  return d;
}

double Poly::operator()(double x) const {
  const int deg = degree();
  std::vector<std::optional<double>> pw(static_cast<std::size_t>(deg) + 1);
  if (deg >= 1) pw[1] = x;
  auto power = [&](auto&& self, int k) -> double {
    auto& slot = pw[static_cast<std::size_t>(k)];
    if (!slot) {
      const auto [a, b] = power_split(k);
      slot = self(self, a) * self(self, b);
    }
    return *slot;
  };
  std::optional<double> acc;
  for (int k = 1; k <= deg; ++k) {
    const double ck = coeffs[static_cast<std::size_t>(k)];
    if (ck == 0.0) continue;
    const double term = power(power, k) * ck;
    acc = acc ? *acc + term : term;
  }
  const double c0 = coeffs.empty() ? 0.0 : coeffs[0];
  if (!acc) return x * 0.0 + c0;
  return c0 != 0.0 ? *acc + c0 : *acc;
}

const Poly& compare_f() {
  static const Poly p =
      make_poly({0.0, 35.0 / 16.0, 0.0, -35.0 / 16.0, 0.0, 21.0 / 16.0, 0.0, -5.0 / 16.0});
  return p;
}

const Poly& compare_g() {
  static const Poly p = make_poly({0.0, 4589.0 / 1024.0, 0.0, -16577.0 / 1024.0, 0.0,
                                   25614.0 / 1024.0, 0.0, -12860.0 / 1024.0});
  return p;
}

const Poly& compare_step() {
  static const Poly p = [] {
    Poly s = compare_f();
    for (auto& c : s.coeffs) c *= 0.5;
    s.coeffs[0] = 0.5;
    return s;
  }();
  return p;
}

const Poly& exp_base() {
  // Generated by tools/gen_coeffs.py.
  static const Poly p = make_poly({
      1.0000000000000009962,
      9.9999999999962312488e-1,
      4.9999999999989542687e-1,
      1.6666666667796794962e-1,
      4.1666666668443682097e-2,
      8.3333332373315407362e-3,
      1.3888888776409075227e-3,
      1.9841304552712354736e-4,
      2.4801621016530021926e-5,
      2.7551254062640085776e-6,
      2.7552157002946091808e-7,
      2.5557816602842825843e-8,
      2.1266714400796084056e-9,
  });
  return p;
}

Poly exp_scaled(double B) {
  Poly p = exp_base();
  double scale = 1.0;
  for (auto& c : p.coeffs) {
    c *= scale;
    scale /= B;
  }
  p.domain_lo = -B;
  p.domain_hi = B;
  return p;
}

// ---- scalar path --------------------------------------------------------------------

double approx_exp(double x, double B) {
  double e = exp_scaled(B)(x);
  for (int i = 0; i < log2_exact(B); ++i) e = e * e;
  return e;
}

double approx_inv(double x, double R, int iters) {
  double a = x * (-1.0 / (R * R)) + 2.0 / R;
  double b = x * (-1.0 / R) + 1.0;
  for (int i = 0; i < iters; ++i) {
    b = b * b;
    a = a * (b + 1.0);
  }
  return a;
}

double approx_compare(double a, double b, const CompareChain& chain) {
  return compare_chain(a - b, chain);
}

double domain_extend(double x, const SoftmaxConfig& cfg) {
  for (int i = cfg.ext_index - 1; i >= 0; --i) {
    const double kappa = extension_kappa(cfg, i);
    x = x - (x * x) * (x * kappa);
  }
  return x;
}

double inverse_correction(double x, const SoftmaxConfig& cfg) {
  return inverse_correction_poly(cfg)(x);
}

namespace {

double scalar_amax(std::span<const double> row, const SoftmaxConfig& cfg, std::size_t p) {
  const std::size_t c = row.size();
  const double radius = cfg.compare_radius();
  const double scale = 1.0 / (2.0 * radius);
  std::vector<double> v(p);
  for (std::size_t j = 0; j < p; ++j) v[j] = j < c ? row[j] * scale : 0.0 * scale - 0.5;
  for (std::size_t s = 1; s < p; s <<= 1) {
    for (std::size_t i = 0; i + s < p; i += 2 * s) {
      const double d = v[i] - v[i + s];
      v[i] = v[i + s] + d * compare_chain(d, cfg.compare);
    }
  }
  return v[0] * (2.0 * radius);
}

}  // namespace

double approx_max(std::span<const double> row, const SoftmaxConfig& cfg, std::size_t period) {
  return scalar_amax(row, cfg, resolve_period(row.size(), period));
}

std::vector<double> approx_exp_normalize(std::span<const double> y, const SoftmaxConfig& cfg) {
  const std::size_t c = y.size();
  const std::size_t p = tile_period(c);
  std::vector<double> e(c);
  for (std::size_t j = 0; j < c; ++j) e[j] = approx_exp(y[j], cfg.exp_range) * 1.0;
  std::vector<double> t(p, 0.0);
  std::copy(e.begin(), e.end(), t.begin());
  for (std::size_t s = 1; s < p; s <<= 1) {
    for (std::size_t i = 0; i + s < p; i += 2 * s) t[i] = t[i] + t[i + s];
  }
  const double z = approx_inv(t[0] * 1.0, cfg.inv_range, cfg.inv_iters);
  std::vector<double> out(c);
  for (std::size_t j = 0; j < c; ++j) out[j] = e[j] * z;
  return out;
}

SoftmaxTrace approx_softmax_trace(std::span<const double> row, const SoftmaxConfig& cfg,
                                  std::size_t period) {
  const std::size_t c = row.size();
  const std::size_t p = resolve_period(c, period);
  SoftmaxTrace tr;
  tr.amax = scalar_amax(row, cfg, p);
  tr.extended.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    double y = (row[j] - tr.amax) * 1.0;
    y = domain_extend(y, cfg);
    if (cfg.precise && cfg.ext_index > 0) y = inverse_correction(y, cfg);
    tr.extended[j] = y;
  }
  tr.output = approx_exp_normalize(tr.extended, cfg);
  return tr;
}

std::vector<double> approx_softmax(std::span<const double> row, const SoftmaxConfig& cfg,
                                   std::size_t period) {
  return approx_softmax_trace(row, cfg, period).output;
}

std::vector<double> softmax_exact(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = std::exp(x[j] - mx);
    sum += out[j];
  }
  for (auto& v : out) v /= sum;
  return out;
}

double softmax_error_bound(const SoftmaxConfig& cfg, std::size_t c, double r) {
  if (c < 2) bad_config("softmax_error_bound needs c >= 2");
  const double delta = 4.0 / (27.0 * cfg.r_orig * cfg.r_orig);
  const double l2 = cfg.ext_ratio * cfg.ext_ratio;
  const double shrink = delta * l2 * r * r * r / (l2 - 1.0);
  const double cm1 = static_cast<double>(c - 1);
  return 1.0 / (1.0 + std::exp(r) / cm1) + 1.0 / (1.0 + std::exp(r - shrink) / cm1) + 0.5 * shrink;
}

double error_bound_radius(const SoftmaxConfig& cfg, std::size_t c, double r_min) {
  const double r_max = 1.5 * cfg.r_orig;
  if (r_min >= r_max) return r_min;
  const int steps = 20000;
  double best_r = r_min;
  double best = softmax_error_bound(cfg, c, r_min);
  for (int i = 1; i <= steps; ++i) {
    const double r = r_min + (r_max - r_min) * i / steps;
    const double b = softmax_error_bound(cfg, c, r);
    if (b < best) {
      best = b;
      best_r = r;
    }
  }
  return best_r;
}

// ---- encrypted path -------------------------------------------------------------------

EncodedMatrix eval_poly(const Backend& be, const EncodedMatrix& x0, const Poly& p) {
  const int deg = p.degree();
  const EncodedMatrix x = ensure_level(be, x0, p.depth());
  std::vector<std::optional<EncodedMatrix>> pw(static_cast<std::size_t>(deg) + 1);
  if (deg >= 1) pw[1] = x;
  auto power = [&](auto&& self, int k) -> const EncodedMatrix& {
    auto& slot = pw[static_cast<std::size_t>(k)];
    if (!slot) {
      const auto [a, b] = power_split(k);
      EncodedMatrix lhs = self(self, a);
      slot = mult(be, lhs, self(self, b));
    }
    return *slot;
  };
  std::optional<EncodedMatrix> acc;
  for (int k = 1; k <= deg; ++k) {
    const double ck = p.coeffs[static_cast<std::size_t>(k)];
    if (ck == 0.0) continue;
    EncodedMatrix term = cmult(be, power(power, k), ck);
    acc = acc ? add(be, *acc, term) : std::move(term);
  }
  const double c0 = p.coeffs.empty() ? 0.0 : p.coeffs[0];
  if (!acc) return add_scalar(be, cmult(be, x, 0.0), c0);
  return c0 != 0.0 ? add_scalar(be, *acc, c0) : *acc;
}

EncodedMatrix a_exp(const Backend& be, const EncodedMatrix& x, double B) {
  EncodedMatrix e = eval_poly(be, x, exp_scaled(B));
  for (int i = 0; i < log2_exact(B); ++i) e = mult(be, e, e);
  return e;
}

EncodedMatrix a_inv(const Backend& be, const EncodedMatrix& x0, double R, int iters) {
  const EncodedMatrix x = ensure_level(be, x0, 1);
  EncodedMatrix a = add_scalar(be, cmult(be, x, -1.0 / (R * R)), 2.0 / R);
  EncodedMatrix b = add_scalar(be, cmult(be, x, -1.0 / R), 1.0);
  for (int i = 0; i < iters; ++i) {
    b = mult(be, b, b);
    a = mult(be, a, add_scalar(be, b, 1.0));
  }
  return a;
}

namespace {

EncodedMatrix compare_chain(const Backend& be, EncodedMatrix d, const CompareChain& chain) {
  for (int i = 0; i < chain.g_count; ++i) d = eval_poly(be, d, compare_g());
  for (int i = 1; i < chain.f_count; ++i) d = eval_poly(be, d, compare_f());
  return eval_poly(be, d, compare_step());
}

std::size_t softmax_period(const Backend& be, const EncodedMatrix& m, std::size_t c) {
  if (m.grid_cols != 1) {
    throw ShapeMismatch(Module::kApprox, "softmax input must fit one block column");
  }
  if (c == 0 || c > m.cols) throw ShapeMismatch(Module::kApprox, "class count exceeds input width");
  const std::size_t p = m.tiling == Tiling::kHorizontal ? m.period : tile_period(c);
  if (p < c || p > be.context().s1()) {
    throw ShapeMismatch(Module::kApprox, "softmax period does not fit the block width");
  }
  return p;
}

EncodedMatrix encrypted_amax(const Backend& be, const EncodedMatrix& m, std::size_t c,
                             std::size_t p, const SoftmaxConfig& cfg) {
  const auto& ctx = be.context();
  const double radius = cfg.compare_radius();
  EncodedMatrix mx = cmult(be, ensure_level(be, m, 1), 1.0 / (2.0 * radius));
  if (c < p) mx = add_plain(be, mx, column_mask(be, c, ctx.s1(), -0.5));
  for (std::size_t s = 1; s < p; s <<= 1) {
    const EncodedMatrix rot = lrot(be, mx, static_cast<long>(s));
    const EncodedMatrix d = sub(be, mx, rot);
    const EncodedMatrix comp = compare_chain(be, d, cfg.compare);
    mx = add(be, rot, mult(be, d, comp));
  }
  mx = cmult(be, ensure_level(be, mx, 1), column_mask(be, 0, 1, 2.0 * radius));
  for (int t = 0; t < ctx.log_s1(); ++t) mx = add(be, mx, rrot(be, mx, 1L << t));
  return mx;
}

}  // namespace

EncodedMatrix a_comp(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                     const CompareChain& chain) {
  return compare_chain(be, sub(be, a, b), chain);
}

EncodedMatrix domain_extend(const Backend& be, const EncodedMatrix& x0, const SoftmaxConfig& cfg) {
  EncodedMatrix x = x0;
  for (int i = cfg.ext_index - 1; i >= 0; --i) {
    x = ensure_level(be, x, 2);
    const EncodedMatrix sq = mult(be, x, x);
    const EncodedMatrix scaled = cmult(be, x, extension_kappa(cfg, i));
    x = sub(be, x, mult(be, sq, scaled));
  }
  return x;
}

EncodedMatrix inverse_correction(const Backend& be, const EncodedMatrix& x,
                                 const SoftmaxConfig& cfg) {
  return eval_poly(be, x, inverse_correction_poly(cfg));
}

EncodedMatrix a_max(const Backend& be, const EncodedMatrix& m, std::size_t c,
                    const SoftmaxConfig& cfg) {
  cfg.validate();
  const std::size_t p = softmax_period(be, m, c);
  EncodedMatrix out = encrypted_amax(be, m, c, p, cfg);
  out.rows = m.rows;
  out.cols = be.context().s1();
  out.tiling = Tiling::kNone;
  out.period = 0;
  return out;
}

EncodedMatrix a_softmax(const Backend& be, const EncodedMatrix& m, std::size_t c,
                        const SoftmaxConfig& cfg) {
  cfg.validate();
  const auto& ctx = be.context();
  const std::size_t p = softmax_period(be, m, c);
  const CipherBlock live = column_mask(be, 0, c);

  const EncodedMatrix mx = encrypted_amax(be, m, c, p, cfg);
  EncodedMatrix y = cmult(be, ensure_level(be, sub(be, m, mx), 1), live);
  y = domain_extend(be, y, cfg);
  if (cfg.precise && cfg.ext_index > 0) y = inverse_correction(be, y, cfg);
  EncodedMatrix e = a_exp(be, y, cfg.exp_range);
  e = cmult(be, ensure_level(be, e, 1), live);
  const EncodedMatrix total = col_sums(be, ensure_level(be, e, 1));
  const EncodedMatrix z = a_inv(be, total, cfg.inv_range, cfg.inv_iters);
  EncodedMatrix out = mult(be, e, z);
  for (std::size_t stride = p; stride < ctx.s1(); stride <<= 1) {
    out = add(be, out, rrot(be, out, static_cast<long>(stride)));
  }
  out.rows = m.rows;
  out.cols = c;
  out.tiling = Tiling::kHorizontal;
  out.period = p;
  out.tag = DataTag::kProbabilities;
  return out;
}

}  // namespace heml
