// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "heml/approx.hpp"
#include "heml/bench.hpp"
#include "heml/error.hpp"
#include "test_util.hpp"

namespace heml {
namespace {

using testing::random_matrix;
using testing::small_context;

// ---- independent oracle: Legendre projection of exp by Gauss-Legendre quadrature -------

struct Quadrature {
  std::vector<long double> x, w;
};

Quadrature gauss_legendre(int n) {
  Quadrature q;
  const long double pi = 3.141592653589793238462643383279502884L;
  for (int i = 1; i <= n; ++i) {
    long double z = std::cos(pi * (i - 0.25L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1.0L, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0L);
      const long double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-19L) break;
    }
    q.x.push_back(z);
    q.w.push_back(2.0L / ((1.0L - z * z) * dp * dp));
  }
  return q;
}

std::vector<long double> legendre_values(long double x, int deg) {
  std::vector<long double> p(deg + 1);
  p[0] = 1.0L;
  if (deg >= 1) p[1] = x;
  for (int k = 2; k <= deg; ++k) p[k] = ((2 * k - 1) * x * p[k - 1] - (k - 1) * p[k - 2]) / k;
  return p;
}

TEST(ExpCoefficients, MatchQuadratureProjection) {
  const int deg = 12;
  const Quadrature q = gauss_legendre(48);
  std::vector<long double> coef(deg + 1, 0.0L);
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    const auto p = legendre_values(q.x[i], deg);
    for (int k = 0; k <= deg; ++k) coef[k] += q.w[i] * std::exp(q.x[i]) * p[k];
  }
  for (int k = 0; k <= deg; ++k) coef[k] *= (2 * k + 1) / 2.0L;
  const Poly& base = exp_base();
  EXPECT_EQ(base.degree(), deg);
  double worst = 0.0, fit = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const long double x = -1.0L + i / 2000.0L;
    const auto p = legendre_values(x, deg);
    long double oracle = 0.0L;
    for (int k = 0; k <= deg; ++k) oracle += coef[k] * p[k];
    worst = std::max(worst, static_cast<double>(std::fabs(oracle - static_cast<long double>(base(static_cast<double>(x))))));
    fit = std::max(fit, std::abs(base(static_cast<double>(x)) - std::exp(static_cast<double>(x))));
  }
  EXPECT_LT(worst, 2e-15);
  EXPECT_LT(fit, 2e-13);
}

TEST(ApproxExp, Examples) {
  EXPECT_NEAR(approx_exp(0.0, 8.0), 1.0, 1e-3);
  EXPECT_NEAR(approx_exp(-8.0, 8.0) / approx_exp(0.0, 8.0) / std::exp(-8.0), 1.0, 0.05);
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    EXPECT_NEAR(approx_exp(x, 8.0) / std::exp(x), 1.0, 1e-10) << x;
  }
  EXPECT_THROW(approx_exp(1.0, 6.0), Error);
}

TEST(ApproxInv, Examples) {
  EXPECT_NEAR(approx_inv(1.0, 100.0, 16), 1.0, 1e-9);
  EXPECT_NEAR(approx_inv(100.0, 100.0, 16), 0.01, 1e-12);
  double worst = 0.0;
  for (double x = 0.01; x <= 100.0; x *= 1.01) worst = std::max(worst, std::abs(x * approx_inv(x, 100.0, 16) - 1.0));
  EXPECT_LT(worst, 1e-3);
  // Closed form of the iteration: x * a_n = 1 - (1 - x/R)^(2^(n+1)).
  for (double x : {0.5, 3.0, 40.0}) {
    EXPECT_NEAR(x * approx_inv(x, 100.0, 4), 1.0 - std::pow(1.0 - x / 100.0, 32), 1e-14);
  }
}

TEST(ApproxCompare, Examples) {
  const double hi = approx_compare(0.4, -0.4);
  EXPECT_GE(hi, 0.99);
  EXPECT_LE(hi, 1.0);
  for (double x : {-0.5, -0.1, 0.0, 0.3}) EXPECT_EQ(approx_compare(x, x), 0.5);
  // Monotone through the transition band; outside it the output ripples
  // within 0.0063 of the step value.
  double prev = -1.0;
  for (int i = 0; i <= 20000; ++i) {
    const double d = -1.0 + i / 10000.0;
    const double v = approx_compare(d / 2, -d / 2);
    if (std::abs(d) <= 0.082) {
      EXPECT_GE(v, prev) << d;
    } else {
      EXPECT_LT(std::abs(v - (d > 0 ? 1.0 : 0.0)), 0.0063) << d;
    }
    prev = v;
  }
}

TEST(Poly, SymmetryFlagsMatchCoefficients) {
  EXPECT_TRUE(compare_f().is_odd());
  EXPECT_TRUE(compare_g().is_odd());
  EXPECT_FALSE(compare_step().is_odd());
  EXPECT_FALSE(exp_base().is_odd());
  EXPECT_FALSE(exp_base().is_even());
  EXPECT_EQ(compare_f().degree(), 7);
  EXPECT_NEAR(compare_g().coeffs[7], -12860.0 / 1024.0, 0.0);
  EXPECT_NEAR(compare_f()(1.0), 1.0, 1e-15);
  for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_NEAR(compare_f()(-x), -compare_f()(x), 1e-15);
  for (const Poly* p : {&compare_f(), &compare_g(), &exp_base()}) {
    EXPECT_TRUE(std::isfinite((*p)(p->domain_lo)));
    EXPECT_TRUE(std::isfinite((*p)(p->domain_hi)));
  }
}

TEST(DomainExtension, OddFixedZeroAndLowerBound) {
  SoftmaxConfig cfg;
  EXPECT_EQ(domain_extend(0.0, cfg), 0.0);
  EXPECT_EQ(inverse_correction(0.0, cfg), 0.0);
  const double delta = 4.0 / (27.0 * cfg.r_orig * cfg.r_orig);
  const double l2 = cfg.ext_ratio * cfg.ext_ratio;
  for (double x = 0.0; x <= 128.0; x += 0.125) {
    EXPECT_EQ(domain_extend(-x, cfg), -domain_extend(x, cfg));
    const double y = domain_extend(x, cfg);
    EXPECT_LE(std::abs(y), 1.5 * cfg.r_orig);  // lands in the small domain
  }
  for (double x = 0.0; x <= cfg.r_orig; x += 1e-3) {
    EXPECT_GE(domain_extend(x, cfg), x - delta * l2 * x * x * x / (l2 - 1.0) - 1e-15);
  }
}

TEST(DomainExtension, DerivativeBetweenZeroAndOne) {
  SoftmaxConfig cfg;
  const double h = 1e-5;
  for (int n : {1, 3, 5}) {
    cfg.ext_index = n;
    for (double x = -1.5 * cfg.r_orig; x <= 1.5 * cfg.r_orig; x += 0.01) {
      const double d = (domain_extend(x + h, cfg) - domain_extend(x - h, cfg)) / (2 * h);
      EXPECT_GE(d, -1e-6) << x;
      EXPECT_LE(d, 1.0 + 1e-6) << x;
    }
  }
}

TEST(InverseCorrection, ImprovesMonteCarloError) {
  SoftmaxConfig prec;
  SoftmaxConfig extn;
  extn.precise = false;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-128.0, 128.0);
  double e_prec = 0.0, e_extn = 0.0;
  for (int s = 0; s < 50000; ++s) {
    std::vector<double> x(3);
    for (auto& v : x) v = u(rng);
    const auto exact = softmax_exact(x);
    const auto a = approx_softmax(x, prec);
    const auto b = approx_softmax(x, extn);
    for (int j = 0; j < 3; ++j) {
      e_prec = std::max(e_prec, std::abs(a[j] - exact[j]));
      e_extn = std::max(e_extn, std::abs(b[j] - exact[j]));
    }
  }
  EXPECT_LT(e_prec, e_extn);
  EXPECT_LT(e_prec, 0.006);
  EXPECT_LT(e_extn, 0.0075);
}

TEST(ApproxMax, Examples) {
  SoftmaxConfig cfg;
  // Logits are compared at scale 1/256, so close values are blended: the
  // estimate for (3, 1, 2, -5) sits between the top two entries.
  const std::vector<double> row{3, 1, 2, -5};
  const double m = approx_max(row, cfg);
  EXPECT_LE(m, 3.0);
  EXPECT_GE(m, 1.9);
  // Well separated rows are resolved.
  const std::vector<double> spread{60, 1, 2, -50};
  EXPECT_NEAR(approx_max(spread, cfg), 60.0, 0.05);
  // All-equal rows without pad columns come back exactly.
  for (std::size_t c : {2u, 4u, 8u}) {
    for (double v : {-100.0, 0.0, 7.5}) {
      const std::vector<double> same(c, v);
      EXPECT_EQ(approx_max(same, cfg), v);
    }
  }
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-128.0, 128.0);
  for (int s = 0; s < 10000; ++s) {
    std::vector<double> x(2 + s % 9);
    for (auto& v : x) v = u(rng);
    EXPECT_LE(approx_max(x, cfg), *std::max_element(x.begin(), x.end()) + 1e-9);
  }
}

TEST(ApproxSoftmax, MotivatingCaseAndUniformRows) {
  SoftmaxConfig cfg;
  const std::vector<double> row{8, 10, 13};
  const auto out = approx_softmax(row, cfg);
  const auto exact = softmax_exact(row);
  EXPECT_NEAR(exact[0], 0.006, 5e-4);
  EXPECT_NEAR(exact[1], 0.047, 5e-4);
  EXPECT_NEAR(exact[2], 0.946, 5e-4);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(out[j], exact[j], 0.01);
  for (std::size_t c : {2u, 3u, 7u, 10u}) {
    const std::vector<double> zeros(c, 0.0);
    for (double v : approx_softmax(zeros, cfg)) EXPECT_NEAR(v, 1.0 / c, 0.005);
  }
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-128.0, 128.0);
  for (int s = 0; s < 2000; ++s) {
    std::vector<double> x(2 + s % 9);
    for (auto& v : x) v = u(rng);
    const auto p = approx_softmax(x, cfg);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 0.01);
  }
}

TEST(SoftmaxBench, DegenerateTwoClassRuns) {
  SoftmaxBenchOptions opt;
  opt.classes = {2};
  opt.samples = 2000;
  const auto cells = bench_softmax(opt);
  EXPECT_FALSE(cells.empty());
  for (const auto& c : cells) EXPECT_TRUE(std::isfinite(c.max_error));
}

TEST(SoftmaxBench, ThreeClassErrorsAtDeskScale) {
  SoftmaxBenchOptions opt;
  opt.classes = {3};
  opt.samples = 100000;
  const auto cells = bench_softmax(opt);
  bool saw_norm = false;
  for (const auto& c : cells) {
    if (c.variant == "norm") {
      saw_norm = true;
      EXPECT_EQ(c.range, 4.0);
      EXPECT_LT(c.max_error, 1e-5);
    }
    if (c.variant == "prec" && c.range == 128.0) {
      EXPECT_LT(c.max_error, 0.006);
      EXPECT_LT(c.avg_error, 0.003);
      EXPECT_EQ(c.samples, 400000u);
    }
    EXPECT_GE(c.min_amax_gap, -1e-9);  // Amax never overshoots
  }
  EXPECT_TRUE(saw_norm);
}

TEST(SoftmaxErrorBound, LimitsAndMonotonicity) {
  SoftmaxConfig cfg;
  cfg.r_orig = 1e9;  // delta -> 0
  for (std::size_t c : {2u, 3u, 10u}) {
    for (double r : {1.0, 4.0, 9.0}) {
      EXPECT_NEAR(softmax_error_bound(cfg, c, r), 2.0 / (1.0 + std::exp(r) / (c - 1.0)), 1e-12);
    }
  }
  SoftmaxConfig small;
  small.r_orig = 1e4;
  double prev = softmax_error_bound(small, 5, 0.1);
  for (double r = 0.2; r <= 10.0; r += 0.1) {
    const double b = softmax_error_bound(small, 5, r);
    EXPECT_LT(b, prev);
    prev = b;
  }
  SoftmaxConfig defaults;
  const double r = error_bound_radius(defaults, 3, 0.5);
  EXPECT_GE(r, 0.5);
  EXPECT_LE(r, 12.0);
  EXPECT_LT(softmax_error_bound(defaults, 3, r), 0.25);
  EXPECT_THROW(softmax_error_bound(defaults, 1, 1.0), Error);
}

TEST(SoftmaxConfig, Validation) {
  SoftmaxConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.coverage_radius(), 128.0);
  EXPECT_DOUBLE_EQ(cfg.compare_radius(), 128.0);
  cfg.ext_index = 0;
  EXPECT_DOUBLE_EQ(cfg.coverage_radius(), 4.0);
  SoftmaxConfig bad;
  bad.ext_ratio = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = SoftmaxConfig{};
  bad.ext_index = -1;
  EXPECT_THROW(bad.validate(), Error);
}

// ---- encrypted path ------------------------------------------------------------------

EncodedMatrix encode_logits(const Backend& be, const Eigen::MatrixXd& m) {
  EncodeOptions o;
  o.tiling = Tiling::kHorizontal;
  return encode(be, m, o);
}

TEST(EncryptedSoftmax, MatchesScalarPathExactly) {
  auto p = small_context(16, 16);
  p.auto_bootstrap = true;
  Emulator emu(p);
  SoftmaxConfig cfg;
  for (std::size_t c : {2u, 3u, 5u, 10u, 16u}) {
    const auto m = random_matrix(21, static_cast<Eigen::Index>(c), c, -128.0, 128.0);
    const auto out = decode(emu, a_softmax(emu, encode_logits(emu, m), c, cfg), Role::kClient);
    const auto mx = decode(emu, a_max(emu, encode_logits(emu, m), c, cfg), Role::kClient);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      const auto want = approx_softmax(row, cfg);
      for (std::size_t j = 0; j < c; ++j) EXPECT_NEAR(out(i, static_cast<Eigen::Index>(j)), want[j], 1e-12);
      EXPECT_NEAR(mx(i, 0), approx_max(row, cfg), 1e-12);
    }
  }
}

TEST(EncryptedSoftmax, ExamplesAndDepth) {
  auto p = small_context(4, 8);
  p.auto_bootstrap = true;
  Emulator emu(p);
  SoftmaxConfig cfg;
  Eigen::MatrixXd m(2, 4);
  m << 60, 1, 2, -50, 8, 10, 13, 0;
  const auto mx = decode(emu, a_max(emu, encode_logits(emu, m), 4, cfg), Role::kClient);
  EXPECT_NEAR(mx(0, 0), 60.0, 0.05);
  EXPECT_EQ(mx(0, 3), mx(0, 0));  // broadcast
  const auto out = decode(emu, a_softmax(emu, encode_logits(emu, m.leftCols(3)), 3, cfg), Role::kClient);
  EXPECT_NEAR(out(1, 2), 0.946, 0.01);

  Emulator strict(small_context(4, 8));
  EXPECT_THROW(a_softmax(strict, encode_logits(strict, m), 4, cfg), DepthExhausted);
}

TEST(EncryptedPieces, MatchScalarFunctions) {
  Emulator emu(small_context(4, 8));
  const auto x = random_matrix(4, 8, 3, -8.0, 8.0);
  SoftmaxConfig cfg;
  const auto e = decode(emu, a_exp(emu, encode(emu, x), 8.0), Role::kClient);
  const auto pos = random_matrix(4, 8, 4, 0.1, 100.0);
  const auto inv = decode(emu, a_inv(emu, encode(emu, pos), 100.0, 8), Role::kClient);
  const auto wide = random_matrix(4, 8, 5, -128.0, 128.0);
  auto ep = small_context(4, 8);
  ep.auto_bootstrap = true;
  Emulator auto_emu(ep);
  const auto ext = decode(auto_emu, domain_extend(auto_emu, encode(auto_emu, wide), cfg), Role::kClient);
  const auto a = random_matrix(4, 8, 6, -0.5, 0.5);
  const auto b = random_matrix(4, 8, 7, -0.5, 0.5);
  const auto cmp = decode(auto_emu, a_comp(auto_emu, encode(auto_emu, a), encode(auto_emu, b)), Role::kClient);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      EXPECT_NEAR(e(i, j), approx_exp(x(i, j), 8.0), 1e-12 * std::max(1.0, std::abs(e(i, j))));
      EXPECT_NEAR(inv(i, j), approx_inv(pos(i, j), 100.0, 8), 1e-14);
      EXPECT_NEAR(ext(i, j), domain_extend(wide(i, j), cfg), 1e-12);
      EXPECT_NEAR(cmp(i, j), approx_compare(a(i, j), b(i, j)), 1e-13);
    }
  }
}

// Exact-softmax properties the error bound rests on.
TEST(ExactSoftmaxInequalities, TailLipschitzAndTruncation) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::uniform_int_distribution<int> cdist(2, 10);
  for (int s = 0; s < 20000; ++s) {
    const int c = cdist(rng);
    std::vector<double> x(c), y(c);
    for (int j = 0; j < c; ++j) {
      x[j] = u(rng);
      y[j] = x[j] + u(rng) / 10.0;
    }
    const auto sx = softmax_exact(x);
    const auto sy = softmax_exact(y);
    double dmax = 0.0, dout = 0.0;
    for (int j = 0; j < c; ++j) {
      dmax = std::max(dmax, std::abs(x[j] - y[j]));
      dout = std::max(dout, std::abs(sx[j] - sy[j]));
    }
    EXPECT_LE(dout, 0.5 * dmax + 1e-12);

    // Shift invariance.
    std::vector<double> shifted(x);
    for (auto& v : shifted) v -= 3.7;
    const auto ss = softmax_exact(shifted);
    for (int j = 0; j < c; ++j) EXPECT_NEAR(ss[j], sx[j], 1e-12);

    const double m = *std::max_element(x.begin(), x.end());
    if (m >= 0) {
      for (int j = 0; j < c; ++j) {
        const double r = -x[j];
        if (r > 0) EXPECT_LE(sx[j], 1.0 / (1.0 + std::exp(r)) + 1e-12);
      }
    }
    std::vector<double> sorted(x);
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] >= 0) {
      const double r = 5.0;
      std::size_t k = 0;
      while (k < sorted.size() && sorted[k] >= -r) ++k;
      if (k >= 1 && k < sorted.size()) {
        const auto full = softmax_exact(sorted);
        const auto trunc = softmax_exact(std::span<const double>(sorted.data(), k));
        for (std::size_t i = 0; i < k; ++i) {
          const double diff = trunc[i] - full[i];
          EXPECT_GE(diff, -1e-12);
          EXPECT_LE(diff, (c - 1.0) / (c - 1.0 + std::exp(r)) + 1e-12);
          EXPECT_LE(diff, (c - static_cast<double>(k)) / ((i + 1.0) * (c - 1.0 + std::exp(r))) + 1e-12);
        }
      }
    }
  }
}

}  // namespace
}  // namespace heml
