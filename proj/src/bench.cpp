// SPDX-License-Identifier: Apache-2.0
#include "heml/bench.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "heml/error.hpp"

namespace heml {

namespace {

Eigen::MatrixXd random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  }
  return m;
}

EncodedMatrix enc(const Backend& be, const Eigen::MatrixXd& m, Tiling t) {
  EncodeOptions o;
  o.tiling = t;
  return encode(be, m, o);
}

}  // namespace

MatmulCaseResult run_matmul_case(const MatmulShape& shape, MatmulAlgorithm alg, std::size_t slots,
                                 std::size_t s0, std::uint64_t seed, const OpWeights& weights) {
  if (!std::has_single_bit(slots) || slots < 4) {
    throw Error(Module::kMatmul, ErrorCode::kInvalidArgument, "slot count must be a power of two >= 4");
  }
  if (s0 == 0) s0 = std::min<std::size_t>(std::bit_ceil(shape.a), slots / 2);
  if (s0 == 0 || slots % s0 != 0) {
    throw Error(Module::kMatmul, ErrorCode::kInvalidArgument, "s0 must divide the slot count");
  }
  MatmulCaseResult res;
  res.shape = shape;
  res.algorithm = alg;
  res.s0 = s0;
  res.s1 = slots / s0;
  res.formula = count_formula(alg, shape.a, shape.b, shape.c, res.s0, res.s1);
  if (!is_executable(alg)) {
    res.estimated_ms = static_cast<double>(res.formula.cmult) * weights.cmult +
                       static_cast<double>(res.formula.mult) * weights.mult +
                       static_cast<double>(res.formula.rot) * weights.rot;
    res.oracle_error = std::numeric_limits<double>::quiet_NaN();
    return res;
  }

  ContextParams p;
  p.s0 = res.s0;
  p.s1 = res.s1;
  p.weights = weights;
  Emulator emu(p);
  std::mt19937_64 rng(seed);
  const bool abt = alg == MatmulAlgorithm::kDiagAbt || alg == MatmulAlgorithm::kColMajorAbt;
  // AB^T: A a x b, B c x b. A^TB: A a x c, B a x b.
  const Eigen::MatrixXd a = abt ? random_matrix(shape.a, shape.b, rng) : random_matrix(shape.a, shape.c, rng);
  const Eigen::MatrixXd b = abt ? random_matrix(shape.c, shape.b, rng) : random_matrix(shape.a, shape.b, rng);
  const Eigen::MatrixXd expect = abt ? Eigen::MatrixXd(a * b.transpose()) : Eigen::MatrixXd(a.transpose() * b);

  EncodedMatrix ea;
  EncodedMatrix eb;
  switch (alg) {
    case MatmulAlgorithm::kDiagAbt:
      ea = enc(emu, a, Tiling::kNone);
      eb = enc(emu, b, Tiling::kVertical);
      break;
    case MatmulAlgorithm::kDiagAtbRotateLeft:
    case MatmulAlgorithm::kDiagAtbPartialRotate:
      ea = enc(emu, a, Tiling::kHorizontal);
      eb = enc(emu, b, Tiling::kNone);
      break;
    default:
      ea = enc(emu, a, Tiling::kNone);
      eb = enc(emu, b, Tiling::kNone);
      break;
  }
  const int level_before = std::max(ea.level(), eb.level());
  const OpCounts before = emu.ledger().snapshot();
  EncodedMatrix out;
  switch (alg) {
    case MatmulAlgorithm::kDiagAbt: out = diag_abt(emu, ea, eb); break;
    case MatmulAlgorithm::kDiagAtbRotateLeft: out = diag_atb(emu, ea, eb, 1.0, AtbPath::kRotateLeft); break;
    case MatmulAlgorithm::kDiagAtbPartialRotate:
      out = diag_atb(emu, ea, eb, 1.0, AtbPath::kPartialRotate);
      break;
    case MatmulAlgorithm::kColMajorAbt: out = col_major_abt(emu, ea, eb); break;
    case MatmulAlgorithm::kRowMajorAtb: out = row_major_atb(emu, ea, eb); break;
    default: break;
  }
  res.ledger = emu.ledger().snapshot() - before;
  res.executed = OpEstimate{res.ledger[OpKind::kCMult], res.ledger[OpKind::kMult], res.ledger[OpKind::kRot]};
  res.estimated_ms = estimated_ms(res.ledger, weights);
  res.levels_consumed = level_before - out.level();
  const Eigen::MatrixXd got = decode(emu, out, Role::kDiagnostics);
  res.oracle_error = (got - expect).norm() / expect.norm();
  return res;
}

std::vector<double> softmax_ranges(double max_range) {
  std::vector<double> out;
  for (double r : {4.0, 8.0, 32.0, 128.0}) {
    if (r <= max_range) out.push_back(r);
  }
  if (out.empty() || out.back() < max_range) out.push_back(max_range);
  return out;
}

SoftmaxConfig softmax_variant(const SoftmaxConfig& base, const std::string& variant) {
  SoftmaxConfig cfg = base;
  if (variant == "norm") {
    cfg.ext_index = 0;
    cfg.precise = false;
  } else if (variant == "extn") {
    cfg.precise = false;
  } else if (variant == "prec") {
    cfg.precise = true;
  } else {
    throw Error(Module::kApprox, ErrorCode::kInvalidArgument, "unknown softmax variant " + variant);
  }
  return cfg;
}

namespace {

struct Accum {
  std::uint64_t n = 0;
  double max_err = 0.0;
  double sum_err = 0.0;
  double max_gap = -std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  double max_stage = 0.0;

  void merge(const Accum& o) {
    n += o.n;
    max_err = std::max(max_err, o.max_err);
    sum_err += o.sum_err;
    max_gap = std::max(max_gap, o.max_gap);
    min_gap = std::min(min_gap, o.min_gap);
    max_stage = std::max(max_stage, o.max_stage);
  }
};

double inf_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

std::vector<SoftmaxCell> bench_softmax(const SoftmaxBenchOptions& opt) {
  const std::vector<std::string> variants{"norm", "extn", "prec"};
  std::vector<SoftmaxConfig> cfgs;
  for (const auto& v : variants) {
    cfgs.push_back(softmax_variant(opt.base, v));
    cfgs.back().validate();
  }
  const auto ranges = softmax_ranges(opt.max_range);
  std::vector<SoftmaxCell> cells;
  std::vector<double> x;
  for (std::size_t ci = 0; ci < opt.classes.size(); ++ci) {
    const std::size_t c = opt.classes[ci];
    if (c < 2) throw Error(Module::kApprox, ErrorCode::kInvalidArgument, "class count must be >= 2");
    x.resize(c);
    std::vector<Accum> total(variants.size());
    for (std::size_t ri = 0; ri < ranges.size(); ++ri) {
      const double range = ranges[ri];
      // Deterministic per-(c, range) stream.
      std::mt19937_64 rng(opt.seed ^ (0x9E3779B97F4A7C15ull * (ci + 1)) ^ (0xC2B2AE3D27D4EB4Full * (ri + 1)));
      std::uniform_real_distribution<double> dist(-range, range);
      std::vector<Accum> acc(variants.size());
      std::vector<bool> active(variants.size());
      for (std::size_t v = 0; v < variants.size(); ++v) {
        active[v] = range <= cfgs[v].coverage_radius();
      }
      for (std::uint64_t s = 0; s < opt.samples; ++s) {
        for (auto& xi : x) xi = dist(rng);
        const std::vector<double> exact = softmax_exact(x);
        const double mx = *std::max_element(x.begin(), x.end());
        for (std::size_t v = 0; v < variants.size(); ++v) {
          if (!active[v]) continue;
          const SoftmaxTrace tr = approx_softmax_trace(x, cfgs[v]);
          const double err = inf_norm_diff(tr.output, exact);
          auto& a = acc[v];
          ++a.n;
          a.max_err = std::max(a.max_err, std::isfinite(err) ? err : std::numeric_limits<double>::infinity());
          a.sum_err += err;
          a.max_gap = std::max(a.max_gap, mx - tr.amax);
          a.min_gap = std::min(a.min_gap, mx - tr.amax);
          const double stage = inf_norm_diff(tr.output, softmax_exact(tr.extended));
          a.max_stage = std::max(a.max_stage, stage);
        }
      }
      for (std::size_t v = 0; v < variants.size(); ++v) {
        if (!active[v]) continue;
        total[v].merge(acc[v]);
        SoftmaxCell cell;
        cell.classes = c;
        cell.range = range;
        cell.variant = variants[v];
        cell.samples = total[v].n;
        cell.max_error = total[v].max_err;
        cell.avg_error = total[v].sum_err / static_cast<double>(total[v].n);
        cell.max_amax_gap = total[v].max_gap;
        cell.min_amax_gap = total[v].min_gap;
        cell.max_stage_error = total[v].max_stage;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

}  // namespace heml
