// SPDX-License-Identifier: Apache-2.0
#include "heml/matmul.hpp"

#include <bit>
#include <string>

#include "heml/error.hpp"

namespace heml {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::uint64_t log2u(std::size_t x) { return static_cast<std::uint64_t>(std::countr_zero(x)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(Module::kMatmul, what);
}

void require_period(const EncodedMatrix& m, const EmulatorContext& ctx) {
  require(m.period >= 2 && m.period % 2 == 0 && std::has_single_bit(m.period),
          "tile period must be an even power of two");
  require(m.period <= ctx.s0() && m.period <= ctx.s1(), "tile period exceeds the block shape");
}

void accumulate(const Backend& be, std::optional<EncodedMatrix>& acc, EncodedMatrix term) {
  if (!acc) {
    acc = std::move(term);
  } else {
    acc = add(be, *acc, term);
  }
}

}  // namespace

EncodedMatrix diag_abt(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b, double t) {
  const auto& ctx = be.context();
  require(a.tiling == Tiling::kNone, "diag_abt: A must be untiled");
  require(b.tiling == Tiling::kVertical, "diag_abt: B must be vertically tiled");
  require(a.cols == b.cols && a.grid_cols == b.grid_cols, "diag_abt: inner dimensions differ");
  require_period(b, ctx);
  const std::size_t c = b.period;

  const EncodedMatrix b_cplx = complexify_rows(be, b, c);
  std::optional<EncodedMatrix> x;
  for (std::size_t k = 0; k < c / 2; ++k) {
    const EncodedMatrix prod = mult(be, a, rot_up(be, b_cplx, static_cast<long>(k)));
    const CipherBlock mask = make_mask(be, static_cast<long>(k), c, true, t);
    accumulate(be, x, cmult(be, col_sums(be, prod), mask));
  }
  EncodedMatrix out = add(be, *x, conj(be, *x));
  out.rows = a.rows;
  out.cols = b.rows;
  out.tiling = Tiling::kHorizontal;
  out.period = c;
  out.tag = DataTag::kOther;
  return out;
}

AtbPath resolve_atb_path(const EncodedMatrix& a, const EncodedMatrix& b, AtbPath path) {
  if (path != AtbPath::kAuto) return path;
  return a.level() < b.level() ? AtbPath::kPartialRotate : AtbPath::kRotateLeft;
}

EncodedMatrix diag_atb(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b, double t,
                       AtbPath path) {
  const auto& ctx = be.context();
  require(a.tiling == Tiling::kHorizontal, "diag_atb: A must be horizontally tiled");
  require(b.tiling == Tiling::kNone, "diag_atb: B must be untiled");
  require(a.rows == b.rows && a.grid_rows == b.grid_rows, "diag_atb: row counts differ");
  require_period(a, ctx);
  const std::size_t c = a.period;
  const AtbPath chosen = resolve_atb_path(a, b, path);

  const EncodedMatrix a_cplx = complexify_cols(be, a, c);
  std::optional<EncodedMatrix> x;
  for (std::size_t k = 0; k < c / 2; ++k) {
    const long kk = static_cast<long>(k);
    EncodedMatrix prod = chosen == AtbPath::kRotateLeft
                             ? mult(be, rot_left(be, a_cplx, kk), b)
                             : mult(be, lrot(be, a_cplx, kk), prot_up(be, b, kk));
    const CipherBlock mask = make_mask(be, -kk, c, true, t);
    accumulate(be, x, cmult(be, row_sums(be, prod), mask));
  }
  EncodedMatrix out = add(be, *x, conj(be, *x));
  out.rows = a.cols;
  out.cols = b.cols;
  out.tiling = Tiling::kVertical;
  out.period = c;
  out.tag = DataTag::kOther;
  return out;
}

EncodedMatrix col_major_abt(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                            double t) {
  const auto& ctx = be.context();
  require(a.tiling == Tiling::kNone && b.tiling == Tiling::kNone, "col_major_abt: inputs must be untiled");
  require(a.cols == b.cols && a.grid_cols == b.grid_cols, "col_major_abt: inner dimensions differ");
  require(b.rows <= ctx.s0() && b.rows <= ctx.s1(), "col_major_abt: c must fit one block");
  const long s1 = static_cast<long>(ctx.s1());
  const CipherBlock first_col = column_mask(be, 0, 1, t);

  std::optional<EncodedMatrix> x;
  for (std::size_t j = 0; j < b.rows; ++j) {
    EncodedMatrix row = cmult(be, b, row_mask(be, j, j + 1));
    for (int s = 0; s < ctx.log_s0(); ++s) row = add(be, row, lrot(be, row, (1L << s) * s1));
    const EncodedMatrix prod = mult(be, a, row);
    EncodedMatrix col = prod.like();
    col.grid_cols = 1;
    col.blocks.assign(a.grid_rows, CipherBlock{});
    for (std::size_t i = 0; i < a.grid_rows; ++i) {
      CipherBlock acc = prod.block(i, 0);
      for (std::size_t q = 1; q < prod.grid_cols; ++q) acc = be.add(acc, prod.block(i, q));
      for (int s = 0; s < ctx.log_s1(); ++s) acc = be.add(acc, be.lrot(acc, 1L << s));
      col.block(i, 0) = be.rrot(be.cmult(acc, first_col), static_cast<long>(j));
    }
    accumulate(be, x, col);
  }
  EncodedMatrix out = *x;
  out.rows = a.rows;
  out.cols = b.rows;
  out.tiling = Tiling::kNone;
  out.period = 0;
  out.tag = DataTag::kOther;
  return out;
}

EncodedMatrix row_major_atb(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                            double t) {
  const auto& ctx = be.context();
  require(a.tiling == Tiling::kNone && b.tiling == Tiling::kNone, "row_major_atb: inputs must be untiled");
  require(a.rows == b.rows && a.grid_rows == b.grid_rows, "row_major_atb: row counts differ");
  require(a.cols <= ctx.s1() && a.cols <= ctx.s0(), "row_major_atb: c must fit one block");

  std::optional<EncodedMatrix> x;
  for (std::size_t j = 0; j < a.cols; ++j) {
    EncodedMatrix col = lrot(be, cmult(be, a, column_mask(be, j, j + 1)), static_cast<long>(j));
    for (int s = 0; s < ctx.log_s1(); ++s) col = add(be, col, rrot(be, col, 1L << s));
    const EncodedMatrix sums = row_sums(be, mult(be, col, b));
    accumulate(be, x, cmult(be, sums, row_mask(be, j, j + 1, t)));
  }
  EncodedMatrix out = *x;
  out.rows = a.cols;
  out.cols = b.cols;
  out.tiling = Tiling::kNone;
  out.period = 0;
  out.tag = DataTag::kOther;
  return out;
}

const char* algorithm_name(MatmulAlgorithm alg) {
  switch (alg) {
    case MatmulAlgorithm::kDiagAbt: return "diag_abt";
    case MatmulAlgorithm::kDiagAtbRotateLeft: return "diag_atb_rl";
    case MatmulAlgorithm::kDiagAtbPartialRotate: return "diag_atb_pru";
    case MatmulAlgorithm::kColMajorAbt: return "col_major";
    case MatmulAlgorithm::kRowMajorAtb: return "row_major";
    case MatmulAlgorithm::kJinAbt: return "jin_abt";
    case MatmulAlgorithm::kJinAtb: return "jin_atb";
  }
  return "unknown";
}

std::vector<MatmulAlgorithm> all_algorithms() {
  return {MatmulAlgorithm::kDiagAbt,     MatmulAlgorithm::kDiagAtbRotateLeft,
          MatmulAlgorithm::kDiagAtbPartialRotate, MatmulAlgorithm::kColMajorAbt,
          MatmulAlgorithm::kRowMajorAtb, MatmulAlgorithm::kJinAbt,
          MatmulAlgorithm::kJinAtb};
}

std::optional<MatmulAlgorithm> parse_algorithm(const std::string& name) {
  for (auto alg : all_algorithms()) {
    if (name == algorithm_name(alg)) return alg;
  }
  if (name == "diag_atb") return MatmulAlgorithm::kDiagAtbRotateLeft;
  return std::nullopt;
}

bool is_executable(MatmulAlgorithm alg) {
  return alg != MatmulAlgorithm::kJinAbt && alg != MatmulAlgorithm::kJinAtb;
}

OpEstimate count_formula(MatmulAlgorithm alg, std::size_t a, std::size_t b, std::size_t c,
                         std::size_t s0, std::size_t s1) {
  if (a == 0 || b == 0 || c == 0 || !std::has_single_bit(s0) || !std::has_single_bit(s1)) {
    throw Error(Module::kMatmul, ErrorCode::kInvalidArgument, "count_formula: invalid dimensions");
  }
  const std::uint64_t m = ceil_div(a, s0);
  const std::uint64_t n = ceil_div(b, s1);
  const std::uint64_t ls0 = log2u(s0);
  const std::uint64_t ls1 = log2u(s1);
  const std::uint64_t cp = tile_period(c);  // the Diag algorithms loop over the padded c
  const std::uint64_t h = cp / 2;
  const std::uint64_t cc = c;
  OpEstimate e;
  switch (alg) {
    case MatmulAlgorithm::kDiagAbt:
      e.cmult = cp * m;
      e.mult = h * m * n;
      e.rot = h * (n + 2 * m * ls1);
      break;
    case MatmulAlgorithm::kDiagAtbRotateLeft:
      e.cmult = h * (m + n);
      e.mult = h * m * n;
      e.rot = cp * m + h * n * ls0;
      break;
    case MatmulAlgorithm::kDiagAtbPartialRotate:
      e.cmult = m + (h - 1) * m * n + h * n;
      e.mult = h * m * n;
      e.rot = 2 * m + (h - 1) * (m + m * n) + h * n * ls0;
      break;
    case MatmulAlgorithm::kColMajorAbt:
    case MatmulAlgorithm::kRowMajorAtb:
      e.cmult = cc * (n + m);
      e.mult = cc * m * n;
      e.rot = cc * (n * ls0 + m * (ls1 + 1)) - m;
      break;
    case MatmulAlgorithm::kJinAbt:
      e.mult = static_cast<std::uint64_t>(b) * cc;
      break;
    case MatmulAlgorithm::kJinAtb:
      e.mult = static_cast<std::uint64_t>(b) * cc;
      e.rot = static_cast<std::uint64_t>(b) * cc * (ls0 + ls1);
      break;
  }
  return e;
}

}  // namespace heml
