// SPDX-License-Identifier: Apache-2.0
#include "heml/encoding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "heml/error.hpp"

namespace heml {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

long mod(long a, long m) { return ((a % m) + m) % m; }

[[noreturn]] void grid_error(const std::string& what) {
  throw Error(Module::kEncoding, ErrorCode::kGridLimit, what);
}

}  // namespace

std::size_t tile_period(std::size_t n) { return std::bit_ceil(std::max<std::size_t>(n, 2)); }

int EncodedMatrix::level() const {
  int lv = kPlainLevel;
  for (const auto& b : blocks) lv = std::min(lv, b.level());
  return lv;
}

bool EncodedMatrix::is_plain() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const CipherBlock& b) { return b.is_plain(); });
}

EncodedMatrix EncodedMatrix::like() const {
  EncodedMatrix e = *this;
  e.blocks.assign(blocks.size(), CipherBlock{});
  return e;
}

EncodedMatrix encode(const Backend& be, const Eigen::MatrixXd& a, const EncodeOptions& opt) {
  const auto& ctx = be.context();
  const std::size_t s0 = ctx.s0();
  const std::size_t s1 = ctx.s1();
  const auto rows = static_cast<std::size_t>(a.rows());
  const auto cols = static_cast<std::size_t>(a.cols());
  if (rows == 0 || cols == 0) {
    throw Error(Module::kEncoding, ErrorCode::kInvalidArgument, "cannot encode an empty matrix");
  }

  EncodedMatrix e;
  e.rows = rows;
  e.cols = cols;
  e.tiling = opt.tiling;
  e.tag = opt.tag;

  std::size_t period = 0;
  if (opt.tiling != Tiling::kNone) {
    const std::size_t dim = opt.tiling == Tiling::kVertical ? rows : cols;
    const std::size_t unit = opt.tiling == Tiling::kVertical ? s0 : s1;
    period = opt.period == 0 ? tile_period(dim) : opt.period;
    if (!std::has_single_bit(period) || period < dim) {
      throw Error(Module::kEncoding, ErrorCode::kInvalidArgument,
                  "tile period must be a power of two covering the tiled dimension");
    }
    if (period > unit) {
      grid_error("tile period " + std::to_string(period) + " exceeds block dimension " +
                 std::to_string(unit));
    }
  }
  e.period = period;

  switch (opt.tiling) {
    case Tiling::kNone:
      e.grid_rows = ceil_div(rows, s0);
      e.grid_cols = ceil_div(cols, s1);
      break;
    case Tiling::kVertical:
      e.grid_rows = 1;
      e.grid_cols = ceil_div(cols, s1);
      break;
    case Tiling::kHorizontal:
      e.grid_rows = ceil_div(rows, s0);
      e.grid_cols = 1;
      break;
  }
  if (e.grid_rows * e.grid_cols > ctx.max_blocks()) {
    grid_error(std::to_string(e.grid_rows) + "x" + std::to_string(e.grid_cols) +
               " grid exceeds max_blocks=" + std::to_string(ctx.max_blocks()));
  }

  const int level = opt.level < 0 ? ctx.max_level() : opt.level;
  e.blocks.reserve(e.grid_rows * e.grid_cols);
  for (std::size_t bi = 0; bi < e.grid_rows; ++bi) {
    for (std::size_t bj = 0; bj < e.grid_cols; ++bj) {
      SlotVector v(ctx.slots(), Complex(0.0, 0.0));
      for (std::size_t i = 0; i < s0; ++i) {
        for (std::size_t j = 0; j < s1; ++j) {
          std::size_t r = bi * s0 + i;
          std::size_t c = bj * s1 + j;
          if (opt.tiling == Tiling::kVertical) r = i % period;
          if (opt.tiling == Tiling::kHorizontal) c = j % period;
          if (r < rows && c < cols) v[i * s1 + j] = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
      }
      e.blocks.push_back(opt.encrypt ? be.encrypt(v, level) : be.plain(v));
    }
  }
  return e;
}

Eigen::MatrixXcd decode_padded(const Backend& be, const EncodedMatrix& e, Role role) {
  const auto& ctx = be.context();
  const std::size_t s0 = ctx.s0();
  const std::size_t s1 = ctx.s1();
  be.audit().record(role, e.tag);
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(e.grid_rows * s0),
                       static_cast<Eigen::Index>(e.grid_cols * s1));
  for (std::size_t bi = 0; bi < e.grid_rows; ++bi) {
    for (std::size_t bj = 0; bj < e.grid_cols; ++bj) {
      const SlotVector v = be.decrypt(e.block(bi, bj));
      for (std::size_t i = 0; i < s0; ++i) {
        for (std::size_t j = 0; j < s1; ++j) {
          out(static_cast<Eigen::Index>(bi * s0 + i), static_cast<Eigen::Index>(bj * s1 + j)) =
              v[i * s1 + j];
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd decode(const Backend& be, const EncodedMatrix& e, Role role) {
  const auto& ctx = be.context();
  const std::size_t s0 = ctx.s0();
  const std::size_t s1 = ctx.s1();
  be.audit().record(role, e.tag);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
  std::vector<SlotVector> plain(e.blocks.size());
  for (std::size_t b = 0; b < e.blocks.size(); ++b) plain[b] = be.decrypt(e.blocks[b]);
  for (std::size_t r = 0; r < e.rows; ++r) {
    for (std::size_t c = 0; c < e.cols; ++c) {
      std::size_t bi = r / s0, i = r % s0, bj = c / s1, j = c % s1;
      if (e.tiling == Tiling::kVertical) {
        bi = 0;
        i = r;
      } else if (e.tiling == Tiling::kHorizontal) {
        bj = 0;
        j = c;
      }
      const Complex z = plain[bi * e.grid_cols + bj][i * s1 + j];
      if (std::abs(z.imag()) >= 1e-9) {
        throw ResidualImaginary("entry (" + std::to_string(r) + "," + std::to_string(c) +
                                ") has imaginary part " + std::to_string(z.imag()));
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = z.real();
    }
  }
  return out;
}

// ---- blockwise arithmetic --------------------------------------------------

namespace {

template <typename Fn>
EncodedMatrix zip(const EncodedMatrix& x, const EncodedMatrix& y, Fn fn) {
  auto fits = [](std::size_t a, std::size_t b) { return a == b || a == 1 || b == 1; };
  if (!fits(x.grid_rows, y.grid_rows) || !fits(x.grid_cols, y.grid_cols)) {
    throw ShapeMismatch(Module::kEncoding,
                        "grids " + std::to_string(x.grid_rows) + "x" + std::to_string(x.grid_cols) +
                            " and " + std::to_string(y.grid_rows) + "x" +
                            std::to_string(y.grid_cols) + " do not broadcast");
  }
  const bool x_major = x.grid_rows * x.grid_cols >= y.grid_rows * y.grid_cols;
  EncodedMatrix out = (x_major ? x : y).like();
  out.grid_rows = std::max(x.grid_rows, y.grid_rows);
  out.grid_cols = std::max(x.grid_cols, y.grid_cols);
  out.blocks.assign(out.grid_rows * out.grid_cols, CipherBlock{});
  out.tag = x.tag;
  for (std::size_t i = 0; i < out.grid_rows; ++i) {
    for (std::size_t j = 0; j < out.grid_cols; ++j) {
      const auto& a = x.block(x.grid_rows == 1 ? 0 : i, x.grid_cols == 1 ? 0 : j);
      const auto& b = y.block(y.grid_rows == 1 ? 0 : i, y.grid_cols == 1 ? 0 : j);
      out.block(i, j) = fn(a, b);
    }
  }
  return out;
}

}  // namespace

EncodedMatrix map_blocks(const EncodedMatrix& x,
                         const std::function<CipherBlock(const CipherBlock&)>& fn) {
  EncodedMatrix out = x.like();
  for (std::size_t b = 0; b < x.blocks.size(); ++b) out.blocks[b] = fn(x.blocks[b]);
  return out;
}

EncodedMatrix add(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y) {
  return zip(x, y, [&](const CipherBlock& a, const CipherBlock& b) { return be.add(a, b); });
}

EncodedMatrix sub(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y) {
  return zip(x, y, [&](const CipherBlock& a, const CipherBlock& b) { return be.sub(a, b); });
}

EncodedMatrix mult(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y) {
  return zip(x, y, [&](const CipherBlock& a, const CipherBlock& b) { return be.mult(a, b); });
}

EncodedMatrix cmult(const Backend& be, const EncodedMatrix& x, const CipherBlock& mask) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.cmult(a, mask); });
}

EncodedMatrix cmult(const Backend& be, const EncodedMatrix& x, Complex c) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.cmult(a, c); });
}

EncodedMatrix add_scalar(const Backend& be, const EncodedMatrix& x, Complex c) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.add_scalar(a, c); });
}

EncodedMatrix add_plain(const Backend& be, const EncodedMatrix& x, const CipherBlock& p) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.add(a, p); });
}

EncodedMatrix mul_imag(const Backend& be, const EncodedMatrix& x) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.mul_imag(a); });
}

EncodedMatrix conj(const Backend& be, const EncodedMatrix& x) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.conj(a); });
}

EncodedMatrix lrot(const Backend& be, const EncodedMatrix& x, long r) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.lrot(a, r); });
}

EncodedMatrix rrot(const Backend& be, const EncodedMatrix& x, long r) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.rrot(a, r); });
}

EncodedMatrix bootstrap(const Backend& be, const EncodedMatrix& x) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.bootstrap(a); });
}

EncodedMatrix ensure_level(const Backend& be, const EncodedMatrix& x, int needed) {
  return map_blocks(x, [&](const CipherBlock& a) { return be.ensure_level(a, needed); });
}

// ---- masks -------------------------------------------------------------------

CipherBlock make_mask(const Backend& be, long k, std::size_t d, bool complexified, double t) {
  const auto& ctx = be.context();
  const std::size_t s0 = ctx.s0();
  const std::size_t s1 = ctx.s1();
  if (d == 0 || (complexified && d % 2 != 0)) {
    throw Error(Module::kEncoding, ErrorCode::kInvalidArgument, "mask modulus must be positive (even when complexified)");
  }
  const long dl = static_cast<long>(d);
  const long half = dl / 2;
  SlotVector v(ctx.slots(), Complex(0.0, 0.0));
  for (std::size_t i = 0; i < s0; ++i) {
    for (std::size_t j = 0; j < s1; ++j) {
      const long diff = static_cast<long>(j) - static_cast<long>(i) - k;
      Complex z(0.0, 0.0);
      if (!complexified) {
        if (mod(diff, dl) == 0) z = t;
      } else {
        if (mod(diff, dl) == 0) z += Complex(0.5 * t, 0.0);
        if (mod(diff - half, dl) == 0) z += Complex(0.0, -0.5 * t);
      }
      v[i * s1 + j] = z;
    }
  }
  return be.plain(v);
}

CipherBlock column_mask(const Backend& be, std::size_t begin, std::size_t end, Complex value) {
  const auto& ctx = be.context();
  SlotVector v(ctx.slots(), Complex(0.0, 0.0));
  for (std::size_t i = 0; i < ctx.s0(); ++i) {
    for (std::size_t j = begin; j < std::min(end, ctx.s1()); ++j) v[i * ctx.s1() + j] = value;
  }
  return be.plain(v);
}

CipherBlock row_mask(const Backend& be, std::size_t begin, std::size_t end, Complex value) {
  const auto& ctx = be.context();
  SlotVector v(ctx.slots(), Complex(0.0, 0.0));
  for (std::size_t i = begin; i < std::min(end, ctx.s0()); ++i) {
    for (std::size_t j = 0; j < ctx.s1(); ++j) v[i * ctx.s1() + j] = value;
  }
  return be.plain(v);
}

// ---- structural primitives -------------------------------------------------

EncodedMatrix rot_up(const Backend& be, const EncodedMatrix& b, long k) {
  const auto& ctx = be.context();
  const long kk = mod(k, static_cast<long>(ctx.s0()));
  if (kk == 0) return b;
  return lrot(be, b, kk * static_cast<long>(ctx.s1()));
}

EncodedMatrix rot_left(const Backend& be, const EncodedMatrix& a, long k) {
  const auto& ctx = be.context();
  const long s1 = static_cast<long>(ctx.s1());
  const long kk = mod(k, s1);
  if (kk == 0) return a;
  const CipherBlock keep = column_mask(be, 0, static_cast<std::size_t>(s1 - kk));
  return map_blocks(a, [&](const CipherBlock& blk) {
    const CipherBlock shifted = be.lrot(blk, kk);
    const CipherBlock head = be.cmult(shifted, keep);
    // The wrapped tail landed one row too high; move it back down.
    return be.add(head, be.rrot(be.sub(shifted, head), s1));
  });
}

EncodedMatrix prot_up(const Backend& be, const EncodedMatrix& b, long k) {
  const auto& ctx = be.context();
  const long s1 = static_cast<long>(ctx.s1());
  if (k < 0 || k > s1) {
    throw Error(Module::kEncoding, ErrorCode::kInvalidArgument, "prot_up shift out of range");
  }
  if (k == 0) return b;
  const CipherBlock keep = column_mask(be, 0, static_cast<std::size_t>(s1 - k));
  return map_blocks(b, [&](const CipherBlock& blk) {
    const CipherBlock head = be.cmult(blk, keep);
    return be.add(head, be.lrot(be.sub(blk, head), s1));
  });
}

EncodedMatrix col_sums(const Backend& be, const EncodedMatrix& x) {
  const auto& ctx = be.context();
  const CipherBlock first_col = column_mask(be, 0, 1);
  EncodedMatrix out = x.like();
  out.grid_cols = 1;
  out.cols = ctx.s1();
  out.tiling = Tiling::kNone;
  out.period = 0;
  out.blocks.assign(x.grid_rows, CipherBlock{});
  for (std::size_t i = 0; i < x.grid_rows; ++i) {
    CipherBlock acc = x.block(i, 0);
    for (std::size_t j = 1; j < x.grid_cols; ++j) acc = be.add(acc, x.block(i, j));
    for (int t = 0; t < ctx.log_s1(); ++t) acc = be.add(acc, be.lrot(acc, 1L << t));
    acc = be.cmult(acc, first_col);
    for (int t = 0; t < ctx.log_s1(); ++t) acc = be.add(acc, be.rrot(acc, 1L << t));
    out.block(i, 0) = acc;
  }
  return out;
}

EncodedMatrix row_sums(const Backend& be, const EncodedMatrix& x) {
  const auto& ctx = be.context();
  const long s1 = static_cast<long>(ctx.s1());
  EncodedMatrix out = x.like();
  out.grid_rows = 1;
  out.rows = ctx.s0();
  out.tiling = Tiling::kNone;
  out.period = 0;
  out.blocks.assign(x.grid_cols, CipherBlock{});
  for (std::size_t j = 0; j < x.grid_cols; ++j) {
    CipherBlock acc = x.block(0, j);
    for (std::size_t i = 1; i < x.grid_rows; ++i) acc = be.add(acc, x.block(i, j));
    for (int t = 0; t < ctx.log_s0(); ++t) acc = be.add(acc, be.lrot(acc, (1L << t) * s1));
    out.block(0, j) = acc;
  }
  return out;
}

EncodedMatrix complexify_rows(const Backend& be, const EncodedMatrix& b, std::size_t c) {
  if (c < 2 || c % 2 != 0) {
    throw Error(Module::kEncoding, ErrorCode::kInvalidArgument, "complexify needs an even c >= 2");
  }
  return add(be, b, mul_imag(be, rot_up(be, b, static_cast<long>(c / 2))));
}

EncodedMatrix complexify_cols(const Backend& be, const EncodedMatrix& a, std::size_t c) {
  if (c < 2 || c % 2 != 0) {
    throw Error(Module::kEncoding, ErrorCode::kInvalidArgument, "complexify needs an even c >= 2");
  }
  return add(be, a, mul_imag(be, rot_left(be, a, static_cast<long>(c / 2))));
}

}  // namespace heml
