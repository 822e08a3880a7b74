// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <vector>

#include "heml/audit.hpp"
#include "heml/emulator.hpp"

namespace heml {

// vertical: the rows of a small matrix repeat down a single block row.
// horizontal: the columns repeat across a single block column.
enum class Tiling : std::uint8_t { kNone = 0, kVertical = 1, kHorizontal = 2 };

// Smallest power of two >= max(n, 2): the tile period for n rows/cols.
std::size_t tile_period(std::size_t n);

struct EncodedMatrix {
  std::size_t rows = 0;  // logical shape
  std::size_t cols = 0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  Tiling tiling = Tiling::kNone;
  std::size_t period = 0;  // tile period along the tiled axis; 0 when untiled
  DataTag tag = DataTag::kOther;
  std::vector<CipherBlock> blocks;  // row-major grid

  const CipherBlock& block(std::size_t i, std::size_t j) const { return blocks[i * grid_cols + j]; }
  CipherBlock& block(std::size_t i, std::size_t j) { return blocks[i * grid_cols + j]; }
  // Minimum level over all blocks.
  int level() const;
  bool is_plain() const;
  // Same grid and tiling metadata, no blocks.
  EncodedMatrix like() const;
};

struct EncodeOptions {
  Tiling tiling = Tiling::kNone;
  std::size_t period = 0;  // 0 picks tile_period() of the tiled dimension
  bool encrypt = true;
  int level = -1;  // -1 means max_level
  DataTag tag = DataTag::kOther;
};

EncodedMatrix encode(const Backend& be, const Eigen::MatrixXd& a, const EncodeOptions& opt = {});

// Strips padding and tiling. Every decode is recorded in the backend's audit
// under (role, E.tag). Throws ResidualImaginary if any logical entry has
// |imag| >= 1e-9.
Eigen::MatrixXd decode(const Backend& be, const EncodedMatrix& e, Role role);
// Full padded slot contents as a complex matrix (grid_rows*s0 x grid_cols*s1).
Eigen::MatrixXcd decode_padded(const Backend& be, const EncodedMatrix& e, Role role);

// ---- blockwise arithmetic --------------------------------------------------
// Binary ops accept a 1-wide grid on either side, broadcast along that axis.

EncodedMatrix add(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y);
EncodedMatrix sub(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y);
EncodedMatrix mult(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y);
EncodedMatrix cmult(const Backend& be, const EncodedMatrix& x, const CipherBlock& mask);
EncodedMatrix cmult(const Backend& be, const EncodedMatrix& x, Complex c);
EncodedMatrix add_scalar(const Backend& be, const EncodedMatrix& x, Complex c);
EncodedMatrix add_plain(const Backend& be, const EncodedMatrix& x, const CipherBlock& p);
EncodedMatrix mul_imag(const Backend& be, const EncodedMatrix& x);
EncodedMatrix conj(const Backend& be, const EncodedMatrix& x);
EncodedMatrix lrot(const Backend& be, const EncodedMatrix& x, long r);
EncodedMatrix rrot(const Backend& be, const EncodedMatrix& x, long r);
EncodedMatrix bootstrap(const Backend& be, const EncodedMatrix& x);
EncodedMatrix ensure_level(const Backend& be, const EncodedMatrix& x, int needed);
EncodedMatrix map_blocks(const EncodedMatrix& x,
                         const std::function<CipherBlock(const CipherBlock&)>& fn);

// ---- masks -------------------------------------------------------------------

// Plaintext block with value t where (j - i - k) mod d == 0, i, j the in-block
// row/col. With `complexified`, returns t*(M^(k)/2 - (i/2) M^(k+d/2)).
CipherBlock make_mask(const Backend& be, long k, std::size_t d, bool complexified, double t = 1.0);
// Plaintext block with `value` in columns [begin, end) of every row, 0 elsewhere.
CipherBlock column_mask(const Backend& be, std::size_t begin, std::size_t end, Complex value = 1.0);
// Plaintext block with `value` in rows [begin, end), 0 elsewhere.
CipherBlock row_mask(const Backend& be, std::size_t begin, std::size_t end, Complex value = 1.0);

// ---- structural primitives -------------------------------------------------

// Rows rotated up by k inside each block (lrot by k*s1). Depth-free.
EncodedMatrix rot_up(const Backend& be, const EncodedMatrix& b, long k);
// Columns rotated left by k inside each block. One level, 1 CMult + 2 Rot per block.
EncodedMatrix rot_left(const Backend& be, const EncodedMatrix& a, long k);
// Last k columns of each block rotated up by one row. One level, 1 CMult + 1 Rot per block.
EncodedMatrix prot_up(const Backend& be, const EncodedMatrix& b, long k);
// Sums block columns, then every column of the single result block column holds
// its row total. One level; 2 log s1 Rot + 1 CMult per block row.
EncodedMatrix col_sums(const Backend& be, const EncodedMatrix& x);
// Sums block rows, then every row of the single result block row holds its
// column total. Depth-free; log s0 Rot per block column.
EncodedMatrix row_sums(const Backend& be, const EncodedMatrix& x);
// B + i*RU(B, c/2). Depth-free.
EncodedMatrix complexify_rows(const Backend& be, const EncodedMatrix& b, std::size_t c);
// A + i*RL(A, c/2). One level.
EncodedMatrix complexify_cols(const Backend& be, const EncodedMatrix& a, std::size_t c);

}  // namespace heml
