// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "heml/encoding.hpp"
#include "heml/error.hpp"
#include "test_util.hpp"

namespace heml {
namespace {

using testing::random_matrix;
using testing::small_context;
using MatC = Eigen::MatrixXcd;

// Per-block plaintext oracles over the padded grid.
MatC roll_rows_in_blocks(const MatC& m, std::size_t s0, long k) {
  MatC out(m.rows(), m.cols());
  const long h = static_cast<long>(s0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const long base = (r / h) * h;
    const long src = base + (((r - base) + k) % h + h) % h;
    out.row(r) = m.row(src);
  }
  return out;
}

MatC roll_cols_in_blocks(const MatC& m, std::size_t s1, long k) {
  return roll_rows_in_blocks(m.transpose(), s1, k).transpose();
}

MatC partial_roll(const MatC& m, std::size_t s0, std::size_t s1, long k) {
  MatC out = m;
  const MatC rolled = roll_rows_in_blocks(m, s0, 1);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (static_cast<long>(c % static_cast<Eigen::Index>(s1)) >= static_cast<long>(s1) - k) {
      out.col(c) = rolled.col(c);
    }
  }
  return out;
}

double max_abs(const MatC& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

struct GridShape {
  std::size_t s0, s1;
  Eigen::Index rows, cols;
};

// Single block, multi-block rows, multi-block columns, both.
const std::vector<GridShape> kShapes{{8, 8, 5, 7}, {4, 8, 11, 6}, {8, 4, 7, 13}, {4, 4, 9, 10}};

TEST(Encode, SmallMatrixSlotLayout) {
  Emulator emu(small_context(4, 4));
  Eigen::MatrixXd a(3, 3);
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  auto e = encode(emu, a);
  ASSERT_EQ(e.blocks.size(), 1u);
  const std::vector<double> want{1, 2, 3, 0, 4, 5, 6, 0, 7, 8, 9, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(e.block(0, 0).slots()[i], Complex(want[i], 0));
}

TEST(Encode, GridIsCeilOfUnitShape) {
  Emulator emu(small_context(8, 8));
  auto e = encode(emu, random_matrix(13, 21, 1));
  EXPECT_EQ(e.grid_rows, 2u);
  EXPECT_EQ(e.grid_cols, 3u);
  EXPECT_EQ(e.blocks.size(), 6u);
}

TEST(Encode, RoundTripAndZeroPadding) {
  for (const auto& s : kShapes) {
    Emulator emu(small_context(s.s0, s.s1));
    const auto a = random_matrix(s.rows, s.cols, 7);
    auto e = encode(emu, a);
    EXPECT_EQ(decode(emu, e, Role::kClient), a);
    const MatC padded = decode_padded(emu, e, Role::kClient);
    for (Eigen::Index i = 0; i < padded.rows(); ++i) {
      for (Eigen::Index j = 0; j < padded.cols(); ++j) {
        if (i >= s.rows || j >= s.cols) EXPECT_EQ(padded(i, j), Complex(0, 0));
      }
    }
  }
}

TEST(Encode, VerticalAndHorizontalTiling) {
  Emulator emu(small_context(8, 8));
  const auto a = random_matrix(3, 8, 2);
  EncodeOptions v;
  v.tiling = Tiling::kVertical;
  auto ev = encode(emu, a, v);
  EXPECT_EQ(ev.period, 4u);
  EXPECT_EQ(ev.grid_rows, 1u);
  const MatC pv = decode_padded(emu, ev, Role::kClient);
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      const double want = (i % 4) < 3 ? a(i % 4, j) : 0.0;
      EXPECT_EQ(pv(i, j), Complex(want, 0));
    }
  }
  EXPECT_EQ(decode(emu, ev, Role::kClient), a);

  const auto b = random_matrix(5, 2, 3);
  EncodeOptions h;
  h.tiling = Tiling::kHorizontal;
  auto eh = encode(emu, b, h);
  EXPECT_EQ(eh.period, 2u);
  const MatC ph = decode_padded(emu, eh, Role::kClient);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) EXPECT_EQ(ph(i, j), Complex(b(i, j % 2), 0));
  }
  EXPECT_EQ(decode(emu, eh, Role::kClient), b);
}

TEST(Encode, TilePeriod) {
  EXPECT_EQ(tile_period(1), 2u);
  EXPECT_EQ(tile_period(2), 2u);
  EXPECT_EQ(tile_period(3), 4u);
  EXPECT_EQ(tile_period(10), 16u);
}

TEST(Encode, Errors) {
  Emulator emu(small_context(4, 4));
  EXPECT_THROW(encode(emu, Eigen::MatrixXd(0, 0)), Error);
  EncodeOptions v;
  v.tiling = Tiling::kVertical;
  EXPECT_THROW(encode(emu, random_matrix(5, 4, 1), v), Error);  // period 8 > s0
  auto p = small_context(4, 4);
  p.max_blocks = 3;
  Emulator tiny(p);
  try {
    encode(tiny, random_matrix(9, 9, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGridLimit);
  }
  auto e = encode(emu, random_matrix(3, 3, 4));
  EXPECT_THROW(decode(emu, mul_imag(emu, e), Role::kClient), ResidualImaginary);
}

TEST(Encode, DecodeIsAudited) {
  Emulator emu(small_context(4, 4));
  EncodeOptions o;
  o.tag = DataTag::kWeights;
  auto e = encode(emu, random_matrix(2, 2, 1), o);
  decode(emu, e, Role::kClient);
  decode(emu, e, Role::kServer);
  EXPECT_EQ(emu.audit().count(Role::kClient, DataTag::kWeights), 1u);
  EXPECT_EQ(emu.audit().server_private_decodes(), 1u);
}

TEST(Structural, RotUpMatchesRowRoll) {
  Emulator emu(small_context(4, 8));
  const auto b = random_matrix(4, 8, 5);
  auto e = encode(emu, b);
  EXPECT_EQ(rot_up(emu, e, 1).block(0, 0).slots(), emu.lrot(e.block(0, 0), 8).slots());
  for (const auto& s : kShapes) {
    Emulator em(small_context(s.s0, s.s1));
    auto x = encode(em, random_matrix(s.rows, s.cols, 11));
    const MatC before = decode_padded(em, x, Role::kClient);
    for (long k : {0L, 1L, 3L}) {
      const int lvl = x.level();
      auto y = rot_up(em, x, k);
      EXPECT_LT(max_abs(decode_padded(em, y, Role::kClient) - roll_rows_in_blocks(before, s.s0, k)), 1e-12);
      EXPECT_EQ(y.level(), lvl);
    }
  }
}

TEST(Structural, RotUpByPeriodIsIdentityOnTiledMatrix) {
  Emulator emu(small_context(8, 8));
  EncodeOptions v;
  v.tiling = Tiling::kVertical;
  auto e = encode(emu, random_matrix(4, 8, 9), v);
  EXPECT_EQ(decode_padded(emu, rot_up(emu, e, 4), Role::kClient), decode_padded(emu, e, Role::kClient));
}

TEST(Structural, RotLeftMatchesColumnRoll) {
  Emulator emu(small_context(1, 4));
  Eigen::MatrixXd row(1, 4);
  row << 1, 2, 3, 4;
  auto r = rot_left(emu, encode(emu, row), 1);
  Eigen::MatrixXd want(1, 4);
  want << 2, 3, 4, 1;
  EXPECT_EQ(decode(emu, r, Role::kClient), want);

  Emulator id_emu(small_context(4, 4));
  auto id = encode(id_emu, Eigen::MatrixXd::Identity(4, 4));
  id_emu.ledger().reset();
  auto same = rot_left(id_emu, id, 0);
  EXPECT_EQ(same.level(), id.level());
  EXPECT_EQ(id_emu.ledger().snapshot(), OpCounts{});
  EXPECT_EQ(decode(id_emu, same, Role::kClient), Eigen::MatrixXd::Identity(4, 4));

  Emulator big(small_context(16, 16));
  auto x = encode(big, random_matrix(16, 16, 4));
  const MatC before = decode_padded(big, x, Role::kClient);
  for (long k = 1; k < 16; k += 5) {
    auto y = rot_left(big, x, k);
    EXPECT_LT(max_abs(decode_padded(big, y, Role::kClient) - roll_cols_in_blocks(before, 16, k)), 1e-12);
  }
  for (const auto& s : kShapes) {
    Emulator em(small_context(s.s0, s.s1));
    auto z = encode(em, random_matrix(s.rows, s.cols, 12));
    const MatC pz = decode_padded(em, z, Role::kClient);
    auto y = rot_left(em, z, 3);
    EXPECT_LT(max_abs(decode_padded(em, y, Role::kClient) - roll_cols_in_blocks(pz, s.s1, 3)), 1e-12);
  }
}

TEST(Structural, PartialRotUpMatchesOracle) {
  Emulator emu(small_context(4, 8));
  Eigen::MatrixXd b(4, 8);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) b(i, j) = 10 * i + j;
  }
  auto e = encode(emu, b);
  EXPECT_EQ(decode(emu, prot_up(emu, e, 0), Role::kClient), b);
  // Last three columns move up one row, the first five stay.
  Eigen::MatrixXd want = b;
  for (int i = 0; i < 4; ++i) {
    for (int j = 5; j < 8; ++j) want(i, j) = b((i + 1) % 4, j);
  }
  EXPECT_EQ(decode(emu, prot_up(emu, e, 3), Role::kClient), want);
  for (const auto& s : kShapes) {
    Emulator em(small_context(s.s0, s.s1));
    auto z = encode(em, random_matrix(s.rows, s.cols, 13));
    const MatC pz = decode_padded(em, z, Role::kClient);
    for (long k : {1L, 2L}) {
      auto y = prot_up(em, z, k);
      EXPECT_LT(max_abs(decode_padded(em, y, Role::kClient) - partial_roll(pz, s.s0, s.s1, k)), 1e-12);
    }
  }
}

TEST(Structural, ColumnAndRowSums) {
  Emulator emu(small_context(4, 4));
  auto ones = encode(emu, Eigen::MatrixXd::Ones(4, 4));
  EXPECT_EQ(decode(emu, col_sums(emu, ones), Role::kClient).leftCols(4), Eigen::MatrixXd::Constant(4, 4, 4.0));

  Eigen::MatrixXd single = Eigen::MatrixXd::Zero(4, 4);
  single.col(2) << 1, 2, 3, 4;
  const Eigen::MatrixXd cs = decode(emu, col_sums(emu, encode(emu, single)), Role::kClient);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(cs.col(j), single.col(2));

  for (const auto& s : kShapes) {
    Emulator em(small_context(s.s0, s.s1));
    auto z = encode(em, random_matrix(s.rows, s.cols, 21));
    const MatC pz = decode_padded(em, z, Role::kClient);
    const MatC c = decode_padded(em, col_sums(em, z), Role::kClient);
    ASSERT_EQ(c.rows(), pz.rows());
    ASSERT_EQ(c.cols(), static_cast<Eigen::Index>(s.s1));
    for (Eigen::Index i = 0; i < pz.rows(); ++i) {
      const Complex sum = pz.row(i).sum();
      for (Eigen::Index j = 0; j < c.cols(); ++j) EXPECT_NEAR(std::abs(c(i, j) - sum), 0.0, 1e-12);
    }
    const MatC r = decode_padded(em, row_sums(em, z), Role::kClient);
    ASSERT_EQ(r.rows(), static_cast<Eigen::Index>(s.s0));
    ASSERT_EQ(r.cols(), pz.cols());
    for (Eigen::Index j = 0; j < pz.cols(); ++j) {
      const Complex sum = pz.col(j).sum();
      for (Eigen::Index i = 0; i < r.rows(); ++i) EXPECT_NEAR(std::abs(r(i, j) - sum), 0.0, 1e-12);
    }
  }
}

TEST(Structural, DepthAndLedgerContracts) {
  Emulator emu(small_context(8, 16));
  auto x = encode(emu, random_matrix(8, 16, 3));
  const int lvl = x.level();
  auto check = [&](auto&& fn, std::uint64_t cmult, std::uint64_t rot, int depth) {
    const OpCounts before = emu.ledger().snapshot();
    const EncodedMatrix y = fn();
    const OpCounts d = emu.ledger().snapshot() - before;
    EXPECT_EQ(d[OpKind::kCMult], cmult);
    EXPECT_EQ(d[OpKind::kRot], rot);
    EXPECT_EQ(d[OpKind::kMult], 0u);
    EXPECT_EQ(y.level(), lvl - depth);
  };
  check([&] { return rot_up(emu, x, 3); }, 0, 1, 0);
  check([&] { return rot_left(emu, x, 3); }, 1, 2, 1);
  check([&] { return prot_up(emu, x, 3); }, 1, 1, 1);
  check([&] { return col_sums(emu, x); }, 1, 2 * 4, 1);
  check([&] { return row_sums(emu, x); }, 0, 3, 0);
}

TEST(Structural, ComplexifyRowsSwapsPairs) {
  Emulator emu(small_context(4, 4));
  EncodeOptions v;
  v.tiling = Tiling::kVertical;
  const auto b = random_matrix(2, 4, 8);
  auto e = encode(emu, b, v);
  const int lvl = e.level();
  auto c = complexify_rows(emu, e, 2);
  EXPECT_EQ(c.level(), lvl);
  const MatC p = decode_padded(emu, c, Role::kClient);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_EQ(p(i, j).real(), b(i % 2, j));
      EXPECT_EQ(p(i, j).imag(), b((i + 1) % 2, j));
    }
  }
  auto cc = complexify_cols(emu, encode(emu, b.transpose(), EncodeOptions{Tiling::kHorizontal}), 2);
  EXPECT_EQ(cc.level(), lvl - 1);
  EXPECT_THROW(complexify_rows(emu, e, 3), Error);
}

TEST(Masks, DiagonalPatterns) {
  Emulator emu(small_context(4, 4));
  const auto m0 = make_mask(emu, 0, 4, false);
  const auto m1 = make_mask(emu, 1, 4, false);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(m0.slots()[i * 4 + j], Complex(i == j ? 1.0 : 0.0, 0));
      EXPECT_EQ(m1.slots()[i * 4 + j], Complex(j == (i + 1) % 4 ? 1.0 : 0.0, 0));
    }
  }
  EXPECT_TRUE(m0.is_plain());
  Emulator big(small_context(8, 16));
  for (long k : {0L, 1L, 3L, -2L}) {
    for (std::size_t d : {2u, 4u, 8u}) {
      const auto plain = make_mask(big, k, d, false, 0.25);
      const auto cplx = make_mask(big, k, d, true, 0.25);
      const auto sum = big.add(cplx, big.conj(cplx));
      for (std::size_t i = 0; i < 128; ++i) EXPECT_NEAR(std::abs(sum.slots()[i] - plain.slots()[i]), 0.0, 1e-15);
    }
  }
}

}  // namespace
}  // namespace heml
