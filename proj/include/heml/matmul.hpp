// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heml/encoding.hpp"

namespace heml {

// t * A * B^T. A is a x b untiled, B is c x b vertically tiled with an even
// period c' <= s1. Result: a x c, horizontally tiled with period c'. Depth 3.
EncodedMatrix diag_abt(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                       double t = 1.0);

enum class AtbPath {
  kAuto,           // partial-rotate path when level(A) < level(B), rotate-left otherwise
  kRotateLeft,     // RL(A_cplx, k) * B
  kPartialRotate,  // lrot(A_cplx, k) * PRU(B, k); spends B's level instead of A's
};

// t * A^T * B. A is a x c horizontally tiled with an even period c', B is a x b
// untiled. Result: c x b, vertically tiled with period c'. Depth 3.
EncodedMatrix diag_atb(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                       double t = 1.0, AtbPath path = AtbPath::kAuto);
// The path kAuto resolves to for these operands.
AtbPath resolve_atb_path(const EncodedMatrix& a, const EncodedMatrix& b, AtbPath path);

// Row-by-row baseline for t * A * B^T; A a x b, B c x b (c <= s0), both untiled.
// Result a x c untiled (c <= s1).
EncodedMatrix col_major_abt(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                            double t = 1.0);
// Column-by-column baseline for t * A^T * B; A a x c (c <= s1), B a x b, both
// untiled. Result c x b untiled (c <= s0).
EncodedMatrix row_major_atb(const Backend& be, const EncodedMatrix& a, const EncodedMatrix& b,
                            double t = 1.0);

enum class MatmulAlgorithm {
  kDiagAbt,
  kDiagAtbRotateLeft,
  kDiagAtbPartialRotate,
  kColMajorAbt,
  kRowMajorAtb,
  kJinAbt,
  kJinAtb,
};

const char* algorithm_name(MatmulAlgorithm alg);
std::optional<MatmulAlgorithm> parse_algorithm(const std::string& name);
std::vector<MatmulAlgorithm> all_algorithms();
// Jin et al. packings are estimated only.
bool is_executable(MatmulAlgorithm alg);

struct OpEstimate {
  std::uint64_t cmult = 0;
  std::uint64_t mult = 0;
  std::uint64_t rot = 0;
  bool operator==(const OpEstimate&) const = default;
};

// Closed-form CMult/Mult/Rot counts. (a, b, c) are the logical dimensions:
// a x b times (c x b)^T for the AB^T family and (a x c)^T times a x b for A^TB.
OpEstimate count_formula(MatmulAlgorithm alg, std::size_t a, std::size_t b, std::size_t c,
                         std::size_t s0, std::size_t s1);

}  // namespace heml
