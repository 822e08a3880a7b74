// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heml/approx.hpp"
#include "heml/matmul.hpp"

namespace heml {

struct MatmulShape {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;
};

struct MatmulCaseResult {
  MatmulShape shape;
  MatmulAlgorithm algorithm = MatmulAlgorithm::kDiagAbt;
  std::size_t s0 = 0;
  std::size_t s1 = 0;
  OpEstimate formula;
  std::optional<OpEstimate> executed;  // ledger delta; absent for estimate-only packings
  OpCounts ledger;                     // full executed delta
  double estimated_ms = 0.0;
  double oracle_error = 0.0;  // relative Frobenius error; NaN when not executed
  int levels_consumed = 0;
};

// s0 == 0 picks s0 = min(next_pow2(a), slots / 2).
MatmulCaseResult run_matmul_case(const MatmulShape& shape, MatmulAlgorithm alg, std::size_t slots,
                                 std::size_t s0, std::uint64_t seed, const OpWeights& weights = {});

// One cell of the softmax error table.
struct SoftmaxCell {
  std::size_t classes = 0;
  double range = 0.0;
  std::string variant;  // "norm", "extn", "prec"
  std::uint64_t samples = 0;
  double max_error = 0.0;  // max over samples of the infinity-norm error
  double avg_error = 0.0;  // mean over samples of the infinity-norm error
  double max_amax_gap = 0.0;    // max(x) - approx_max(x)
  double min_amax_gap = 0.0;    // negative if the approximate max ever overshoots
  double max_stage_error = 0.0;  // exp/inverse stage error on its actual inputs
};

struct SoftmaxBenchOptions {
  std::vector<std::size_t> classes{3, 5, 7, 10};
  std::uint64_t samples = 1000000;  // per range
  double max_range = 128.0;
  std::uint64_t seed = 2024;
  SoftmaxConfig base{};
};

// Nested ranges: {4, 8, 32, 128} up to max_range (plus max_range itself).
std::vector<double> softmax_ranges(double max_range);
// Variant configs derived from base.
SoftmaxConfig softmax_variant(const SoftmaxConfig& base, const std::string& variant);
// Samples accumulate across nested ranges: the cell for range R covers every
// sample drawn for ranges <= R. The norm-only variant is reported only where
// its coverage radius reaches R.
std::vector<SoftmaxCell> bench_softmax(const SoftmaxBenchOptions& opt);

}  // namespace heml
