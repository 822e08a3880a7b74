// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "heml/audit.hpp"

namespace heml {

using Complex = std::complex<double>;
using SlotVector = std::vector<Complex>;

enum class OpKind : std::size_t {
  kAdd = 0,
  kCMult,
  kMult,
  kRot,
  kConj,
  kBootstrap,
  kMulImag,
};
inline constexpr std::size_t kNumOpKinds = 7;

const char* op_name(OpKind k);

// Per-operation latency weights in milliseconds.
struct OpWeights {
  double add = 0.085;
  double cmult = 0.9;
  double mult = 1.6;
  double rot = 1.2;
  double conj = 1.2;
  double bootstrap = 159.0;
  double mul_imag = 0.0;

  double weight(OpKind k) const;
};

// Plain snapshot of ledger counts; supports deltas.
struct OpCounts {
  std::array<std::uint64_t, kNumOpKinds> n{};

  std::uint64_t operator[](OpKind k) const { return n[static_cast<std::size_t>(k)]; }
  std::uint64_t& operator[](OpKind k) { return n[static_cast<std::size_t>(k)]; }
  OpCounts operator-(const OpCounts& o) const;
  OpCounts operator+(const OpCounts& o) const;
  OpCounts& operator+=(const OpCounts& o);
  bool operator==(const OpCounts& o) const = default;
};

double estimated_ms(const OpCounts& counts, const OpWeights& weights);

class OpLedger {
 public:
  OpLedger() = default;
  OpLedger(const OpLedger&) = delete;
  OpLedger& operator=(const OpLedger&) = delete;

  void record(OpKind k, std::uint64_t times = 1) {
    counts_[static_cast<std::size_t>(k)].fetch_add(times, std::memory_order_relaxed);
  }
  OpCounts snapshot() const;
  void reset();

 private:
  std::array<std::atomic<std::uint64_t>, kNumOpKinds> counts_{};
};

struct ContextParams {
  std::size_t s0 = 64;
  std::size_t s1 = 64;
  int max_level = 12;
  OpWeights weights{};
  // When set, operations bootstrap operands whose level is too low instead of
  // raising DepthExhausted.
  bool auto_bootstrap = false;
  // ensure_level() treats levels below this as too low even if the request is smaller.
  int bootstrap_threshold = 1;
  // Upper bound on blocks per encoded matrix.
  std::size_t max_blocks = 1u << 16;
};

// Read-only after construction.
class EmulatorContext {
 public:
  explicit EmulatorContext(const ContextParams& p);

  std::size_t slots() const { return s0_ * s1_; }
  std::size_t s0() const { return s0_; }
  std::size_t s1() const { return s1_; }
  int log_s0() const { return log_s0_; }
  int log_s1() const { return log_s1_; }
  int max_level() const { return params_.max_level; }
  const OpWeights& weights() const { return params_.weights; }
  bool auto_bootstrap() const { return params_.auto_bootstrap; }
  int bootstrap_threshold() const { return params_.bootstrap_threshold; }
  std::size_t max_blocks() const { return params_.max_blocks; }
  const ContextParams& params() const { return params_; }

 private:
  ContextParams params_;
  std::size_t s0_;
  std::size_t s1_;
  int log_s0_;
  int log_s1_;
};

inline constexpr int kPlainLevel = std::numeric_limits<int>::max();

// One emulated ciphertext (or plaintext block). Immutable; copies share slots.
class CipherBlock {
 public:
  CipherBlock() = default;

  const SlotVector& slots() const { return *slots_; }
  std::size_t size() const { return slots_ ? slots_->size() : 0; }
  int level() const { return level_; }
  bool is_plain() const { return level_ == kPlainLevel; }
  bool valid() const { return static_cast<bool>(slots_); }
  const EmulatorContext* context() const { return ctx_; }

 private:
  friend class Emulator;
  CipherBlock(std::shared_ptr<const SlotVector> slots, int level, const EmulatorContext* ctx)
      : slots_(std::move(slots)), level_(level), ctx_(ctx) {}

  std::shared_ptr<const SlotVector> slots_;
  int level_ = 0;
  const EmulatorContext* ctx_ = nullptr;
};

// Operation set of a leveled SIMD scheme. All ciphertext operations are
// ledgered; operations whose operands are all plaintext are not.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const EmulatorContext& context() const = 0;

  virtual CipherBlock encrypt(const SlotVector& v, int level) const = 0;
  CipherBlock encrypt(const SlotVector& v) const { return encrypt(v, context().max_level()); }
  virtual CipherBlock plain(const SlotVector& v) const = 0;
  virtual CipherBlock plain_constant(Complex value) const = 0;
  virtual SlotVector decrypt(const CipherBlock& x) const = 0;

  virtual CipherBlock add(const CipherBlock& x, const CipherBlock& y) const = 0;
  virtual CipherBlock sub(const CipherBlock& x, const CipherBlock& y) const = 0;
  virtual CipherBlock add_scalar(const CipherBlock& x, Complex c) const = 0;
  // Ciphertext-ciphertext products are Mult; products with a plaintext are CMult.
  virtual CipherBlock mult(const CipherBlock& x, const CipherBlock& y) const = 0;
  virtual CipherBlock cmult(const CipherBlock& x, const CipherBlock& mask) const = 0;
  virtual CipherBlock cmult(const CipherBlock& x, Complex c) const = 0;
  // Multiplication by the imaginary unit; consumes no level.
  virtual CipherBlock mul_imag(const CipherBlock& x) const = 0;
  virtual CipherBlock lrot(const CipherBlock& x, long r) const = 0;
  virtual CipherBlock rrot(const CipherBlock& x, long r) const = 0;
  virtual CipherBlock conj(const CipherBlock& x) const = 0;
  virtual CipherBlock bootstrap(const CipherBlock& x) const = 0;
  // Bootstraps x if auto-bootstrap is enabled and its level is below `needed`
  // (or the configured threshold); raises DepthExhausted otherwise.
  virtual CipherBlock ensure_level(const CipherBlock& x, int needed) const = 0;

  virtual const OpLedger& ledger() const = 0;
  virtual OpLedger& ledger() = 0;
  DecodeAudit& audit() const { return audit_; }

 private:
  mutable DecodeAudit audit_;
};

class Emulator final : public Backend {
 public:
  explicit Emulator(const ContextParams& p);
  explicit Emulator(std::shared_ptr<const EmulatorContext> ctx);

  const EmulatorContext& context() const override { return *ctx_; }
  std::shared_ptr<const EmulatorContext> shared_context() const { return ctx_; }

  using Backend::encrypt;
  CipherBlock encrypt(const SlotVector& v, int level) const override;
  CipherBlock plain(const SlotVector& v) const override;
  CipherBlock plain_constant(Complex value) const override;
  SlotVector decrypt(const CipherBlock& x) const override;

  CipherBlock add(const CipherBlock& x, const CipherBlock& y) const override;
  CipherBlock sub(const CipherBlock& x, const CipherBlock& y) const override;
  CipherBlock add_scalar(const CipherBlock& x, Complex c) const override;
  CipherBlock mult(const CipherBlock& x, const CipherBlock& y) const override;
  CipherBlock cmult(const CipherBlock& x, const CipherBlock& mask) const override;
  CipherBlock cmult(const CipherBlock& x, Complex c) const override;
  CipherBlock mul_imag(const CipherBlock& x) const override;
  CipherBlock lrot(const CipherBlock& x, long r) const override;
  CipherBlock rrot(const CipherBlock& x, long r) const override;
  CipherBlock conj(const CipherBlock& x) const override;
  CipherBlock bootstrap(const CipherBlock& x) const override;
  CipherBlock ensure_level(const CipherBlock& x, int needed) const override;

  const OpLedger& ledger() const override { return ledger_; }
  OpLedger& ledger() override { return ledger_; }

 private:
  void check(const CipherBlock& x) const;
  CipherBlock make(SlotVector v, int level) const;
  CipherBlock ready_for_mult(const CipherBlock& x) const;
  CipherBlock rotate_left(const CipherBlock& x, std::size_t r) const;

  std::shared_ptr<const EmulatorContext> ctx_;
  mutable OpLedger ledger_;
};

}  // namespace heml
