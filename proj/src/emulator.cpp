// SPDX-License-Identifier: Apache-2.0
#include "heml/emulator.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "heml/error.hpp"

namespace heml {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kAdd: return "add";
    case OpKind::kCMult: return "cmult";
    case OpKind::kMult: return "mult";
    case OpKind::kRot: return "rot";
    case OpKind::kConj: return "conj";
    case OpKind::kBootstrap: return "bootstrap";
    case OpKind::kMulImag: return "mul_imag";
  }
  return "unknown";
}

double OpWeights::weight(OpKind k) const {
  switch (k) {
    case OpKind::kAdd: return add;
    case OpKind::kCMult: return cmult;
    case OpKind::kMult: return mult;
    case OpKind::kRot: return rot;
    case OpKind::kConj: return conj;
    case OpKind::kBootstrap: return bootstrap;
    case OpKind::kMulImag: return mul_imag;
  }
  return 0.0;
}

OpCounts OpCounts::operator-(const OpCounts& o) const {
  OpCounts r;
  for (std::size_t i = 0; i < kNumOpKinds; ++i) r.n[i] = n[i] - o.n[i];
  return r;
}

OpCounts OpCounts::operator+(const OpCounts& o) const {
  OpCounts r = *this;
  r += o;
  return r;
}

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  for (std::size_t i = 0; i < kNumOpKinds; ++i) n[i] += o.n[i];
  return *this;
}

double estimated_ms(const OpCounts& counts, const OpWeights& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumOpKinds; ++i) {
    total += static_cast<double>(counts.n[i]) * weights.weight(static_cast<OpKind>(i));
  }
  return total;
}

OpCounts OpLedger::snapshot() const {
  OpCounts c;
  for (std::size_t i = 0; i < kNumOpKinds; ++i) c.n[i] = counts_[i].load(std::memory_order_relaxed);
  return c;
}

void OpLedger::reset() {
  for (auto& c : counts_) c.store(0, std::memory_order_relaxed);
}

EmulatorContext::EmulatorContext(const ContextParams& p) : params_(p), s0_(p.s0), s1_(p.s1) {
  if (s0_ == 0 || s1_ == 0 || !std::has_single_bit(s0_) || !std::has_single_bit(s1_)) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument,
                "s0 and s1 must be powers of two, got " + std::to_string(s0_) + "x" +
                    std::to_string(s1_));
  }
  if (p.max_level < 1) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument, "max_level must be >= 1");
  }
  if (p.bootstrap_threshold < 0 || p.bootstrap_threshold > p.max_level) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument,
                "bootstrap_threshold must lie in [0, max_level]");
  }
  log_s0_ = std::countr_zero(s0_);
  log_s1_ = std::countr_zero(s1_);
}

Emulator::Emulator(const ContextParams& p) : ctx_(std::make_shared<const EmulatorContext>(p)) {}

Emulator::Emulator(std::shared_ptr<const EmulatorContext> ctx) : ctx_(std::move(ctx)) {}

void Emulator::check(const CipherBlock& x) const {
  if (!x.valid() || x.ctx_ != ctx_.get()) {
    throw Error(Module::kEmulator, ErrorCode::kContextMismatch,
                "operand does not belong to this emulator context");
  }
}

CipherBlock Emulator::make(SlotVector v, int level) const {
  return CipherBlock(std::make_shared<const SlotVector>(std::move(v)), level, ctx_.get());
}

CipherBlock Emulator::encrypt(const SlotVector& v, int level) const {
  if (v.size() != ctx_->slots()) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument,
                "slot vector length " + std::to_string(v.size()) + " != " +
                    std::to_string(ctx_->slots()));
  }
  if (level < 0 || level > ctx_->max_level()) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument, "level out of range");
  }
  return make(v, level);
}

CipherBlock Emulator::plain(const SlotVector& v) const {
  if (v.size() != ctx_->slots()) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument, "plaintext slot vector length");
  }
  return make(v, kPlainLevel);
}

CipherBlock Emulator::plain_constant(Complex value) const {
  return make(SlotVector(ctx_->slots(), value), kPlainLevel);
}

SlotVector Emulator::decrypt(const CipherBlock& x) const {
  check(x);
  return x.slots();
}

CipherBlock Emulator::add(const CipherBlock& x, const CipherBlock& y) const {
  check(x);
  check(y);
  const auto& a = x.slots();
  const auto& b = y.slots();
  SlotVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (!(x.is_plain() && y.is_plain())) ledger_.record(OpKind::kAdd);
  return make(std::move(out), std::min(x.level(), y.level()));
}

CipherBlock Emulator::sub(const CipherBlock& x, const CipherBlock& y) const {
  check(x);
  check(y);
  const auto& a = x.slots();
  const auto& b = y.slots();
  SlotVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  if (!(x.is_plain() && y.is_plain())) ledger_.record(OpKind::kAdd);
  return make(std::move(out), std::min(x.level(), y.level()));
}

CipherBlock Emulator::add_scalar(const CipherBlock& x, Complex c) const {
  check(x);
  SlotVector out(x.slots());
  for (auto& v : out) v += c;
  if (!x.is_plain()) ledger_.record(OpKind::kAdd);
  return make(std::move(out), x.level());
}

CipherBlock Emulator::ready_for_mult(const CipherBlock& x) const {
  if (x.is_plain() || x.level() >= 1) return x;
  if (ctx_->auto_bootstrap()) return bootstrap(x);
  throw DepthExhausted(Module::kEmulator, "multiplication operand at level 0");
}

CipherBlock Emulator::mult(const CipherBlock& x0, const CipherBlock& y0) const {
  check(x0);
  check(y0);
  if (x0.is_plain() != y0.is_plain()) {
    return x0.is_plain() ? cmult(y0, x0) : cmult(x0, y0);
  }
  const CipherBlock x = ready_for_mult(x0);
  const CipherBlock y = ready_for_mult(y0);
  const auto& a = x.slots();
  const auto& b = y.slots();
  SlotVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (x.is_plain()) return make(std::move(out), kPlainLevel);
  ledger_.record(OpKind::kMult);
  return make(std::move(out), std::min(x.level(), y.level()) - 1);
}

CipherBlock Emulator::cmult(const CipherBlock& x0, const CipherBlock& mask) const {
  check(x0);
  check(mask);
  if (!mask.is_plain()) {
    throw Error(Module::kEmulator, ErrorCode::kInvalidArgument, "cmult mask must be plaintext");
  }
  const CipherBlock x = ready_for_mult(x0);
  const auto& a = x.slots();
  const auto& b = mask.slots();
  SlotVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (x.is_plain()) return make(std::move(out), kPlainLevel);
  ledger_.record(OpKind::kCMult);
  return make(std::move(out), x.level() - 1);
}

CipherBlock Emulator::cmult(const CipherBlock& x0, Complex c) const {
  check(x0);
  const CipherBlock x = ready_for_mult(x0);
  SlotVector out(x.slots());
  for (auto& v : out) v *= c;
  if (x.is_plain()) return make(std::move(out), kPlainLevel);
  ledger_.record(OpKind::kCMult);
  return make(std::move(out), x.level() - 1);
}

CipherBlock Emulator::mul_imag(const CipherBlock& x) const {
  check(x);
  SlotVector out(x.slots());
  for (auto& v : out) v = Complex(-v.imag(), v.real());
  if (!x.is_plain()) ledger_.record(OpKind::kMulImag);
  return make(std::move(out), x.level());
}

CipherBlock Emulator::rotate_left(const CipherBlock& x, std::size_t r) const {
  check(x);
  const std::size_t s = ctx_->slots();
  r %= s;
  if (r == 0) return x;
  const auto& a = x.slots();
  SlotVector out(s);
  std::rotate_copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(r), a.end(), out.begin());
  if (!x.is_plain()) ledger_.record(OpKind::kRot);
  return make(std::move(out), x.level());
}

CipherBlock Emulator::lrot(const CipherBlock& x, long r) const {
  const long s = static_cast<long>(ctx_->slots());
  return rotate_left(x, static_cast<std::size_t>(((r % s) + s) % s));
}

CipherBlock Emulator::rrot(const CipherBlock& x, long r) const { return lrot(x, -r); }

CipherBlock Emulator::conj(const CipherBlock& x) const {
  check(x);
  SlotVector out(x.slots());
  for (auto& v : out) v = std::conj(v);
  if (!x.is_plain()) ledger_.record(OpKind::kConj);
  return make(std::move(out), x.level());
}

CipherBlock Emulator::bootstrap(const CipherBlock& x) const {
  check(x);
  if (x.is_plain()) return x;
  ledger_.record(OpKind::kBootstrap);
  return CipherBlock(x.slots_, ctx_->max_level(), ctx_.get());
}

CipherBlock Emulator::ensure_level(const CipherBlock& x, int needed) const {
  check(x);
  if (x.is_plain()) return x;
  if (needed > ctx_->max_level()) {
    throw DepthExhausted(Module::kEmulator, "requested depth " + std::to_string(needed) +
                                                " exceeds max_level");
  }
  const int floor = std::max(needed, ctx_->bootstrap_threshold());
  if (x.level() >= floor) return x;
  if (ctx_->auto_bootstrap()) return bootstrap(x);
  if (x.level() >= needed) return x;
  throw DepthExhausted(Module::kEmulator, "level " + std::to_string(x.level()) + " < required " +
                                              std::to_string(needed));
}

}  // namespace heml
