// SPDX-License-Identifier: Apache-2.0
#include "heml/protocol.hpp"

#include <cstring>
#include <string>

#include "heml/error.hpp"

namespace heml {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(Module::kTraining, ErrorCode::kProtocol, what);
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::size_t pos) : buf_(buf), pos_(pos) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) malformed("truncated record");
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_;
};

void write_matrix(Writer& w, const Backend& be, const EncodedMatrix& m) {
  const auto& ctx = be.context();
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  w.u32(static_cast<std::uint32_t>(m.grid_rows));
  w.u32(static_cast<std::uint32_t>(m.grid_cols));
  w.u8(static_cast<std::uint8_t>(m.tiling));
  w.u32(static_cast<std::uint32_t>(m.period));
  w.u8(static_cast<std::uint8_t>(m.tag));
  w.u32(static_cast<std::uint32_t>(ctx.s0()));
  w.u32(static_cast<std::uint32_t>(ctx.s1()));
  for (const auto& b : m.blocks) {
    w.u8(b.is_plain() ? 1 : 0);
    w.i32(b.is_plain() ? -1 : b.level());
    for (const auto& z : b.slots()) {
      w.f64(z.real());
      w.f64(z.imag());
    }
  }
}

EncodedMatrix read_matrix(Reader& r, const Backend& be) {
  const auto& ctx = be.context();
  EncodedMatrix m;
  m.rows = r.u32();
  m.cols = r.u32();
  m.grid_rows = r.u32();
  m.grid_cols = r.u32();
  const std::uint8_t tiling = r.u8();
  if (tiling > 2) malformed("unknown tiling");
  m.tiling = static_cast<Tiling>(tiling);
  m.period = r.u32();
  const std::uint8_t tag = r.u8();
  if (tag >= kNumDataTags) malformed("unknown data tag");
  m.tag = static_cast<DataTag>(tag);
  if (r.u32() != ctx.s0() || r.u32() != ctx.s1()) malformed("block shape differs from context");
  const std::size_t nblocks = m.grid_rows * m.grid_cols;
  if (nblocks == 0 || nblocks > ctx.max_blocks()) malformed("bad grid size");
  m.blocks.reserve(nblocks);
  for (std::size_t b = 0; b < nblocks; ++b) {
    const bool plain = r.u8() != 0;
    const std::int32_t level = r.i32();
    SlotVector v(ctx.slots());
    for (auto& z : v) {
      const double re = r.f64();
      const double im = r.f64();
      z = Complex(re, im);
    }
    if (plain) {
      m.blocks.push_back(be.plain(v));
    } else {
      if (level < 0 || level > ctx.max_level()) malformed("level out of range");
      m.blocks.push_back(be.encrypt(v, level));
    }
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Backend& be, const Message& msg) {
  Writer w;
  w.u32(0);  // length, patched below
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, EncryptedBatch>) {
          w.u8(static_cast<std::uint8_t>(MessageType::kEncryptedBatch));
          w.u8(static_cast<std::uint8_t>(m.split));
          w.u32(m.index);
          w.u32(m.count);
          write_matrix(w, be, m.x);
          w.u8(m.y ? 1 : 0);
          if (m.y) write_matrix(w, be, *m.y);
        } else if constexpr (std::is_same_v<T, EncryptedValLogits>) {
          w.u8(static_cast<std::uint8_t>(MessageType::kEncryptedValLogits));
          w.u32(m.epoch);
          w.u32(m.index);
          w.u32(m.count);
          write_matrix(w, be, m.logits);
        } else if constexpr (std::is_same_v<T, StopSignal>) {
          w.u8(static_cast<std::uint8_t>(MessageType::kStopSignal));
          w.u32(m.epoch);
          w.u8(static_cast<std::uint8_t>((m.stop ? 1 : 0) | (m.improved ? 2 : 0)));
        } else {
          w.u8(static_cast<std::uint8_t>(MessageType::kFinalWeights));
          write_matrix(w, be, m.weights);
        }
      },
      msg);
  auto& bytes = w.bytes();
  const auto len = static_cast<std::uint32_t>(bytes.size() - 4);
  for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (8 * i));
  return std::move(bytes);
}

Message deserialize(const Backend& be, const std::vector<std::uint8_t>& frame) {
  Reader r(frame, 0);
  const std::uint32_t len = r.u32();
  if (len + 4ull != frame.size() || len == 0) malformed("length prefix does not match record size");
  const auto type = static_cast<MessageType>(r.u8());
  Message out;
  switch (type) {
    case MessageType::kEncryptedBatch: {
      EncryptedBatch m;
      const std::uint8_t split = r.u8();
      if (split > 1) malformed("unknown split");
      m.split = static_cast<Split>(split);
      m.index = r.u32();
      m.count = r.u32();
      m.x = read_matrix(r, be);
      if (r.u8() != 0) m.y = read_matrix(r, be);
      out = std::move(m);
      break;
    }
    case MessageType::kEncryptedValLogits: {
      EncryptedValLogits m;
      m.epoch = r.u32();
      m.index = r.u32();
      m.count = r.u32();
      m.logits = read_matrix(r, be);
      out = std::move(m);
      break;
    }
    case MessageType::kStopSignal: {
      StopSignal m;
      m.epoch = r.u32();
      const std::uint8_t flags = r.u8();
      if (flags > 3) malformed("unknown stop flags");
      m.stop = (flags & 1) != 0;
      m.improved = (flags & 2) != 0;
      out = m;
      break;
    }
    case MessageType::kFinalWeights: {
      FinalWeights m;
      m.weights = read_matrix(r, be);
      out = std::move(m);
      break;
    }
    default:
      malformed("unknown message type " + std::to_string(static_cast<int>(type)));
  }
  if (!r.done()) malformed("trailing bytes after payload");
  return out;
}

void InProcessTransport::send(std::vector<std::uint8_t> frame) {
  bytes_ += frame.size();
  queue_.push_back(std::move(frame));
}

std::vector<std::uint8_t> InProcessTransport::receive() {
  if (queue_.empty()) malformed("receive on an empty channel");
  std::vector<std::uint8_t> f = std::move(queue_.front());
  queue_.pop_front();
  return f;
}

}  // namespace heml
