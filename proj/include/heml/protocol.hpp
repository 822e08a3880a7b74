// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <variant>
#include <vector>

#include "heml/encoding.hpp"

namespace heml {

// Record framing: u32 little-endian length of (type byte + payload), the type
// byte, then the payload. Integers are little-endian; reals are IEEE-754
// binary64, little-endian.
//
// Matrix payload: u32 rows, u32 cols, u32 grid_rows, u32 grid_cols, u8 tiling,
// u32 period, u8 tag, u32 s0, u32 s1, then per block (row-major grid): u8 plain
// flag, i32 level (-1 for plaintext), s0*s1 pairs (re, im).
enum class MessageType : std::uint8_t {
  kEncryptedBatch = 0x01,
  kEncryptedValLogits = 0x02,
  kStopSignal = 0x03,
  kFinalWeights = 0x04,
};

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1 };

// Payload: u8 split, u32 index, u32 count, matrix X, u8 has_labels, [matrix Y].
struct EncryptedBatch {
  Split split = Split::kTrain;
  std::uint32_t index = 0;
  std::uint32_t count = 0;  // batches in this split
  EncodedMatrix x;
  std::optional<EncodedMatrix> y;
};

// Payload: u32 epoch, u32 index, u32 count, matrix.
struct EncryptedValLogits {
  std::uint32_t epoch = 0;
  std::uint32_t index = 0;
  std::uint32_t count = 0;
  EncodedMatrix logits;
};

// Payload: u32 epoch, u8 flags (bit 0 stop, bit 1 improved).
struct StopSignal {
  std::uint32_t epoch = 0;
  bool stop = false;
  bool improved = false;
};

// Payload: matrix.
struct FinalWeights {
  EncodedMatrix weights;
};

using Message = std::variant<EncryptedBatch, EncryptedValLogits, StopSignal, FinalWeights>;

std::vector<std::uint8_t> serialize(const Backend& be, const Message& msg);
// Blocks are rebuilt in `be`'s context. Throws on malformed or truncated input.
Message deserialize(const Backend& be, const std::vector<std::uint8_t>& frame);

// One direction of a record stream.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(std::vector<std::uint8_t> frame) = 0;
  // Next frame; throws a protocol error if none is available.
  virtual std::vector<std::uint8_t> receive() = 0;
  virtual bool empty() const = 0;
};

class InProcessTransport final : public Transport {
 public:
  void send(std::vector<std::uint8_t> frame) override;
  std::vector<std::uint8_t> receive() override;
  bool empty() const override { return queue_.empty(); }
  std::uint64_t bytes_sent() const { return bytes_; }

 private:
  std::deque<std::vector<std::uint8_t>> queue_;
  std::uint64_t bytes_ = 0;
};

// A pair of transports, one per direction.
struct Channel {
  InProcessTransport to_server;
  InProcessTransport to_client;
};

}  // namespace heml
