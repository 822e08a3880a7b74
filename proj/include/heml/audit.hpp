// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>

namespace heml {

// Who asked for a decryption.
enum class Role : std::uint8_t { kClient = 0, kServer = 1, kDiagnostics = 2 };
inline constexpr std::size_t kNumRoles = 3;

// What the decrypted matrix holds.
enum class DataTag : std::uint8_t {
  kOther = 0,
  kFeatures = 1,
  kLabels = 2,
  kWeights = 3,
  kProbabilities = 4,
  kLogits = 5,
};
inline constexpr std::size_t kNumDataTags = 6;

const char* role_name(Role r);
const char* data_tag_name(DataTag t);

// Counts decode calls per (role, tag). Thread safe.
class DecodeAudit {
 public:
  DecodeAudit() = default;
  DecodeAudit(const DecodeAudit&) = delete;
  DecodeAudit& operator=(const DecodeAudit&) = delete;

  void record(Role role, DataTag tag);
  std::uint64_t count(Role role, DataTag tag) const;
  std::uint64_t count(Role role) const;
  // Server decodes of features, labels, weights or probabilities.
  std::uint64_t server_private_decodes() const;
  void reset();

 private:
  std::array<std::atomic<std::uint64_t>, kNumRoles * kNumDataTags> counts_{};
};

}  // namespace heml
