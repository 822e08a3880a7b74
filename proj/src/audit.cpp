// SPDX-License-Identifier: Apache-2.0
#include "heml/audit.hpp"

namespace heml {

const char* role_name(Role r) {
  switch (r) {
    case Role::kClient: return "client";
    case Role::kServer: return "server";
    case Role::kDiagnostics: return "diagnostics";
  }
  return "unknown";
}

const char* data_tag_name(DataTag t) {
  switch (t) {
    case DataTag::kOther: return "other";
    case DataTag::kFeatures: return "features";
    case DataTag::kLabels: return "labels";
    case DataTag::kWeights: return "weights";
    case DataTag::kProbabilities: return "probabilities";
    case DataTag::kLogits: return "logits";
  }
  return "unknown";
}

namespace {
std::size_t slot(Role r, DataTag t) {
  return static_cast<std::size_t>(r) * kNumDataTags + static_cast<std::size_t>(t);
}
}  // namespace

void DecodeAudit::record(Role role, DataTag tag) {
  counts_[slot(role, tag)].fetch_add(1, std::memory_order_relaxed);
}

std::uint64_t DecodeAudit::count(Role role, DataTag tag) const {
  return counts_[slot(role, tag)].load(std::memory_order_relaxed);
}

std::uint64_t DecodeAudit::count(Role role) const {
  std::uint64_t total = 0;
  for (std::size_t t = 0; t < kNumDataTags; ++t) total += count(role, static_cast<DataTag>(t));
  return total;
}

std::uint64_t DecodeAudit::server_private_decodes() const {
  return count(Role::kServer, DataTag::kFeatures) + count(Role::kServer, DataTag::kLabels) +
         count(Role::kServer, DataTag::kWeights) + count(Role::kServer, DataTag::kProbabilities);
}

void DecodeAudit::reset() {
  for (auto& c : counts_) c.store(0, std::memory_order_relaxed);
}

}  // namespace heml
