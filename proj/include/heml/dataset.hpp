// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace heml {

// Plaintext labelled features. x carries the all-ones bias column last.
struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  // Feature count without the bias column.
  std::size_t features() const { return x.cols() > 0 ? static_cast<std::size_t>(x.cols()) - 1 : 0; }
  Eigen::MatrixXd one_hot() const;
  Dataset slice(std::size_t begin, std::size_t end) const;
};

// Appends the bias column. Throws if a label is outside [0, num_classes).
Dataset make_dataset(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                     std::size_t num_classes);

// Isotropic Gaussian clusters with means drawn from N(0, separation^2 I).
// Labels cycle through the classes and the samples are shuffled.
Dataset gaussian_mixture(std::size_t classes, std::size_t features, std::size_t samples,
                         std::uint64_t seed, double separation = 1.0);

// Consecutive slices of at most batch_size rows; a seeded permutation first if shuffle.
std::vector<Dataset> make_batches(const Dataset& d, std::size_t batch_size, bool shuffle,
                                  std::uint64_t seed);

}  // namespace heml
