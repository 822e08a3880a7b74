// SPDX-License-Identifier: Apache-2.0
#include "heml/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "heml/error.hpp"

namespace heml {

Eigen::MatrixXd Dataset::one_hot() const {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()),
                                            static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return y;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  Dataset d;
  d.num_classes = num_classes;
  d.x = x.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  labels.begin() + static_cast<std::ptrdiff_t>(end));
  return d;
}

Dataset make_dataset(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                     std::size_t num_classes) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(Module::kTraining, ErrorCode::kShapeMismatch, "feature rows and label count differ");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw Error(Module::kTraining, ErrorCode::kMalformedInput,
                  "label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  Dataset d;
  d.num_classes = num_classes;
  d.labels = labels;
  d.x.resize(features.rows(), features.cols() + 1);
  d.x.leftCols(features.cols()) = features;
  d.x.col(features.cols()).setOnes();
  return d;
}

Dataset gaussian_mixture(std::size_t classes, std::size_t features, std::size_t samples,
                         std::uint64_t seed, double separation) {
  if (classes == 0 || features == 0) {
    throw Error(Module::kTraining, ErrorCode::kInvalidArgument, "classes and features must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(features));
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    for (Eigen::Index j = 0; j < means.cols(); ++j) means(k, j) = separation * normal(rng);
  }
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  Eigen::MatrixXd feats(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(features));
  std::vector<int> labels(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t row = order[i];
    const auto label = static_cast<int>(i % classes);
    labels[row] = label;
    for (Eigen::Index j = 0; j < feats.cols(); ++j) {
      feats(static_cast<Eigen::Index>(row), j) = means(label, j) + normal(rng);
    }
  }
  return make_dataset(feats, labels, classes);
}

std::vector<Dataset> make_batches(const Dataset& d, std::size_t batch_size, bool shuffle,
                                  std::uint64_t seed) {
  if (batch_size == 0) {
    throw Error(Module::kTraining, ErrorCode::kInvalidArgument, "batch_size must be positive");
  }
  Dataset src = d;
  if (shuffle) {
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      src.x.row(static_cast<Eigen::Index>(i)) = d.x.row(static_cast<Eigen::Index>(perm[i]));
      src.labels[i] = d.labels[perm[i]];
    }
  }
  std::vector<Dataset> out;
  for (std::size_t b = 0; b < src.size(); b += batch_size) {
    out.push_back(src.slice(b, std::min(src.size(), b + batch_size)));
  }
  return out;
}

}  // namespace heml
