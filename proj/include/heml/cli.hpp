// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "json.hpp"
#include <string>
#include <vector>

#include "heml/bench.hpp"
#include "heml/dataset.hpp"
#include "heml/emulator.hpp"
#include "heml/training.hpp"

namespace heml {

inline constexpr int kReportSchemaVersion = 1;

// CSV with a header row: feature columns, then an integer label column.
// num_classes == 0 infers max(label) + 1.
Dataset ingest(const std::string& path, std::size_t num_classes = 0);
void export_csv(const Dataset& d, const std::string& path);
void write_weights_csv(const Eigen::MatrixXd& w, const std::string& path);
Eigen::MatrixXd read_weights_csv(const std::string& path);

struct RunConfig {
  std::string train_path;
  std::string val_path;
  std::string test_path;  // optional
  std::string output_dir = "out";
  TrainConfig train;
  ContextParams context;
};

// Relative paths resolve against base_dir.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

nlohmann::json counts_json(const OpCounts& c);
nlohmann::json softmax_config_json(const SoftmaxConfig& cfg);
SoftmaxConfig parse_softmax_config(const nlohmann::json& j);

struct RunReport {
  nlohmann::json json;
  Eigen::MatrixXd weights;
};

// Trains, writes <output_dir>/report.json and <output_dir>/weights.csv.
RunReport cmd_train(const RunConfig& cfg);

std::vector<MatmulShape> parse_shapes(const std::string& spec);
std::vector<MatmulAlgorithm> parse_algorithms(const std::string& spec);
nlohmann::json cmd_bench_matmul(const std::vector<MatmulShape>& shapes,
                                const std::vector<MatmulAlgorithm>& algs, std::size_t slots,
                                std::size_t s0, std::string& table);

nlohmann::json cmd_bench_softmax(const SoftmaxBenchOptions& opt, std::string& table);

struct GenDataOptions {
  std::size_t classes = 3;
  std::size_t features = 16;
  std::size_t per_class = 100;
  std::uint64_t seed = 7;
  double separation = 1.0;
  double val_fraction = 1.0 / 7.0;
  double test_fraction = 1.0 / 7.0;
  std::string out_dir = "data";
};

// Writes train.csv, val.csv, test.csv; returns their sizes.
std::vector<std::size_t> cmd_gen_data(const GenDataOptions& opt);

}  // namespace heml
