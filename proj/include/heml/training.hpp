// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "heml/approx.hpp"
#include "heml/dataset.hpp"
#include "heml/encoding.hpp"
#include "heml/protocol.hpp"

namespace heml {

// Nesterov momentum weights: lambda_0 = 0, lambda_{t+1} = (1 + sqrt(1 + 4 lambda_t^2)) / 2,
// gamma_t = (1 - lambda_t) / lambda_{t+1}. Starts at t = 1.
struct NesterovSchedule {
  std::uint64_t t = 1;
  double lambda_prev = 1.0;  // lambda_t
  double lambda_curr = 0.5 * (1.0 + std::sqrt(5.0));  // lambda_{t+1}

  static double next_lambda(double lambda);
  double gamma() const { return (1.0 - lambda_prev) / lambda_curr; }
  void advance();
};

struct TrainConfig {
  std::size_t num_classes = 2;
  std::size_t batch_size = 64;
  double learning_rate = 1.0;
  int patience = 3;
  int max_epochs = 30;
  SoftmaxConfig softmax{};
  std::uint64_t seed = 42;
  bool shuffle = false;
  // Parameters are bootstrapped after a step when below this level.
  int refresh_level = 4;
  // Record softmax-input ranges and batch losses through diagnostic decodes.
  bool diagnostics = true;

  void validate() const;
};

struct TrainState {
  EncodedMatrix w;
  EncodedMatrix v;
  NesterovSchedule schedule;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
};

struct EncryptedBatchData {
  EncodedMatrix x;  // N x (f+1), untiled
  EncodedMatrix y;  // N x c one-hot, horizontally tiled
  std::size_t n = 0;
};

// Seeded uniform [-0.01, 0.01] weights, c x (f+1).
Eigen::MatrixXd init_weights(std::size_t classes, std::size_t cols, std::uint64_t seed);
EncodedMatrix encode_weights(const Backend& be, const Eigen::MatrixXd& w, bool encrypt = true);
EncryptedBatchData encode_batch(const Backend& be, const Dataset& batch);

// X W^T, horizontally tiled.
EncodedMatrix logits(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& w);
// (alpha / N) (P - Y)^T X, vertically tiled like the weights.
EncodedMatrix gradient(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y,
                       const EncodedMatrix& p, double alpha, std::size_t n);

// Observer for the softmax inputs of each step (diagnostics only).
using LogitsProbe = std::function<void(const EncodedMatrix& logits, std::size_t batch_index)>;

void nag_step(const Backend& be, TrainState& state, const EncryptedBatchData& batch,
              const TrainConfig& cfg, const LogitsProbe& probe = {}, std::size_t batch_index = 0);

struct StopDecision {
  bool improved = false;
  bool stop = false;
};

// Strict-improvement early stopping.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  StopDecision update(int epoch, double loss);
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  int since_improvement() const { return since_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int since_ = 0;
};

double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);
double accuracy(const Eigen::MatrixXd& w, const Dataset& d);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean batch loss at the look-ahead weights (diagnostic)
  double val_loss = 0.0;
  bool improved = false;
};

struct TraceRecord {
  std::uint64_t step = 0;
  double min = 0.0;
  double max = 0.0;
};

struct FitResult {
  Eigen::MatrixXd weights;  // best weights, c x (f+1)
  std::vector<EpochRecord> epochs;
  std::vector<OpCounts> step_ledgers;
  std::vector<OpCounts> validation_ledgers;
  OpCounts setup_ledger;
  OpCounts total;
  double estimated_ms = 0.0;
  std::vector<TraceRecord> trace;
  int best_epoch = 0;
  int epochs_run = 0;
  bool stopped_early = false;
  std::uint64_t server_private_decodes = 0;
  std::uint64_t bytes_to_server = 0;
  std::uint64_t bytes_to_client = 0;
};

// Holds the private data; encrypts, evaluates validation logits, decides stopping.
class Client {
 public:
  Client(const Backend& be, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
         Transport& to_server, Transport& from_server);

  void upload();
  StopDecision handle_validation(int epoch);
  Eigen::MatrixXd receive_final();
  const std::vector<double>& val_losses() const { return val_losses_; }
  const EarlyStopping& stopper() const { return stopper_; }

 private:
  const Backend& be_;
  const Dataset& train_;
  const Dataset& val_;
  TrainConfig cfg_;
  Transport& out_;
  Transport& in_;
  std::vector<Dataset> val_batches_;
  EarlyStopping stopper_;
  std::vector<double> val_losses_;
};

// Sees only ciphertexts.
class Server {
 public:
  Server(const Backend& be, const TrainConfig& cfg, Transport& from_client, Transport& to_client);

  void receive_data();
  void init_weights(std::size_t feature_cols);
  // One pass over the training batches, then validation logits to the client.
  void run_epoch(int epoch, const LogitsProbe& probe);
  void send_validation(int epoch);
  // Returns false when the client asks to stop.
  bool receive_signal(int epoch);
  void send_final();

  const TrainState& state() const { return state_; }
  std::size_t train_batches() const { return train_.size(); }
  const std::vector<OpCounts>& step_ledgers() const { return step_ledgers_; }

 private:
  const Backend& be_;
  TrainConfig cfg_;
  Transport& in_;
  Transport& out_;
  std::vector<EncryptedBatchData> train_;
  std::vector<EncodedMatrix> val_;
  TrainState state_;
  std::optional<EncodedMatrix> best_;
  std::vector<OpCounts> step_ledgers_;
};

FitResult fit(const Backend& be, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

// ---- plaintext reference ---------------------------------------------------------

enum class SoftmaxKind { kExact, kApprox };

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits, SoftmaxKind kind,
                             const SoftmaxConfig& cfg);

class PlainTrainer {
 public:
  PlainTrainer(const Eigen::MatrixXd& w0, const TrainConfig& cfg, SoftmaxKind kind);
  void step(const Dataset& batch);
  const Eigen::MatrixXd& w() const { return w_; }
  const Eigen::MatrixXd& v() const { return v_; }

 private:
  Eigen::MatrixXd w_;
  Eigen::MatrixXd v_;
  NesterovSchedule schedule_;
  TrainConfig cfg_;
  SoftmaxKind kind_;
};

struct PlainFitResult {
  Eigen::MatrixXd weights;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int epochs_run = 0;
};

PlainFitResult fit_plain(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                         SoftmaxKind kind);

}  // namespace heml
