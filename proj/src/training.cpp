// SPDX-License-Identifier: Apache-2.0
#include "heml/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "heml/error.hpp"
#include "heml/matmul.hpp"

namespace heml {

namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(Module::kTraining, ErrorCode::kInvalidArgument, what);
}

[[noreturn]] void protocol_error(const std::string& what) {
  throw Error(Module::kTraining, ErrorCode::kProtocol, what);
}

template <typename T>
T expect(const Backend& be, Transport& t) {
  Message msg = deserialize(be, t.receive());
  if (auto* m = std::get_if<T>(&msg)) return std::move(*m);
  protocol_error("unexpected message type");
}

}  // namespace

double NesterovSchedule::next_lambda(double lambda) {
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * lambda * lambda));
}

void NesterovSchedule::advance() {
  lambda_prev = lambda_curr;
  lambda_curr = next_lambda(lambda_curr);
  ++t;
}

void TrainConfig::validate() const {
  if (num_classes < 2) bad_config("num_classes must be >= 2");
  if (batch_size == 0) bad_config("batch_size must be positive");
  if (!(learning_rate > 0.0)) bad_config("learning_rate must be positive");
  if (patience < 1) bad_config("patience must be >= 1");
  if (max_epochs < 1) bad_config("max_epochs must be >= 1");
  if (refresh_level < 4) bad_config("refresh_level must be >= 4");
  softmax.validate();
}

Eigen::MatrixXd init_weights(std::size_t classes, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.01, 0.01);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
  return w;
}

EncodedMatrix encode_weights(const Backend& be, const Eigen::MatrixXd& w, bool encrypt) {
  EncodeOptions opt;
  opt.tiling = Tiling::kVertical;
  opt.encrypt = encrypt;
  opt.tag = DataTag::kWeights;
  return encode(be, w, opt);
}

EncryptedBatchData encode_batch(const Backend& be, const Dataset& batch) {
  EncryptedBatchData out;
  EncodeOptions xo;
  xo.tag = DataTag::kFeatures;
  out.x = encode(be, batch.x, xo);
  EncodeOptions yo;
  yo.tiling = Tiling::kHorizontal;
  yo.tag = DataTag::kLabels;
  out.y = encode(be, batch.one_hot(), yo);
  out.n = batch.size();
  return out;
}

EncodedMatrix logits(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& w) {
  EncodedMatrix out = diag_abt(be, ensure_level(be, x, 3), ensure_level(be, w, 3));
  out.tag = DataTag::kLogits;
  return out;
}

EncodedMatrix gradient(const Backend& be, const EncodedMatrix& x, const EncodedMatrix& y,
                       const EncodedMatrix& p, double alpha, std::size_t n) {
  if (n == 0) bad_config("gradient of an empty batch");
  EncodedMatrix d = sub(be, p, y);
  const AtbPath path = resolve_atb_path(d, x, AtbPath::kAuto);
  d = ensure_level(be, d, path == AtbPath::kPartialRotate ? 3 : 4);
  EncodedMatrix g = diag_atb(be, d, ensure_level(be, x, 3), alpha / static_cast<double>(n), path);
  g.tag = DataTag::kWeights;
  return g;
}

void nag_step(const Backend& be, TrainState& state, const EncryptedBatchData& batch,
              const TrainConfig& cfg, const LogitsProbe& probe, std::size_t batch_index) {
  const EncodedMatrix l = logits(be, batch.x, state.v);
  if (probe) probe(l, batch_index);
  const EncodedMatrix p = a_softmax(be, l, cfg.num_classes, cfg.softmax);
  const EncodedMatrix g = gradient(be, batch.x, batch.y, p, cfg.learning_rate, batch.n);
  EncodedMatrix w_next = sub(be, state.v, g);
  const double gamma = state.schedule.gamma();
  EncodedMatrix v_next = add(be, cmult(be, w_next, 1.0 - gamma), cmult(be, state.w, gamma));
  w_next.tag = DataTag::kWeights;
  v_next.tag = DataTag::kWeights;
  state.w = ensure_level(be, w_next, cfg.refresh_level);
  state.v = ensure_level(be, v_next, cfg.refresh_level);
  state.schedule.advance();
}

StopDecision EarlyStopping::update(int epoch, double loss) {
  StopDecision d;
  if (loss < best_loss_) {
    best_loss_ = loss;
    best_epoch_ = epoch;
    since_ = 0;
    d.improved = true;
  } else {
    ++since_;
  }
  d.stop = since_ >= patience_;
  return d;
}

double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

double accuracy(const Eigen::MatrixXd& w, const Dataset& d) {
  const Eigen::MatrixXd l = d.x * w.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    Eigen::Index arg = 0;
    l.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == d.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

// ---- client ----------------------------------------------------------------------------

Client::Client(const Backend& be, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
               Transport& to_server, Transport& from_server)
    : be_(be), train_(train), val_(val), cfg_(cfg), out_(to_server), in_(from_server),
      stopper_(cfg.patience) {}

void Client::upload() {
  const auto batches = make_batches(train_, cfg_.batch_size, cfg_.shuffle, cfg_.seed);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    EncryptedBatchData enc = encode_batch(be_, batches[i]);
    EncryptedBatch msg{Split::kTrain, static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(batches.size()), std::move(enc.x), std::move(enc.y)};
    out_.send(serialize(be_, msg));
  }
  val_batches_ = make_batches(val_, cfg_.batch_size, false, 0);
  for (std::size_t i = 0; i < val_batches_.size(); ++i) {
    EncodeOptions xo;
    xo.tag = DataTag::kFeatures;
    EncryptedBatch msg{Split::kValidation, static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(val_batches_.size()),
                       encode(be_, val_batches_[i].x, xo), std::nullopt};
    out_.send(serialize(be_, msg));
  }
}

StopDecision Client::handle_validation(int epoch) {
  double total = 0.0;
  for (std::size_t i = 0; i < val_batches_.size(); ++i) {
    const auto msg = expect<EncryptedValLogits>(be_, in_);
    if (msg.epoch != static_cast<std::uint32_t>(epoch) || msg.index != i) {
      protocol_error("validation logits out of order");
    }
    const Eigen::MatrixXd l = decode(be_, msg.logits, Role::kClient);
    total += cross_entropy(l, val_batches_[i].labels) * static_cast<double>(val_batches_[i].size());
  }
  const double loss = total / static_cast<double>(val_.size());
  val_losses_.push_back(loss);
  const StopDecision d = stopper_.update(epoch, loss);
  out_.send(serialize(be_, StopSignal{static_cast<std::uint32_t>(epoch), d.stop, d.improved}));
  return d;
}

Eigen::MatrixXd Client::receive_final() {
  const auto msg = expect<FinalWeights>(be_, in_);
  return decode(be_, msg.weights, Role::kClient);
}

// ---- server ----------------------------------------------------------------------------

Server::Server(const Backend& be, const TrainConfig& cfg, Transport& from_client,
               Transport& to_client)
    : be_(be), cfg_(cfg), in_(from_client), out_(to_client) {}

void Server::receive_data() {
  std::optional<std::uint32_t> train_count;
  std::optional<std::uint32_t> val_count;
  while (!(train_count && val_count && train_.size() == *train_count && val_.size() == *val_count)) {
    auto msg = expect<EncryptedBatch>(be_, in_);
    if (msg.split == Split::kTrain) {
      if (!msg.y) protocol_error("training batch without labels");
      train_count = msg.count;
      if (msg.index != train_.size()) protocol_error("training batches out of order");
      EncryptedBatchData b;
      b.n = msg.x.rows;
      b.x = std::move(msg.x);
      b.y = std::move(*msg.y);
      train_.push_back(std::move(b));
    } else {
      val_count = msg.count;
      if (msg.index != val_.size()) protocol_error("validation batches out of order");
      val_.push_back(std::move(msg.x));
    }
  }
}

void Server::init_weights(std::size_t feature_cols) {
  const Eigen::MatrixXd w0 = ::heml::init_weights(cfg_.num_classes, feature_cols, cfg_.seed);
  state_ = TrainState{};
  state_.w = encode_weights(be_, w0);
  state_.v = state_.w;
}

void Server::run_epoch(int, const LogitsProbe& probe) {
  for (std::size_t i = 0; i < train_.size(); ++i) {
    const OpCounts before = be_.ledger().snapshot();
    nag_step(be_, state_, train_[i], cfg_, probe, i);
    step_ledgers_.push_back(be_.ledger().snapshot() - before);
  }
}

void Server::send_validation(int epoch) {
  for (std::size_t i = 0; i < val_.size(); ++i) {
    EncryptedValLogits msg{static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(val_.size()), logits(be_, val_[i], state_.w)};
    out_.send(serialize(be_, msg));
  }
}

bool Server::receive_signal(int epoch) {
  const auto sig = expect<StopSignal>(be_, in_);
  if (sig.epoch != static_cast<std::uint32_t>(epoch)) protocol_error("stop signal for wrong epoch");
  if (sig.improved) best_ = state_.w;
  return !sig.stop;
}

void Server::send_final() {
  out_.send(serialize(be_, FinalWeights{best_ ? *best_ : state_.w}));
}

// ---- orchestration ---------------------------------------------------------------------

FitResult fit(const Backend& be, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  cfg.validate();
  const auto& ctx = be.context();
  if (train.num_classes != cfg.num_classes || val.num_classes != cfg.num_classes) {
    bad_config("dataset class count differs from config");
  }
  if (train.x.cols() != val.x.cols()) bad_config("train and validation widths differ");
  if (cfg.batch_size > ctx.s0()) bad_config("batch_size exceeds s0");
  if (tile_period(cfg.num_classes) > ctx.s1() || tile_period(cfg.num_classes) > ctx.s0()) {
    bad_config("num_classes does not fit the block shape");
  }

  FitResult res;
  const std::uint64_t private_before = be.audit().server_private_decodes();
  const OpCounts start = be.ledger().snapshot();
  Channel ch;
  Client client(be, train, val, cfg, ch.to_server, ch.to_client);
  Server server(be, cfg, ch.to_server, ch.to_client);
  client.upload();
  server.receive_data();
  server.init_weights(static_cast<std::size_t>(train.x.cols()));
  res.setup_ledger = be.ledger().snapshot() - start;

  // Diagnostics observer: sees plaintext labels and decodes softmax inputs
  // under its own role; never part of the server path.
  const auto plain_batches = make_batches(train, cfg.batch_size, cfg.shuffle, cfg.seed);
  std::uint64_t step = 0;
  double epoch_loss = 0.0;
  LogitsProbe probe;
  if (cfg.diagnostics) {
    probe = [&](const EncodedMatrix& l, std::size_t index) {
      const Eigen::MatrixXd m = decode(be, l, Role::kDiagnostics);
      res.trace.push_back({++step, m.minCoeff(), m.maxCoeff()});
      epoch_loss += cross_entropy(m, plain_batches[index].labels) *
                    static_cast<double>(plain_batches[index].size());
    };
  }

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    epoch_loss = 0.0;
    server.run_epoch(epoch, probe);
    const OpCounts before_val = be.ledger().snapshot();
    server.send_validation(epoch);
    res.validation_ledgers.push_back(be.ledger().snapshot() - before_val);
    const StopDecision d = client.handle_validation(epoch);
    const bool keep_going = server.receive_signal(epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = cfg.diagnostics ? epoch_loss / static_cast<double>(train.size())
                                     : std::numeric_limits<double>::quiet_NaN();
    rec.val_loss = client.val_losses().back();
    rec.improved = d.improved;
    res.epochs.push_back(rec);
    res.epochs_run = epoch;
    if (!keep_going) {
      res.stopped_early = true;
      break;
    }
  }
  server.send_final();
  res.weights = client.receive_final();
  res.best_epoch = client.stopper().best_epoch();

  res.step_ledgers = server.step_ledgers();
  res.total = res.setup_ledger;
  for (const auto& c : res.step_ledgers) res.total += c;
  for (const auto& c : res.validation_ledgers) res.total += c;
  res.estimated_ms = estimated_ms(res.total, ctx.weights());
  res.server_private_decodes = be.audit().server_private_decodes() - private_before;
  res.bytes_to_server = ch.to_server.bytes_sent();
  res.bytes_to_client = ch.to_client.bytes_sent();
  return res;
}

// ---- plaintext reference ---------------------------------------------------------------

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits, SoftmaxKind kind,
                             const SoftmaxConfig& cfg) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) row[static_cast<std::size_t>(j)] = logits(i, j);
    const std::vector<double> s =
        kind == SoftmaxKind::kExact ? softmax_exact(row) : approx_softmax(row, cfg);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) p(i, j) = s[static_cast<std::size_t>(j)];
  }
  return p;
}

PlainTrainer::PlainTrainer(const Eigen::MatrixXd& w0, const TrainConfig& cfg, SoftmaxKind kind)
    : w_(w0), v_(w0), cfg_(cfg), kind_(kind) {}

void PlainTrainer::step(const Dataset& batch) {
  const Eigen::MatrixXd p = softmax_rows(batch.x * v_.transpose(), kind_, cfg_.softmax);
  const double scale = cfg_.learning_rate / static_cast<double>(batch.size());
  const Eigen::MatrixXd g = scale * (p - batch.one_hot()).transpose() * batch.x;
  const Eigen::MatrixXd w_next = v_ - g;
  const double gamma = schedule_.gamma();
  v_ = (1.0 - gamma) * w_next + gamma * w_;
  w_ = w_next;
  schedule_.advance();
}

PlainFitResult fit_plain(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                         SoftmaxKind kind) {
  cfg.validate();
  PlainFitResult res;
  const auto batches = make_batches(train, cfg.batch_size, cfg.shuffle, cfg.seed);
  PlainTrainer trainer(init_weights(cfg.num_classes, static_cast<std::size_t>(train.x.cols()), cfg.seed),
                       cfg, kind);
  EarlyStopping stopper(cfg.patience);
  res.weights = trainer.w();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss = 0.0;
    for (const auto& b : batches) {
      loss += cross_entropy(b.x * trainer.v().transpose(), b.labels) * static_cast<double>(b.size());
      trainer.step(b);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss / static_cast<double>(train.size());
    rec.val_loss = cross_entropy(val.x * trainer.w().transpose(), val.labels);
    const StopDecision d = stopper.update(epoch, rec.val_loss);
    rec.improved = d.improved;
    if (d.improved) res.weights = trainer.w();
    res.epochs.push_back(rec);
    res.epochs_run = epoch;
    if (d.stop) break;
  }
  res.best_epoch = stopper.best_epoch();
  return res;
}

}  // namespace heml
