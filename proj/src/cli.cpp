// SPDX-License-Identifier: Apache-2.0
#include "heml/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "heml/error.hpp"

namespace heml {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(Module::kCli, ErrorCode::kMalformedInput, what);
}

[[noreturn]] void io_error(const std::string& what) { throw Error(Module::kCli, ErrorCode::kIo, what); }

[[noreturn]] void bad_arg(const std::string& what) {
  throw Error(Module::kCli, ErrorCode::kInvalidArgument, what);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& tok, std::size_t line) {
  const std::string t = trim(tok);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    malformed("line " + std::to_string(line) + ": not a number: '" + t + "'");
  }
  return v;
}

long parse_long(const std::string& tok, const std::string& what) {
  const std::string t = trim(tok);
  long v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) malformed(what + ": '" + t + "'");
  return v;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

// ---- CSV ---------------------------------------------------------------------------------

Dataset ingest(const std::string& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) malformed(path + ": empty file");
  const std::size_t width = split(line, ',').size();
  if (width < 2) malformed(path + ": need at least one feature column and a label column");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto toks = split(line, ',');
    if (toks.size() != width) {
      malformed(path + ": line " + std::to_string(lineno) + " has " + std::to_string(toks.size()) +
                " fields, expected " + std::to_string(width));
    }
    std::vector<double> r(width - 1);
    for (std::size_t j = 0; j + 1 < width; ++j) r[j] = parse_double(toks[j], lineno);
    const long label = parse_long(toks.back(), path + ": line " + std::to_string(lineno) + " label");
    if (label < 0 || (num_classes != 0 && static_cast<std::size_t>(label) >= num_classes)) {
      malformed(path + ": line " + std::to_string(lineno) + " label " + std::to_string(label) +
                " out of range");
    }
    rows.push_back(std::move(r));
    labels.push_back(static_cast<int>(label));
  }
  if (rows.empty()) malformed(path + ": no data rows");
  if (num_classes == 0) num_classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  Eigen::MatrixXd feats(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < width; ++j) {
      feats(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return make_dataset(feats, labels, num_classes);
}

void export_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) io_error("cannot write " + path);
  const std::size_t f = d.features();
  for (std::size_t j = 0; j < f; ++j) out << "x" << j << ",";
  out << "label\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      out << fmt_double(d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ",";
    }
    out << d.labels[i] << "\n";
  }
}

void write_weights_csv(const Eigen::MatrixXd& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) io_error("cannot write " + path);
  for (Eigen::Index j = 0; j + 1 < w.cols(); ++j) out << "w" << j << ",";
  out << "bias\n";
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      out << fmt_double(w(i, j)) << (j + 1 < w.cols() ? "," : "\n");
    }
  }
}

Eigen::MatrixXd read_weights_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) malformed(path + ": empty file");
  const std::size_t width = split(line, ',').size();
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto toks = split(line, ',');
    if (toks.size() != width) malformed(path + ": ragged row " + std::to_string(lineno));
    std::vector<double> r;
    for (const auto& t : toks) r.push_back(parse_double(t, lineno));
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return w;
}

// ---- config ---------------------------------------------------------------------------

json softmax_config_json(const SoftmaxConfig& c) {
  return json{{"r_orig", c.r_orig},           {"ext_ratio", c.ext_ratio},
              {"ext_index", c.ext_index},     {"precise", c.precise},
              {"exp_range", c.exp_range},     {"inv_range", c.inv_range},
              {"inv_iters", c.inv_iters},     {"compare_g", c.compare.g_count},
              {"compare_f", c.compare.f_count}};
}

SoftmaxConfig parse_softmax_config(const json& j) {
  SoftmaxConfig c;
  c.r_orig = j.value("r_orig", c.r_orig);
  c.ext_ratio = j.value("ext_ratio", c.ext_ratio);
  c.ext_index = j.value("ext_index", c.ext_index);
  c.precise = j.value("precise", c.precise);
  c.exp_range = j.value("exp_range", c.exp_range);
  c.inv_range = j.value("inv_range", c.inv_range);
  c.inv_iters = j.value("inv_iters", c.inv_iters);
  c.compare.g_count = j.value("compare_g", c.compare.g_count);
  c.compare.f_count = j.value("compare_f", c.compare.f_count);
  return c;
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  try {
    RunConfig cfg;
    cfg.train_path = resolve(base_dir, j.at("train").get<std::string>());
    cfg.val_path = resolve(base_dir, j.at("val").get<std::string>());
    cfg.test_path = resolve(base_dir, j.value("test", std::string{}));
    cfg.output_dir = resolve(base_dir, j.value("output_dir", cfg.output_dir));
    auto& t = cfg.train;
    t.num_classes = j.at("num_classes").get<std::size_t>();
    t.batch_size = j.value("batch_size", t.batch_size);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.patience = j.value("patience", t.patience);
    t.max_epochs = j.value("max_epochs", t.max_epochs);
    t.seed = j.value("seed", t.seed);
    t.shuffle = j.value("shuffle", t.shuffle);
    t.refresh_level = j.value("refresh_level", t.refresh_level);
    t.diagnostics = j.value("diagnostics", t.diagnostics);
    if (j.contains("softmax")) t.softmax = parse_softmax_config(j.at("softmax"));
    auto& c = cfg.context;
    c.auto_bootstrap = true;
    if (j.contains("emulator")) {
      const json& e = j.at("emulator");
      c.s0 = e.value("s0", c.s0);
      c.s1 = e.value("s1", c.s1);
      if (e.contains("slots") && e.at("slots").get<std::size_t>() != c.s0 * c.s1) {
        bad_arg("emulator.slots must equal s0 * s1");
      }
      c.max_level = e.value("max_level", c.max_level);
      c.auto_bootstrap = e.value("auto_bootstrap", c.auto_bootstrap);
      c.bootstrap_threshold = e.value("bootstrap_threshold", c.bootstrap_threshold);
      if (e.contains("weights")) {
        const json& w = e.at("weights");
        c.weights.add = w.value("add", c.weights.add);
        c.weights.cmult = w.value("cmult", c.weights.cmult);
        c.weights.mult = w.value("mult", c.weights.mult);
        c.weights.rot = w.value("rot", c.weights.rot);
        c.weights.conj = w.value("conj", c.weights.conj);
        c.weights.bootstrap = w.value("bootstrap", c.weights.bootstrap);
        c.weights.mul_imag = w.value("mul_imag", c.weights.mul_imag);
      }
    }
    validate(cfg);
    return cfg;
  } catch (const json::exception& e) {
    malformed(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    malformed(path + ": " + e.what());
  }
  return parse_run_config(j, fs::path(path).parent_path().string());
}

json to_json(const RunConfig& cfg) {
  const auto& c = cfg.context;
  return json{
      {"train", cfg.train_path},
      {"val", cfg.val_path},
      {"test", cfg.test_path},
      {"output_dir", cfg.output_dir},
      {"num_classes", cfg.train.num_classes},
      {"batch_size", cfg.train.batch_size},
      {"learning_rate", cfg.train.learning_rate},
      {"patience", cfg.train.patience},
      {"max_epochs", cfg.train.max_epochs},
      {"seed", cfg.train.seed},
      {"shuffle", cfg.train.shuffle},
      {"refresh_level", cfg.train.refresh_level},
      {"diagnostics", cfg.train.diagnostics},
      {"softmax", softmax_config_json(cfg.train.softmax)},
      {"emulator",
       {{"slots", c.s0 * c.s1},
        {"s0", c.s0},
        {"s1", c.s1},
        {"max_level", c.max_level},
        {"auto_bootstrap", c.auto_bootstrap},
        {"bootstrap_threshold", c.bootstrap_threshold},
        {"weights",
         {{"add", c.weights.add},
          {"cmult", c.weights.cmult},
          {"mult", c.weights.mult},
          {"rot", c.weights.rot},
          {"conj", c.weights.conj},
          {"bootstrap", c.weights.bootstrap},
          {"mul_imag", c.weights.mul_imag}}}}},
  };
}

void validate(const RunConfig& cfg) {
  cfg.train.validate();
  EmulatorContext ctx(cfg.context);  // validates the block shape
  if (cfg.train.batch_size > ctx.s0()) bad_arg("batch_size must not exceed s0");
  if (cfg.train.num_classes > ctx.s1()) bad_arg("num_classes must not exceed s1");
  if (cfg.train_path.empty() || cfg.val_path.empty()) bad_arg("train and val paths are required");
}

json counts_json(const OpCounts& c) {
  json j;
  for (std::size_t k = 0; k < kNumOpKinds; ++k) j[op_name(static_cast<OpKind>(k))] = c.n[k];
  return j;
}

// ---- train -------------------------------------------------------------------------------

RunReport cmd_train(const RunConfig& cfg) {
  validate(cfg);
  const Dataset train = ingest(cfg.train_path, cfg.train.num_classes);
  const Dataset val = ingest(cfg.val_path, cfg.train.num_classes);
  if (val.features() != train.features()) malformed("validation feature count differs from training");
  std::optional<Dataset> test;
  if (!cfg.test_path.empty()) {
    test = ingest(cfg.test_path, cfg.train.num_classes);
    if (test->features() != train.features()) malformed("test feature count differs from training");
  }

  Emulator emu(cfg.context);
  const FitResult fr = fit(emu, train, val, cfg.train);

  json epochs = json::array();
  for (const auto& e : fr.epochs) {
    json je{{"epoch", e.epoch}, {"val_loss", e.val_loss}, {"improved", e.improved}};
    je["train_loss"] = std::isfinite(e.train_loss) ? json(e.train_loss) : json(nullptr);
    epochs.push_back(je);
  }
  json steps = json::array();
  for (const auto& s : fr.step_ledgers) steps.push_back(counts_json(s));
  json vals = json::array();
  for (const auto& s : fr.validation_ledgers) vals.push_back(counts_json(s));
  json trace = json::array();
  for (const auto& t : fr.trace) trace.push_back({{"step", t.step}, {"min", t.min}, {"max", t.max}});

  json acc{{"train", accuracy(fr.weights, train)}, {"val", accuracy(fr.weights, val)}};
  acc["test"] = test ? json(accuracy(fr.weights, *test)) : json(nullptr);

  RunReport rep;
  rep.weights = fr.weights;
  rep.json = json{
      {"schema_version", kReportSchemaVersion},
      {"config", to_json(cfg)},
      {"epochs", epochs},
      {"best_epoch", fr.best_epoch},
      {"epochs_run", fr.epochs_run},
      {"stopped_early", fr.stopped_early},
      {"accuracy", acc},
      {"ledger",
       {{"total", counts_json(fr.total)},
        {"setup", counts_json(fr.setup_ledger)},
        {"steps", steps},
        {"validation", vals}}},
      {"estimated_ms", fr.estimated_ms},
      {"softmax_input_trace", trace},
      {"audit",
       {{"server_private_decodes", fr.server_private_decodes},
        {"server_decodes", emu.audit().count(Role::kServer)},
        {"client_decodes", emu.audit().count(Role::kClient)},
        {"diagnostic_decodes", emu.audit().count(Role::kDiagnostics)}}},
      {"channel_bytes", {{"to_server", fr.bytes_to_server}, {"to_client", fr.bytes_to_client}}},
  };

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) io_error("cannot create " + cfg.output_dir + ": " + ec.message());
  {
    std::ofstream out(fs::path(cfg.output_dir) / "report.json");
    if (!out) io_error("cannot write report.json");
    out << rep.json.dump(2) << "\n";
  }
  write_weights_csv(fr.weights, (fs::path(cfg.output_dir) / "weights.csv").string());
  return rep;
}

// ---- benchmarks -------------------------------------------------------------------------

std::vector<MatmulShape> parse_shapes(const std::string& spec) {
  std::vector<MatmulShape> out;
  for (const auto& item : split(spec, ';')) {
    if (trim(item).empty()) continue;
    const auto parts = split(item, ',');
    if (parts.size() != 3) bad_arg("shape '" + item + "' is not a,b,c");
    MatmulShape s;
    s.a = static_cast<std::size_t>(parse_long(parts[0], "shape a"));
    s.b = static_cast<std::size_t>(parse_long(parts[1], "shape b"));
    s.c = static_cast<std::size_t>(parse_long(parts[2], "shape c"));
    if (s.a == 0 || s.b == 0 || s.c == 0) bad_arg("shape dimensions must be positive");
    out.push_back(s);
  }
  if (out.empty()) bad_arg("no shapes given");
  return out;
}

std::vector<MatmulAlgorithm> parse_algorithms(const std::string& spec) {
  if (trim(spec) == "all") return all_algorithms();
  std::vector<MatmulAlgorithm> out;
  for (const auto& item : split(spec, ',')) {
    const auto alg = parse_algorithm(trim(item));
    if (!alg) bad_arg("unknown algorithm '" + item + "'");
    out.push_back(*alg);
  }
  return out;
}

json cmd_bench_matmul(const std::vector<MatmulShape>& shapes, const std::vector<MatmulAlgorithm>& algs,
                      std::size_t slots, std::size_t s0, std::string& table) {
  json rows = json::array();
  std::ostringstream os;
  os << std::left << std::setw(18) << "shape" << std::setw(14) << "algorithm" << std::right
     << std::setw(8) << "CMult" << std::setw(8) << "Mult" << std::setw(8) << "Rot" << std::setw(14)
     << "est_ms" << std::setw(12) << "rel_err" << "\n";
  std::uint64_t seed = 1;
  for (const auto& s : shapes) {
    for (auto alg : algs) {
      const MatmulCaseResult r = run_matmul_case(s, alg, slots, s0, seed++);
      const OpEstimate& shown = r.executed ? *r.executed : r.formula;
      std::ostringstream shape;
      shape << "(" << s.a << "," << s.b << "," << s.c << ")";
      os << std::left << std::setw(18) << shape.str() << std::setw(14) << algorithm_name(alg)
         << std::right << std::setw(8) << shown.cmult << std::setw(8) << shown.mult << std::setw(8)
         << shown.rot << std::setw(14) << std::fixed << std::setprecision(3) << r.estimated_ms;
      if (r.executed) {
        os << std::setw(12) << std::scientific << std::setprecision(2) << r.oracle_error;
      } else {
        os << std::setw(12) << "estimate";
      }
      os << std::defaultfloat << "\n";
      json row{{"a", s.a},
               {"b", s.b},
               {"c", s.c},
               {"algorithm", algorithm_name(alg)},
               {"s0", r.s0},
               {"s1", r.s1},
               {"cmult", shown.cmult},
               {"mult", shown.mult},
               {"rot", shown.rot},
               {"formula", {{"cmult", r.formula.cmult}, {"mult", r.formula.mult}, {"rot", r.formula.rot}}},
               {"executed", r.executed.has_value()},
               {"estimated_ms", r.estimated_ms}};
      row["oracle_error"] = r.executed ? json(r.oracle_error) : json(nullptr);
      if (r.executed) {
        row["ledger"] = counts_json(r.ledger);
        row["levels_consumed"] = r.levels_consumed;
      }
      rows.push_back(row);
    }
  }
  table = os.str();
  return json{{"schema_version", kReportSchemaVersion}, {"slots", slots}, {"results", rows}};
}

json cmd_bench_softmax(const SoftmaxBenchOptions& opt, std::string& table) {
  if (opt.samples < 100000) bad_arg("bench-softmax needs at least 100000 samples per range");
  const auto cells = bench_softmax(opt);
  json rows = json::array();
  std::ostringstream os;
  os << std::left << std::setw(6) << "c" << std::setw(8) << "R";
  for (const char* v : {"norm", "extn", "prec"}) os << std::setw(22) << (std::string(v) + " max/avg");
  os << "\n";
  auto find = [&](std::size_t c, double r, const std::string& v) -> const SoftmaxCell* {
    for (const auto& cell : cells) {
      if (cell.classes == c && cell.range == r && cell.variant == v) return &cell;
    }
    return nullptr;
  };
  for (std::size_t c : opt.classes) {
    for (double r : softmax_ranges(opt.max_range)) {
      os << std::left << std::setw(6) << c << std::setw(8) << r;
      for (const char* v : {"norm", "extn", "prec"}) {
        const SoftmaxCell* cell = find(c, r, v);
        std::ostringstream val;
        if (cell) {
          val << std::fixed << std::setprecision(4) << cell->max_error << " / " << cell->avg_error;
          if (cell->max_error < 1e-3) {
            val.str("");
            val << std::scientific << std::setprecision(1) << cell->max_error << " / " << cell->avg_error;
          }
        } else {
          val << "-";
        }
        os << std::setw(22) << val.str();
      }
      os << "\n";
    }
  }
  for (const auto& cell : cells) {
    rows.push_back({{"classes", cell.classes},
                    {"range", cell.range},
                    {"variant", cell.variant},
                    {"samples", cell.samples},
                    {"max_error", cell.max_error},
                    {"avg_error", cell.avg_error},
                    {"max_amax_gap", cell.max_amax_gap},
                    {"min_amax_gap", cell.min_amax_gap},
                    {"max_stage_error", cell.max_stage_error}});
  }
  table = os.str();
  return json{{"schema_version", kReportSchemaVersion},
              {"samples_per_range", opt.samples},
              {"seed", opt.seed},
              {"softmax", softmax_config_json(opt.base)},
              {"cells", rows}};
}

std::vector<std::size_t> cmd_gen_data(const GenDataOptions& opt) {
  if (opt.per_class == 0) bad_arg("per_class must be positive");
  if (opt.val_fraction < 0 || opt.test_fraction < 0 || opt.val_fraction + opt.test_fraction >= 1.0) {
    bad_arg("split fractions must be non-negative and sum below 1");
  }
  const std::size_t total = opt.classes * opt.per_class;
  const Dataset all = gaussian_mixture(opt.classes, opt.features, total, opt.seed, opt.separation);
  const auto n_val = static_cast<std::size_t>(std::llround(opt.val_fraction * static_cast<double>(total)));
  const auto n_test = static_cast<std::size_t>(std::llround(opt.test_fraction * static_cast<double>(total)));
  const std::size_t n_train = total - n_val - n_test;
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) io_error("cannot create " + opt.out_dir);
  export_csv(all.slice(0, n_train), (fs::path(opt.out_dir) / "train.csv").string());
  export_csv(all.slice(n_train, n_train + n_val), (fs::path(opt.out_dir) / "val.csv").string());
  export_csv(all.slice(n_train + n_val, total), (fs::path(opt.out_dir) / "test.csv").string());
  return {n_train, n_val, n_test};
}

}  // namespace heml
