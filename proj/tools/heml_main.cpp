// SPDX-License-Identifier: Apache-2.0
// heml: encrypted softmax-regression training and benchmarks on the CKKS emulator.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "heml/cli.hpp"
#include "heml/error.hpp"

namespace {

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw heml::Error(heml::Module::kCli, heml::ErrorCode::kIo, "cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heml: encrypted transfer-learning head training on a CKKS emulator"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "train a softmax classifier on encrypted features");
  train->add_option("--config", config_path, "run config JSON")->required();

  std::string shapes = "128,128,4";
  std::string algs = "all";
  std::size_t slots = 32768;
  std::size_t s0 = 0;
  std::string mm_json;
  auto* mm = app.add_subcommand("bench-matmul", "count and time encrypted matrix products");
  mm->add_option("--shapes", shapes, "a,b,c;a,b,c;...");
  mm->add_option("--algs", algs, "comma list or 'all'");
  mm->add_option("--slots", slots, "slots per block")->check(CLI::PositiveNumber);
  mm->add_option("--s0", s0, "block rows (0 = pick from a)");
  mm->add_option("--json", mm_json, "write results JSON here");

  heml::SoftmaxBenchOptions sm_opt;
  std::string sm_json;
  auto* sm = app.add_subcommand("bench-softmax", "Monte Carlo error of the approximate softmax");
  sm->add_option("--classes", sm_opt.classes, "class counts")->delimiter(',');
  sm->add_option("--samples", sm_opt.samples, "samples per range (>= 100000)");
  sm->add_option("--range", sm_opt.max_range, "largest input range");
  sm->add_option("--seed", sm_opt.seed, "RNG seed");
  sm->add_option("--json", sm_json, "write results JSON here");

  heml::GenDataOptions gd;
  std::size_t per_class = 0;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic Gaussian-mixture dataset");
  gen->add_option("--classes", gd.classes, "number of classes")->check(CLI::PositiveNumber);
  gen->add_option("--features", gd.features, "feature dimension")->check(CLI::PositiveNumber);
  gen->add_option("--per-class", per_class, "samples per class");
  gen->add_option("--separation", gd.separation, "std-dev of the cluster means");
  gen->add_option("--seed", gd.seed, "RNG seed");
  gen->add_option("--out", gd.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) {
      const auto cfg = heml::load_run_config(config_path);
      const auto rep = heml::cmd_train(cfg);
      const auto& acc = rep.json.at("accuracy");
      std::cout << "epochs run: " << rep.json.at("epochs_run") << ", best epoch "
                << rep.json.at("best_epoch") << "\n"
                << "val accuracy: " << acc.at("val") << ", test accuracy: " << acc.at("test") << "\n"
                << "estimated time: " << rep.json.at("estimated_ms") << " ms\n"
                << "report: " << cfg.output_dir << "/report.json\n";
    } else if (*mm) {
      std::string table;
      const auto j = heml::cmd_bench_matmul(heml::parse_shapes(shapes), heml::parse_algorithms(algs),
                                             slots, s0, table);
      std::cout << table;
      if (!mm_json.empty()) write_json(j, mm_json);
    } else if (*sm) {
      std::string table;
      const auto j = heml::cmd_bench_softmax(sm_opt, table);
      std::cout << table;
      if (!sm_json.empty()) write_json(j, sm_json);
    } else if (*gen) {
      if (per_class != 0) gd.per_class = per_class;
      const auto sizes = heml::cmd_gen_data(gd);
      std::cout << "train " << sizes[0] << ", val " << sizes[1] << ", test " << sizes[2] << " -> "
                << gd.out_dir << "\n";
    }
  } catch (const heml::Error& e) {
    std::cerr << "error " << e.tag() << ": " << e.what() << "\n";
    return heml::exit_status(e.module(), e.code());
  } catch (const std::exception& e) {
    std::cerr << "error E-CLI-INTERNAL: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
