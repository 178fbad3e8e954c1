// Command-line front end. Exit status: 0 success, 1 usage error, 2 failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "vdn/checkpoint.hpp"
#include "vdn/config.hpp"
#include "vdn/error.hpp"
#include "vdn/experiment.hpp"
#include "vdn/pathmetrics.hpp"
#include "vdn/reparam.hpp"
#include "vdn/report.hpp"
#include "vdn/training.hpp"

namespace {

using nlohmann::json;

vdn::ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? vdn::ExperimentConfig::reference() : vdn::ExperimentConfig::load(path);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

int gen_data(const std::string& config, const std::string& out) {
  const auto data = vdn::make_dataset(load_config(config).dataset);
  std::vector<char> split(data.samples(), 0);
  for (auto i : data.train) split[i] = 1;
  std::ofstream f(out);
  if (!f) throw vdn::Error("cannot write " + out);
  for (std::size_t j = 0; j < data.feature_count(); ++j) f << 'x' << j << ',';
  f << "label,split\n";
  char buf[32];
  for (std::size_t i = 0; i < data.samples(); ++i) {
    for (std::size_t j = 0; j < data.feature_count(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      f << buf << ',';
    }
    f << data.labels[i] << ',' << (split[i] ? "train" : "test") << '\n';
  }
  std::cerr << data.provenance << '\n';
  return 0;
}

int train(const std::string& config, std::uint64_t seed, const std::string& out) {
  const auto cfg = load_config(config);
  const auto data = vdn::make_dataset(cfg.dataset);
  const auto ck = vdn::base_train(cfg.network_spec(), data, cfg.base, seed);
  vdn::save(ck.network, ck.meta, out);
  std::printf("train_acc %.4f test_acc %.4f\n", ck.meta.train_accuracy, ck.meta.test_accuracy);
  return 0;
}

int sweep(const std::string& config, const std::vector<double>& omegas,
          const std::vector<std::string>& granularities, const std::vector<std::uint64_t>& seeds,
          const std::string& out, std::size_t jobs) {
  auto cfg = load_config(config);
  if (!omegas.empty()) cfg.omega_grid = omegas;
  if (!granularities.empty()) {
    cfg.granularities.clear();
    for (const auto& g : granularities) cfg.granularities.push_back(vdn::parse_granularity(g));
  }
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.output_dir = out;
  const auto result = vdn::run_experiment(cfg, jobs, log_line);
  std::size_t failed = 0;
  for (const auto& r : result.records) failed += r.ok() ? 0 : 1;
  std::printf("%zu runs, %zu failed, results in %s\n", result.records.size(), failed,
              result.dir.string().c_str());
  return failed == 0 ? 0 : 2;
}

int analyze(const std::string& path) {
  const auto ck = vdn::load(path);
  const auto& net = ck.network;
  json j = {{"napl", vdn::napl(net)},
            {"avg_slope", vdn::average_slope(net)},
            {"prop_disabled", vdn::proportion_disabled(net)},
            {"mixed_layers", vdn::mixed_layer_count(net)},
            {"histogram", vdn::to_json(vdn::path_length_distribution(vdn::profile_of(net)))},
            {"omega", ck.meta.omega},
            {"seed", ck.meta.seed}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int reparam_verify(const std::string& activation, double c, double eps, std::size_t width,
                   std::size_t samples, double radius, std::uint64_t seed) {
  namespace rp = vdn::reparam;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-radius, radius);
  const auto n = static_cast<Eigen::Index>(width);
  rp::ResidualBlock block{rp::Matrix(n, n), rp::Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    block.bias(i) = normal(rng);
    for (Eigen::Index k = 0; k < n; ++k) block.weight(i, k) = normal(rng) / std::sqrt(double(n));
  }
  std::vector<rp::Vector> xs(samples, rp::Vector(n));
  for (auto& x : xs)
    for (Eigen::Index i = 0; i < n; ++i) x(i) = unif(rng);

  const auto act = rp::ActivationDescriptor::by_name(activation, c);
  const bool relu = act.name == "relu";
  const auto ff = relu ? rp::reparam_relu(block, -radius) : rp::reparam_local_linear(block, act, eps);
  const auto dev = rp::verify_reparam(block, ff, act, xs);
  json j = {{"construction", relu ? "relu-shift" : "local-linear"},
            {"activation", act.name},
            {"c", act.c},
            {"epsilon", relu ? json(nullptr) : json(eps)},
            {"samples", samples},
            {"radius", radius},
            {"max_deviation", dev.max_abs},
            {"witness", std::vector<double>(dev.witness.data(), dev.witness.data() + dev.witness.size())}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int report(const std::string& dir) {
  const auto s = vdn::write_report(dir);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("%zu records (%zu failed)\n", s.records, s.failed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-depth linearization of ReLU networks"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, activation = "tanh";
  std::uint64_t seed = 0;
  std::size_t jobs = 1, width = 16, samples = 1000;
  std::vector<double> omegas;
  std::vector<std::string> granularities;
  std::vector<std::uint64_t> seeds;
  double c = 0.0, eps = 1e-4, radius = 1.0;

  auto* gen = app.add_subcommand("gen-data", "Write the configured dataset as CSV");
  gen->add_option("--config", config, "Experiment config (default: reference)");
  gen->add_option("--out", out, "Output CSV")->required();

  auto* tr = app.add_subcommand("train", "Train a plain ReLU network and save a checkpoint");
  tr->add_option("--config", config, "Experiment config (default: reference)");
  tr->add_option("--seed", seed, "Initialization seed");
  tr->add_option("--out", out, "Checkpoint path")->required();

  auto* sw = app.add_subcommand("sweep", "Run the omega sweep experiment");
  sw->add_option("--config", config, "Experiment config (default: reference)");
  sw->add_option("--omega", omegas, "Explicit omega values (skips calibration)");
  sw->add_option("--granularity", granularities, "channel and/or layer")
      ->check(CLI::IsMember({"channel", "layer"}));
  sw->add_option("--seed", seeds, "Seeds to run");
  sw->add_option("--out", out, "Output directory");
  sw->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* an = app.add_subcommand("analyze", "Path metrics of a checkpoint as JSON");
  an->add_option("checkpoint", checkpoint, "Checkpoint file")->required();

  auto* rv = app.add_subcommand("reparam-verify", "Check a residual-to-feedforward construction");
  rv->add_option("--activation", activation, "tanh, sigmoid, softplus or relu")
      ->check(CLI::IsMember({"tanh", "sigmoid", "softplus", "relu"}));
  rv->add_option("--c", c, "Expansion point");
  rv->add_option("--epsilon", eps, "Shrink factor")->check(CLI::PositiveNumber);
  rv->add_option("--width", width, "Block width")->check(CLI::PositiveNumber);
  rv->add_option("--samples", samples, "Number of test inputs")->check(CLI::PositiveNumber);
  rv->add_option("--radius", radius, "Inputs drawn uniformly from [-radius, radius]")
      ->check(CLI::PositiveNumber);
  rv->add_option("--seed", seed, "Random seed");

  auto* rep = app.add_subcommand("report", "Rebuild the report files of a result directory");
  rep->add_option("dir", out, "Result directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return gen_data(config, out);
    if (*tr) return train(config, seed, out);
    if (*sw) return sweep(config, omegas, granularities, seeds, out, jobs);
    if (*an) return analyze(checkpoint);
    if (*rv) return reparam_verify(activation, c, eps, width, samples, radius, seed);
    if (*rep) return report(out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
