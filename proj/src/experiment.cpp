#include "vdn/experiment.hpp"

#include <fstream>

#include <json.hpp>

#include "vdn/error.hpp"
#include "vdn/idx.hpp"
#include "vdn/parallel.hpp"
#include "vdn/report.hpp"
#include "vdn/training.hpp"

namespace vdn {

namespace fs = std::filesystem;

Dataset make_dataset(const DatasetConfig& cfg) {
  if (cfg.source == "idx") return load_idx(cfg.idx_images, cfg.idx_labels);
  if (cfg.source == "synthetic") return generate_synthetic(cfg.synthetic);
  throw SpecError("unknown dataset source '" + cfg.source + "'");
}

Checkpoint base_train(const NetworkSpec& spec, const Dataset& data, const BaseTrainConfig& cfg,
                      std::uint64_t seed) {
  Network net = build(spec, seed);
  TrainOptions options;
  options.optim = cfg.optim;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.seed = seed;
  train(net, data, options);
  CheckpointMeta meta;
  meta.epoch = cfg.epochs;
  meta.seed = seed;
  meta.train_accuracy = accuracy(net, data, data.train);
  meta.test_accuracy = accuracy(net, data, data.test);
  return {std::move(net), std::move(meta)};
}

std::string base_fingerprint(const ExperimentConfig& cfg, std::uint64_t seed) {
  // Everything that influences base training, in config text form.
  ExperimentConfig c = cfg;
  c.post = PostTrainConfig{};
  c.omega_grid.clear();
  c.omega_points = 2;
  c.calibration_start = 1.0;
  c.calibration_bisections = 0;
  c.granularities = {Granularity::channel};
  c.seeds = {seed};
  c.output_dir.clear();
  return c.to_text();
}

std::vector<Network> base_networks(const ExperimentConfig& cfg, const Dataset& data,
                                   const fs::path& dir, std::size_t jobs, const Logger& log) {
  fs::create_directories(dir);
  const NetworkSpec spec = cfg.network_spec();
  std::vector<std::optional<Network>> nets(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
    const auto seed = cfg.seeds[i];
    const fs::path path = dir / ("base_s" + std::to_string(seed) + ".ckpt");
    const std::string fp = base_fingerprint(cfg, seed);
    if (fs::exists(path)) {
      try {
        auto ck = load(path);
        if (ck.meta.extra["fingerprint"] == fp) {
          nets[i].emplace(std::move(ck.network));
          return;
        }
      } catch (const CheckpointError&) {
      }
    }
    auto ck = base_train(spec, data, cfg.base, seed);
    ck.meta.extra["fingerprint"] = fp;
    save(ck.network, ck.meta, path);
    if (log)
      log("base seed " + std::to_string(seed) + ": train " + std::to_string(ck.meta.train_accuracy) +
          " test " + std::to_string(ck.meta.test_accuracy));
    nets[i].emplace(std::move(ck.network));
  });
  std::vector<Network> out;
  for (auto& n : nets) out.push_back(std::move(*n));
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in, std::size_t jobs, const Logger& log) {
  cfg_in.validate();
  ExperimentConfig cfg = cfg_in;
  ExperimentResult result;
  result.dir = cfg.output_dir;
  fs::create_directories(result.dir / "records");
  fs::create_directories(result.dir / "checkpoints");

  const Dataset data = make_dataset(cfg.dataset);
  auto bases = base_networks(cfg, data, result.dir / "checkpoints", jobs, log);

  if (cfg.omega_grid.empty()) {
    CalibrationOptions copt;
    copt.start = cfg.calibration_start;
    copt.bisection_steps = cfg.calibration_bisections;
    copt.jobs = jobs;
    PostTrainConfig pc = cfg.post;
    pc.seed = cfg.seeds.front();
    const auto range = calibrate_omega_range(bases.front(), data, pc, cfg.granularities, copt);
    cfg.omega_grid = log_grid(range.low, range.high, cfg.omega_points);
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : range.probes)
      probes.push_back({{"omega", p.omega}, {"granularity", to_string(p.granularity)}, {"napl", p.napl}});
    std::ofstream(result.dir / "calibration.json")
        << nlohmann::json{{"low", range.low}, {"high", range.high}, {"probes", probes}}.dump(2) << "\n";
    if (log) log("calibrated omega range [" + std::to_string(range.low) + ", " + std::to_string(range.high) + "]");
  }
  result.omega_grid = cfg.omega_grid;
  cfg.save((result.dir / "config.txt").string());

  struct Unit {
    Granularity g;
    std::size_t omega_index;
    std::size_t seed_index;
  };
  std::vector<Unit> units;
  for (auto g : cfg.granularities)
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
      for (std::size_t w = 0; w < cfg.omega_grid.size(); ++w) units.push_back({g, w, s});

  result.records.resize(units.size());
  parallel_for(units.size(), jobs, [&](std::size_t i) {
    const Unit& u = units[i];
    PostTrainConfig run = cfg.post;
    run.seed = cfg.seeds[u.seed_index];
    const double omega = cfg.omega_grid[u.omega_index];
    SweepOptions sopt;
    sopt.checkpoint_dir = result.dir / "checkpoints";
    sopt.index_offset = u.omega_index;
    auto rec = omega_sweep(bases[u.seed_index], data, std::span(&omega, 1), run, u.g, sopt).front();
    char stem[96];
    std::snprintf(stem, sizeof stem, "%s_w%02zu_s%llu", std::string(to_string(u.g)).c_str(),
                  u.omega_index, static_cast<unsigned long long>(run.seed));
    if (!rec.checkpoint.empty()) rec.checkpoint = fs::relative(rec.checkpoint, result.dir).string();
    std::ofstream(result.dir / "records" / (std::string(stem) + ".json")) << to_json(rec).dump(2) << "\n";
    if (log)
      log(std::string(stem) + ": omega " + std::to_string(omega) + " napl " + std::to_string(rec.napl) +
          " test " + std::to_string(rec.test_acc) + (rec.ok() ? "" : " FAILED: " + rec.error));
    result.records[i] = std::move(rec);
  });

  write_report(result.dir);
  return result;
}

}  // namespace vdn
