#include "vdn/linearize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "vdn/checkpoint.hpp"
#include "vdn/error.hpp"
#include "vdn/parallel.hpp"

namespace vdn {

void PostTrainConfig::validate() const {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw SpecError("post-training: omega must be >= 0");
  if (epochs < 1) throw SpecError("post-training: epochs must be >= 1");
  if (!(freeze_threshold > 0.0 && freeze_threshold < 1.0))
    throw SpecError("post-training: freeze threshold must lie in (0, 1)");
  if (batch_size == 0) throw SpecError("post-training: batch size must be positive");
}

std::size_t freeze_pass(Network& net, double threshold) {
  std::size_t newly = 0;
  for (auto& layer : net.layers()) {
    auto& s = layer.slopes;
    if (s.empty()) continue;
    if (s.frozen.size() != s.tensor.size()) s.frozen.resize(s.tensor.size(), 0);
    for (std::size_t i = 0; i < s.tensor.size(); ++i) {
      if (s.frozen[i] || !(std::abs(s.tensor[i] - 1.0) < threshold)) continue;
      s.tensor[i] = 1.0;
      s.frozen[i] = 1;
      ++newly;
    }
  }
  return newly;
}

PostTrainResult post_train(Network net, const Dataset& data, const PostTrainConfig& cfg) {
  cfg.validate();
  if (!net.has_prelu()) throw SpecError("post_train: network has no PReLU units; apply relu_to_prelu first");
  TrainOptions options;
  options.optim = cfg.optim;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.seed = cfg.seed;
  options.omega = cfg.omega;
  const double threshold = cfg.freeze_threshold;
  options.after_step = [threshold](Network& n) { freeze_pass(n, threshold); };
  auto trace = train(net, data, options);
  return {std::move(net), std::move(trace)};
}

PostTrainResult post_post_train(Network net, const Dataset& data, PostTrainConfig cfg) {
  bool layerwise = false;
  for (const auto& l : net.spec().layers) layerwise = layerwise || l.activation == Activation::prelu_layer;
  if (!layerwise) throw SpecError("post_post_train: network has no layer-wise PReLU units");
  cfg.omega = 0.0;
  return post_train(replace_nonlinear_layerwise_with_channelwise(std::move(net)), data, cfg);
}

nlohmann::json to_json(const SweepRecord& r) {
  // Doubles are stored twice: readable and as exact bit patterns.
  auto exact = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  return {{"granularity", to_string(r.granularity)},
          {"omega", r.omega},
          {"omega_bits", exact(r.omega)},
          {"seed", r.seed},
          {"napl", r.napl},
          {"avg_slope", r.avg_slope},
          {"prop_disabled", r.prop_disabled},
          {"train_acc", r.train_acc},
          {"test_acc", r.test_acc},
          {"exact",
           {exact(r.napl), exact(r.avg_slope), exact(r.prop_disabled), exact(r.train_acc),
            exact(r.test_acc)}},
          {"mixed_layers", r.mixed_layers},
          {"histogram", to_json(r.histogram)},
          {"checkpoint", r.checkpoint},
          {"error", r.error}};
}

SweepRecord record_from_json(const nlohmann::json& j) {
  auto exact = [](const nlohmann::json& v) { return std::bit_cast<double>(v.get<std::uint64_t>()); };
  SweepRecord r;
  r.granularity = parse_granularity(j.at("granularity").get<std::string>());
  r.omega = exact(j.at("omega_bits"));
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto& e = j.at("exact");
  r.napl = exact(e.at(0));
  r.avg_slope = exact(e.at(1));
  r.prop_disabled = exact(e.at(2));
  r.train_acc = exact(e.at(3));
  r.test_acc = exact(e.at(4));
  r.mixed_layers = j.at("mixed_layers").get<std::size_t>();
  r.histogram = distribution_from_json(j.at("histogram"));
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.error = j.at("error").get<std::string>();
  return r;
}

SweepRecord measure(const Network& net, const Dataset& data, Granularity g, double omega,
                    std::uint64_t seed) {
  SweepRecord r;
  r.granularity = g;
  r.omega = omega;
  r.seed = seed;
  const auto profile = profile_of(net);
  r.napl = napl(profile);
  r.histogram = path_length_distribution(profile);
  r.avg_slope = average_slope(net);
  r.prop_disabled = proportion_disabled(net);
  r.mixed_layers = mixed_layer_count(net);
  r.train_acc = accuracy(net, data, data.train);
  r.test_acc = accuracy(net, data, data.test);
  return r;
}

std::vector<SweepRecord> omega_sweep(const Network& base, const Dataset& data,
                                     std::span<const double> omegas, const PostTrainConfig& cfg,
                                     Granularity granularity, const SweepOptions& options) {
  std::vector<SweepRecord> records(omegas.size());
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
  parallel_for(omegas.size(), options.jobs, [&](std::size_t i) {
    PostTrainConfig run = cfg;
    run.omega = omegas[i];
    try {
      auto result = post_train(relu_to_prelu(base, granularity), data, run);
      records[i] = measure(result.network, data, granularity, run.omega, run.seed);
      if (!options.checkpoint_dir.empty()) {
        char name[96];
        std::snprintf(name, sizeof name, "%s_w%02zu_s%llu.ckpt",
                      std::string(to_string(granularity)).c_str(), i + options.index_offset,
                      static_cast<unsigned long long>(run.seed));
        const auto path = options.checkpoint_dir / name;
        CheckpointMeta meta;
        meta.epoch = run.epochs;
        meta.omega = run.omega;
        meta.seed = run.seed;
        meta.train_accuracy = records[i].train_acc;
        meta.test_accuracy = records[i].test_acc;
        meta.extra["granularity"] = std::string(to_string(granularity));
        save(result.network, meta, path);
        records[i].checkpoint = path.string();
      }
    } catch (const std::exception& e) {
      records[i] = SweepRecord{};
      records[i].granularity = granularity;
      records[i].omega = run.omega;
      records[i].seed = run.seed;
      records[i].error = e.what();
    }
  });
  return records;
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi >= lo)) throw SpecError("log_grid: need 0 < lo <= hi");
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> grid(points);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

OmegaRange calibrate_omega_range(const Network& base, const Dataset& data,
                                 const PostTrainConfig& cfg,
                                 std::span<const Granularity> granularities,
                                 const CalibrationOptions& options) {
  if (granularities.empty()) throw SpecError("calibrate_omega_range: no granularities given");
  OmegaRange range;
  std::map<double, std::vector<double>> cache;
  const double max_napl =
      static_cast<double>(profile_of(relu_to_prelu(base, Granularity::layer)).max_length());

  // NAPL of every granularity at omega.
  auto probe = [&](double omega) -> const std::vector<double>& {
    auto it = cache.find(omega);
    if (it != cache.end()) return it->second;
    std::vector<double> values(granularities.size());
    parallel_for(granularities.size(), options.jobs, [&](std::size_t g) {
      PostTrainConfig run = cfg;
      run.omega = omega;
      values[g] = napl(post_train(relu_to_prelu(base, granularities[g]), data, run).network);
    });
    for (std::size_t g = 0; g < granularities.size(); ++g)
      range.probes.push_back({omega, granularities[g], values[g]});
    return cache.emplace(omega, std::move(values)).first->second;
  };
  auto high_ok = [&](double omega) {
    const auto& v = probe(omega);
    return *std::max_element(v.begin(), v.end()) <= options.high_napl;
  };
  auto low_ok = [&](double omega) {
    const auto& v = probe(omega);
    return *std::min_element(v.begin(), v.end()) >= options.low_fraction * max_napl;
  };
  auto fail = [](const std::string& what) {
    throw Error("calibrate_omega_range: could not bracket the " + what + " end");
  };

  // Top end: smallest omega (within a factor) that linearizes enough.
  double hi = options.start;
  int steps = 0;
  if (high_ok(hi)) {
    while (high_ok(hi / options.factor))
      if (hi /= options.factor; ++steps > options.max_expansions) fail("upper");
  } else {
    while (!high_ok(hi))
      if (hi *= options.factor; ++steps > options.max_expansions) fail("upper");
  }
  // Geometric midpoints, so both endpoints are always probed values.
  double lo_hi = hi / options.factor, up_hi = hi;
  for (int k = 0; k < options.bisection_steps; ++k) {
    const double mid = std::sqrt(lo_hi * up_hi);
    (high_ok(mid) ? up_hi : lo_hi) = mid;
  }
  range.high = up_hi;

  // Bottom end: largest omega that leaves the network nearly fully nonlinear.
  double lo = std::min(options.start, range.high);
  steps = 0;
  if (low_ok(lo)) {
    while (low_ok(lo * options.factor) && lo * options.factor < range.high)
      if (lo *= options.factor; ++steps > options.max_expansions) fail("lower");
  } else {
    while (!low_ok(lo))
      if (lo /= options.factor; ++steps > options.max_expansions) fail("lower");
  }
  double lo_lo = lo, up_lo = std::min(lo * options.factor, range.high);
  for (int k = 0; k < options.bisection_steps; ++k) {
    const double mid = std::sqrt(lo_lo * up_lo);
    (low_ok(mid) ? lo_lo : up_lo) = mid;
  }
  range.low = lo_lo;
  return range;
}

}  // namespace vdn
