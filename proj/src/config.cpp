#include "vdn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vdn/error.hpp"

namespace vdn {

namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return {buf, end};
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += f(items[i]);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::size_t used = 0;
  if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

std::vector<int> to_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(to_int(item));
  return out;
}

}  // namespace

NetworkSpec ExperimentConfig::network_spec() const {
  NetworkSpec spec = NetworkSpec::feedforward(widths, Activation::relu);
  spec.spans = spans;
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  network_spec();
  if (dataset.source != "synthetic" && dataset.source != "idx")
    throw SpecError("dataset.source must be synthetic or idx");
  if (dataset.source == "idx" && (dataset.idx_images.empty() || dataset.idx_labels.empty()))
    throw SpecError("idx datasets need dataset.idx_images and dataset.idx_labels");
  if (base.epochs < 0) throw SpecError("base.epochs must be >= 0");
  if (base.batch_size == 0) throw SpecError("base.batch_size must be positive");
  PostTrainConfig p = post;
  p.omega = 0.0;
  p.validate();
  for (double w : omega_grid)
    if (!(w >= 0.0)) throw SpecError("omega.grid values must be >= 0");
  if (omega_grid.empty() && (omega_points < 2 || !(calibration_start > 0.0)))
    throw SpecError("omega calibration needs omega.points >= 2 and a positive start");
  if (granularities.empty()) throw SpecError("granularities must not be empty");
  if (seeds.empty()) throw SpecError("seeds must not be empty");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  auto put = [&](const std::string& k, const std::string& v) { out << k << " = " << v << "\n"; };
  auto ints = [](const std::vector<int>& v) { return join(v, [](int x) { return std::to_string(x); }); };
  out << "# experiment configuration\n";
  put("dataset.source", dataset.source);
  put("dataset.kind", std::string(to_string(dataset.synthetic.kind)));
  put("dataset.size", std::to_string(dataset.synthetic.size));
  put("dataset.classes", std::to_string(dataset.synthetic.classes));
  put("dataset.features", std::to_string(dataset.synthetic.features));
  put("dataset.noise", fmt_double(dataset.synthetic.noise));
  put("dataset.seed", std::to_string(dataset.synthetic.seed));
  put("dataset.idx_images", dataset.idx_images);
  put("dataset.idx_labels", dataset.idx_labels);
  put("network.widths", join(widths, [](std::size_t w) { return std::to_string(w); }));
  put("network.spans", join(spans, [](const ResidualSpan& s) {
        return std::to_string(s.first) + "-" + std::to_string(s.last);
      }));
  put("base.epochs", std::to_string(base.epochs));
  put("base.lr", fmt_double(base.optim.schedule.base_lr));
  put("base.milestones", ints(base.optim.schedule.milestones));
  put("base.gamma", fmt_double(base.optim.schedule.gamma));
  put("base.momentum", fmt_double(base.optim.momentum));
  put("base.weight_decay", fmt_double(base.optim.weight_decay));
  put("base.clip_norm", fmt_double(base.optim.clip_norm));
  put("base.batch_size", std::to_string(base.batch_size));
  put("post.epochs", std::to_string(post.epochs));
  put("post.lr", fmt_double(post.optim.schedule.base_lr));
  put("post.milestones", ints(post.optim.schedule.milestones));
  put("post.gamma", fmt_double(post.optim.schedule.gamma));
  put("post.momentum", fmt_double(post.optim.momentum));
  put("post.weight_decay", fmt_double(post.optim.weight_decay));
  put("post.clip_norm", fmt_double(post.optim.clip_norm));
  put("post.batch_size", std::to_string(post.batch_size));
  put("post.freeze_threshold", fmt_double(post.freeze_threshold));
  put("omega.grid", join(omega_grid, fmt_double));
  put("omega.points", std::to_string(omega_points));
  put("omega.calibration_start", fmt_double(calibration_start));
  put("omega.calibration_bisections", std::to_string(calibration_bisections));
  put("granularities", join(granularities, [](Granularity g) { return std::string(to_string(g)); }));
  put("seeds", join(seeds, [](std::uint64_t s) { return std::to_string(s); }));
  put("output_dir", output_dir);
  return out.str();
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"dataset.source", [&](const std::string& v) { c.dataset.source = v; }},
      {"dataset.kind", [&](const std::string& v) { c.dataset.synthetic.kind = parse_synthetic_kind(v); }},
      {"dataset.size", [&](const std::string& v) { c.dataset.synthetic.size = to_u64(v); }},
      {"dataset.classes", [&](const std::string& v) { c.dataset.synthetic.classes = to_u64(v); }},
      {"dataset.features", [&](const std::string& v) { c.dataset.synthetic.features = to_u64(v); }},
      {"dataset.noise", [&](const std::string& v) { c.dataset.synthetic.noise = to_double(v); }},
      {"dataset.seed", [&](const std::string& v) { c.dataset.synthetic.seed = to_u64(v); }},
      {"dataset.idx_images", [&](const std::string& v) { c.dataset.idx_images = v; }},
      {"dataset.idx_labels", [&](const std::string& v) { c.dataset.idx_labels = v; }},
      {"network.widths",
       [&](const std::string& v) {
         c.widths.clear();
         for (const auto& w : split_list(v)) c.widths.push_back(to_u64(w));
       }},
      {"network.spans",
       [&](const std::string& v) {
         c.spans.clear();
         for (const auto& s : split_list(v)) {
           const auto dash = s.find('-');
           if (dash == std::string::npos) throw std::invalid_argument(s);
           c.spans.push_back({to_u64(trim(s.substr(0, dash))), to_u64(trim(s.substr(dash + 1)))});
         }
       }},
      {"base.epochs", [&](const std::string& v) { c.base.epochs = to_int(v); }},
      {"base.lr", [&](const std::string& v) { c.base.optim.schedule.base_lr = to_double(v); }},
      {"base.milestones", [&](const std::string& v) { c.base.optim.schedule.milestones = to_ints(v); }},
      {"base.gamma", [&](const std::string& v) { c.base.optim.schedule.gamma = to_double(v); }},
      {"base.momentum", [&](const std::string& v) { c.base.optim.momentum = to_double(v); }},
      {"base.weight_decay", [&](const std::string& v) { c.base.optim.weight_decay = to_double(v); }},
      {"base.clip_norm", [&](const std::string& v) { c.base.optim.clip_norm = to_double(v); }},
      {"base.batch_size", [&](const std::string& v) { c.base.batch_size = to_u64(v); }},
      {"post.epochs", [&](const std::string& v) { c.post.epochs = to_int(v); }},
      {"post.lr", [&](const std::string& v) { c.post.optim.schedule.base_lr = to_double(v); }},
      {"post.milestones", [&](const std::string& v) { c.post.optim.schedule.milestones = to_ints(v); }},
      {"post.gamma", [&](const std::string& v) { c.post.optim.schedule.gamma = to_double(v); }},
      {"post.momentum", [&](const std::string& v) { c.post.optim.momentum = to_double(v); }},
      {"post.weight_decay", [&](const std::string& v) { c.post.optim.weight_decay = to_double(v); }},
      {"post.clip_norm", [&](const std::string& v) { c.post.optim.clip_norm = to_double(v); }},
      {"post.batch_size", [&](const std::string& v) { c.post.batch_size = to_u64(v); }},
      {"post.freeze_threshold", [&](const std::string& v) { c.post.freeze_threshold = to_double(v); }},
      {"omega.grid",
       [&](const std::string& v) {
         c.omega_grid.clear();
         for (const auto& w : split_list(v)) c.omega_grid.push_back(to_double(w));
       }},
      {"omega.points", [&](const std::string& v) { c.omega_points = to_u64(v); }},
      {"omega.calibration_start", [&](const std::string& v) { c.calibration_start = to_double(v); }},
      {"omega.calibration_bisections", [&](const std::string& v) { c.calibration_bisections = to_int(v); }},
      {"granularities",
       [&](const std::string& v) {
         c.granularities.clear();
         for (const auto& g : split_list(v)) c.granularities.push_back(parse_granularity(g));
       }},
      {"seeds",
       [&](const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split_list(v)) c.seeds.push_back(to_u64(s));
       }},
      {"output_dir", [&](const std::string& v) { c.output_dir = v; }},
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SpecError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw SpecError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const SpecError& e) {
      throw SpecError("config line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw SpecError("config line " + std::to_string(lineno) + ": bad value '" + value +
                      "' for " + key);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config '" + path + "'");
  out << to_text();
}

ExperimentConfig ExperimentConfig::reference() {
  ExperimentConfig c;
  c.dataset.synthetic = SyntheticSpec{SyntheticKind::hierarchical_xor, 10000, 4, 8, 0.0, 0};
  return c;
}

}  // namespace vdn
