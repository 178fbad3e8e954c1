#include "vdn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vdn/error.hpp"
#include "vdn/stats.hpp"

namespace vdn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double max_napl_of(std::span<const SweepRecord> records) {
  double m = 0.0;
  for (const auto& r : records)
    if (!r.histogram.mass.empty()) m = std::max(m, static_cast<double>(r.histogram.mass.size() - 1));
  return m;
}

}  // namespace

std::vector<GapBin> binned_gaps(std::span<const SweepRecord> records, double upper, std::size_t bins) {
  std::vector<GapBin> out(bins);
  if (bins == 0 || !(upper > 0.0)) return out;
  const double width = upper / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = width * static_cast<double>(b);
    out[b].hi = width * static_cast<double>(b + 1);
  }
  for (const auto& r : records) {
    if (!r.ok() || r.napl < 0.0 || r.napl > upper) continue;
    auto b = static_cast<std::size_t>(std::floor(r.napl / width));
    if (b == bins) b = bins - 1;  // napl == upper closes the last bin
    (r.granularity == Granularity::channel ? out[b].channel : out[b].layer).push_back(r.test_acc);
  }
  for (auto& bin : out) {
    bin.channel_mean = stats::mean(bin.channel);
    bin.channel_std = stats::stddev(bin.channel);
    bin.layer_mean = stats::mean(bin.layer);
    bin.layer_std = stats::stddev(bin.layer);
    bin.gap = bin.channel_mean - bin.layer_mean;
    bin.pooled_std = stats::pooled_stddev(bin.channel, bin.layer);
  }
  return out;
}

std::vector<SweepRecord> sorted_records(std::vector<SweepRecord> records) {
  std::erase_if(records, [](const SweepRecord& r) { return !r.ok(); });
  std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
    const auto ga = to_string(a.granularity), gb = to_string(b.granularity);
    if (ga != gb) return ga < gb;
    if (a.omega != b.omega) return a.omega < b.omega;
    return a.seed < b.seed;
  });
  return records;
}

std::string curves_csv(std::span<const SweepRecord> records) {
  std::ostringstream out;
  out << "granularity,omega,seed,napl,avg_slope,prop_disabled,train_acc,test_acc\n";
  for (const auto& r : records)
    out << to_string(r.granularity) << ',' << num(r.omega) << ',' << r.seed << ',' << num(r.napl) << ','
        << num(r.avg_slope) << ',' << num(r.prop_disabled) << ',' << num(r.train_acc) << ','
        << num(r.test_acc) << '\n';
  return out.str();
}

std::vector<SweepRecord> read_records(const fs::path& dir, std::vector<std::string>& warnings) {
  std::vector<SweepRecord> records;
  const fs::path rdir = dir / "records";
  if (!fs::is_directory(rdir)) return records;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(rdir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      std::ifstream in(f);
      records.push_back(record_from_json(json::parse(in)));
    } catch (const std::exception& e) {
      warnings.push_back("skipping " + f.filename().string() + ": " + e.what());
    }
  }
  return records;
}

ReportSummary write_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("report: '" + dir.string() + "' is not a directory");
  ReportSummary summary;
  auto all = read_records(dir, summary.warnings);
  for (const auto& r : all) ++(r.ok() ? summary.records : summary.failed);
  const auto records = sorted_records(std::move(all));

  std::ofstream(dir / "curves.csv") << curves_csv(records);

  // Aggregate across seeds.
  std::map<std::pair<std::string, double>, std::vector<const SweepRecord*>> groups;
  for (const auto& r : records) groups[{std::string(to_string(r.granularity)), r.omega}].push_back(&r);
  std::ostringstream agg;
  agg << "granularity,omega,runs,napl_mean,napl_std,avg_slope_mean,prop_disabled_mean,"
         "train_acc_mean,train_acc_std,test_acc_mean,test_acc_std\n";
  for (const auto& [key, group] : groups) {
    std::vector<double> napl, slope, disabled, train, test;
    for (const auto* r : group) {
      napl.push_back(r->napl);
      slope.push_back(r->avg_slope);
      disabled.push_back(r->prop_disabled);
      train.push_back(r->train_acc);
      test.push_back(r->test_acc);
    }
    agg << key.first << ',' << num(key.second) << ',' << group.size() << ',' << num(stats::mean(napl)) << ','
        << num(stats::stddev(napl)) << ',' << num(stats::mean(slope)) << ',' << num(stats::mean(disabled))
        << ',' << num(stats::mean(train)) << ',' << num(stats::stddev(train)) << ','
        << num(stats::mean(test)) << ',' << num(stats::stddev(test)) << '\n';
  }
  std::ofstream(dir / "aggregate.csv") << agg.str();

  json hist = json::array();
  for (const auto& r : records) {
    json h = to_json(r.histogram);
    h["granularity"] = to_string(r.granularity);
    h["omega"] = r.omega;
    h["seed"] = r.seed;
    hist.push_back(h);
  }
  std::ofstream(dir / "histograms.json") << hist.dump(2) << "\n";

  const double max_napl = max_napl_of(records);
  json bins = json::array();
  for (const auto& b : binned_gaps(records, max_napl, 10))
    bins.push_back({{"napl_lo", b.lo},
                    {"napl_hi", b.hi},
                    {"channel", {{"n", b.channel.size()}, {"mean", b.channel_mean}, {"std", b.channel_std}}},
                    {"layer", {{"n", b.layer.size()}, {"mean", b.layer_mean}, {"std", b.layer_std}}},
                    {"gap", b.populated() ? json(b.gap) : json(nullptr)},
                    {"pooled_std", b.pooled_std}});
  json s = {{"records", records.size()},
            {"failed", summary.failed},
            {"max_napl", max_napl},
            {"bins", bins},
            {"warnings", summary.warnings}};
  std::ofstream(dir / "summary.json") << s.dump(2) << "\n";
  return summary;
}

}  // namespace vdn
