#include "vdn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "vdn/error.hpp"

namespace vdn {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'V', 'D', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kPreamble = 20;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + i]);
  return v;
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + i]);
  return v;
}

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

json spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers)
    layers.push_back({{"n_in", l.n_in},
                      {"n_out", l.n_out},
                      {"activation", to_string(l.activation)},
                      {"bias", l.bias},
                      {"channel_gain", l.channel_gain}});
  json spans = json::array();
  for (const auto& s : spec.spans) spans.push_back({s.first, s.last});
  return {{"layers", layers}, {"spans", spans}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  for (const auto& l : j.at("layers"))
    spec.layers.push_back({l.at("n_in").get<std::size_t>(), l.at("n_out").get<std::size_t>(),
                           parse_activation(l.at("activation").get<std::string>()),
                           l.at("bias").get<bool>(), l.at("channel_gain").get<bool>()});
  for (const auto& s : j.at("spans"))
    spec.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  return spec;
}

}  // namespace

std::string serialize(const Network& net, const CheckpointMeta& meta) {
  json dir = json::array();
  std::vector<double> payload;
  auto add = [&](const std::string& name, const Parameter& p) {
    if (p.empty()) return;
    json frozen = json::array();
    for (std::size_t i = 0; i < p.frozen.size(); ++i)
      if (p.frozen[i]) frozen.push_back(i);
    dir.push_back({{"name", name},
                   {"shape", p.tensor.shape()},
                   {"offset", payload.size()},
                   {"count", p.tensor.size()},
                   {"frozen", frozen}});
    payload.insert(payload.end(), p.tensor.values().begin(), p.tensor.values().end());
  };
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    add(prefix + "weight", l.weight);
    add(prefix + "bias", l.bias);
    add(prefix + "slopes", l.slopes);
    add(prefix + "gain", l.gain);
  }
  json header = {{"spec", spec_to_json(net.spec())},
                 {"seed", net.seed()},
                 {"meta",
                  {{"epoch", meta.epoch},
                   {"omega_bits", std::bit_cast<std::uint64_t>(meta.omega)},
                   {"omega", meta.omega},
                   {"seed", meta.seed},
                   {"train_accuracy_bits", std::bit_cast<std::uint64_t>(meta.train_accuracy)},
                   {"test_accuracy_bits", std::bit_cast<std::uint64_t>(meta.test_accuracy)},
                   {"extra", meta.extra}}},
                 {"tensors", dir},
                 {"payload_count", payload.size()}};
  const std::string text = header.dump();

  std::string out(kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  for (double v : payload) put_u64(out, std::bit_cast<std::uint64_t>(v));
  put_u64(out, fnv1a(out.data() + kPreamble, out.size() - kPreamble));
  return out;
}

Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < kPreamble + 8)
    throw CheckpointError("checkpoint truncated: " + std::to_string(bytes.size()) +
                          " bytes is shorter than the fixed preamble");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw CheckpointError("checkpoint magic mismatch");
  const auto version = get_u32(bytes, 8);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto header_len = get_u64(bytes, 12);
  if (header_len > bytes.size() - kPreamble - 8)
    throw CheckpointError("checkpoint truncated inside header (needs " + std::to_string(header_len) +
                          " header bytes)");
  json header;
  try {
    header = json::parse(bytes.begin() + kPreamble, bytes.begin() + kPreamble + header_len);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  try {
    const auto count = header.at("payload_count").get<std::size_t>();
    const std::size_t payload_at = kPreamble + header_len;
    const std::size_t expected = payload_at + 8 * count + 8;
    if (bytes.size() != expected)
      throw CheckpointError("checkpoint size " + std::to_string(bytes.size()) +
                            " bytes, expected " + std::to_string(expected));
    const auto stored = get_u64(bytes, expected - 8);
    if (stored != fnv1a(bytes.data() + kPreamble, expected - 8 - kPreamble))
      throw CheckpointError("checkpoint checksum mismatch");

    NetworkSpec spec = spec_from_json(header.at("spec"));
    spec.validate();
    std::vector<Layer> layers(spec.layers.size());
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto dot = name.find('.');
      if (name.rfind("layer", 0) != 0 || dot == std::string::npos)
        throw CheckpointError("checkpoint tensor with bad name '" + name + "'");
      const auto index = std::stoul(name.substr(5, dot - 5));
      if (index >= layers.size()) throw CheckpointError("checkpoint tensor '" + name + "' out of range");
      const auto field = name.substr(dot + 1);
      Parameter* p = field == "weight"   ? &layers[index].weight
                     : field == "bias"   ? &layers[index].bias
                     : field == "slopes" ? &layers[index].slopes
                     : field == "gain"   ? &layers[index].gain
                                         : nullptr;
      if (!p) throw CheckpointError("checkpoint tensor with unknown field '" + name + "'");
      const auto offset = t.at("offset").get<std::size_t>();
      const auto n = t.at("count").get<std::size_t>();
      if (offset + n > count) throw CheckpointError("checkpoint tensor '" + name + "' exceeds payload");
      std::vector<double> values(n);
      for (std::size_t k = 0; k < n; ++k)
        values[k] = std::bit_cast<double>(get_u64(bytes, payload_at + 8 * (offset + k)));
      p->tensor = Tensor(t.at("shape").get<Shape>(), std::move(values));
      if (field == "slopes") {
        p->weight_decay = false;
        p->frozen.assign(n, 0);
      }
      if (field == "gain") p->weight_decay = false;
      for (const auto& f : t.at("frozen")) {
        const auto k = f.get<std::size_t>();
        if (k >= n) throw CheckpointError("checkpoint frozen index out of range in '" + name + "'");
        if (p->frozen.size() != n) p->frozen.assign(n, 0);
        p->frozen[k] = 1;
      }
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const auto a = spec.layers[i].activation;
      if (!is_prelu(a)) continue;
      layers[i].unit_map.resize(spec.layers[i].n_out);
      for (std::size_t c = 0; c < spec.layers[i].n_out; ++c)
        layers[i].unit_map[c] = a == Activation::prelu_channel ? c : 0;
    }
    const auto& m = header.at("meta");
    CheckpointMeta meta;
    meta.epoch = m.at("epoch").get<int>();
    meta.omega = std::bit_cast<double>(m.at("omega_bits").get<std::uint64_t>());
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.train_accuracy = std::bit_cast<double>(m.at("train_accuracy_bits").get<std::uint64_t>());
    meta.test_accuracy = std::bit_cast<double>(m.at("test_accuracy_bits").get<std::uint64_t>());
    meta.extra = m.at("extra").get<std::map<std::string, std::string>>();
    return Checkpoint{Network(std::move(spec), std::move(layers), header.at("seed").get<std::uint64_t>()),
                      std::move(meta)};
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header malformed: ") + e.what());
  } catch (const SpecError& e) {
    throw CheckpointError(std::string("checkpoint does not describe a valid network: ") + e.what());
  }
}

void save(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& path) {
  const std::string bytes = serialize(net, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace vdn
