#include "vdn/network.hpp"

#include <cmath>
#include <random>

#include "vdn/error.hpp"

namespace vdn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::prelu_channel: return "prelu-channel";
    case Activation::prelu_layer: return "prelu-layer";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

std::string_view to_string(Granularity g) {
  return g == Granularity::channel ? "channel" : "layer";
}

Activation parse_activation(std::string_view s) {
  for (auto a : {Activation::relu, Activation::prelu_channel, Activation::prelu_layer,
                 Activation::identity})
    if (s == to_string(a)) return a;
  throw SpecError("unknown activation '" + std::string(s) + "'");
}

Granularity parse_granularity(std::string_view s) {
  if (s == "channel") return Granularity::channel;
  if (s == "layer") return Granularity::layer;
  throw SpecError("unknown granularity '" + std::string(s) + "' (expected channel or layer)");
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw SpecError("network spec has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.n_in == 0 || l.n_out == 0)
      throw SpecError("layer " + std::to_string(i) + ": widths must be positive");
    if (i + 1 < layers.size() && l.n_out != layers[i + 1].n_in)
      throw SpecError("layer " + std::to_string(i) + " outputs " + std::to_string(l.n_out) +
                      " channels but layer " + std::to_string(i + 1) + " expects " +
                      std::to_string(layers[i + 1].n_in));
  }
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const auto& span = spans[s];
    const std::string name = "residual span " + std::to_string(s) + " [" +
                             std::to_string(span.first) + ", " + std::to_string(span.last) + "]";
    if (span.first > span.last || span.last >= layers.size())
      throw SpecError(name + " is outside the layer range");
    if (layers[span.first].n_in != layers[span.last].n_out)
      throw SpecError(name + " joins mismatched widths " + std::to_string(layers[span.first].n_in) +
                      " -> " + std::to_string(layers[span.last].n_out) +
                      "; identity skips need equal widths");
    if (s > 0 && span.first <= spans[s - 1].last)
      throw SpecError(name + " overlaps or precedes the previous span");
  }
}

std::size_t NetworkSpec::block_length(const ResidualSpan& span) const {
  std::size_t n = 0;
  for (std::size_t i = span.first; i <= span.last; ++i)
    if (is_nonlinear(layers.at(i).activation)) ++n;
  return n;
}

NetworkSpec NetworkSpec::feedforward(const std::vector<std::size_t>& widths, Activation hidden) {
  if (widths.size() < 2) throw SpecError("feedforward spec needs at least two widths");
  NetworkSpec spec;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    spec.layers.push_back({widths[i], widths[i + 1],
                           i + 2 == widths.size() ? Activation::identity : hidden, true, false});
  return spec;
}

Network::Network(NetworkSpec spec, std::vector<Layer> layers, std::uint64_t seed)
    : spec_(std::move(spec)), layers_(std::move(layers)), seed_(seed) {
  spec_.validate();
  check();
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (Parameter* p : {&l.weight, &l.bias, &l.slopes, &l.gain})
      if (!p->empty()) out.push_back(p);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    n += l.weight.tensor.size() + l.bias.tensor.size() + l.slopes.tensor.size() +
         l.gain.tensor.size();
  return n;
}

std::size_t Network::slope_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.slopes.tensor.size();
  return n;
}

bool Network::has_prelu() const {
  for (const auto& l : spec_.layers)
    if (is_prelu(l.activation)) return true;
  return false;
}

void Network::check() const {
  if (layers_.size() != spec_.layers.size())
    throw SpecError("network has " + std::to_string(layers_.size()) + " layers, spec has " +
                    std::to_string(spec_.layers.size()));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& s = spec_.layers[i];
    const auto& l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (l.weight.tensor.shape() != Shape{s.n_in, s.n_out})
      throw SpecError(where + "weight shape " + to_string(l.weight.tensor.shape()) +
                      " does not match " + std::to_string(s.n_in) + "x" + std::to_string(s.n_out));
    if (s.bias != !l.bias.empty() || (s.bias && l.bias.tensor.size() != s.n_out))
      throw SpecError(where + "bias does not match spec");
    if (s.channel_gain != !l.gain.empty() || (s.channel_gain && l.gain.tensor.size() != s.n_out))
      throw SpecError(where + "channel gain does not match spec");
    std::size_t want = 0;
    if (s.activation == Activation::prelu_channel) want = s.n_out;
    if (s.activation == Activation::prelu_layer) want = 1;
    if (l.slopes.tensor.size() != want)
      throw SpecError(where + "expected " + std::to_string(want) + " slopes for " +
                      std::string(to_string(s.activation)) + ", found " +
                      std::to_string(l.slopes.tensor.size()));
    if (want) {
      if (l.unit_map.size() != s.n_out) throw SpecError(where + "unit map size mismatch");
      for (auto u : l.unit_map)
        if (u >= want) throw SpecError(where + "unit map index out of range");
      for (std::size_t k = 0; k < want; ++k) {
        if (!std::isfinite(l.slopes.tensor[k])) throw SpecError(where + "non-finite slope");
        if (l.slopes.is_frozen(k) && l.slopes.tensor[k] != 1.0)
          throw SpecError(where + "frozen slope " + std::to_string(k) + " is not exactly 1");
      }
    }
  }
}

void Network::set_activation(std::size_t i, Activation a, double initial_slope) {
  auto& s = spec_.layers.at(i);
  auto& l = layers_.at(i);
  s.activation = a;
  l.slopes = Parameter{};
  l.unit_map.clear();
  if (!is_prelu(a)) return;
  const std::size_t n = a == Activation::prelu_channel ? s.n_out : 1;
  l.slopes.tensor = Tensor({n}, initial_slope);
  l.slopes.frozen.assign(n, 0);
  l.slopes.weight_decay = false;
  l.unit_map.resize(s.n_out);
  for (std::size_t c = 0; c < s.n_out; ++c) l.unit_map[c] = a == Activation::prelu_channel ? c : 0;
}

void Network::set_channel_gain(std::size_t i) {
  auto& s = spec_.layers.at(i);
  s.channel_gain = true;
  layers_.at(i).gain.tensor = Tensor({s.n_out}, 1.0);
  layers_.at(i).gain.weight_decay = false;
}

Network build(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  NetworkSpec plain = spec;
  std::vector<Layer> layers(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& s = spec.layers[i];
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(s.n_in)));
    layers[i].weight.tensor = Tensor({s.n_in, s.n_out});
    for (auto& w : layers[i].weight.tensor.values()) w = he(rng);
    if (s.bias) layers[i].bias.tensor = Tensor({s.n_out}, 0.0);
    plain.layers[i].activation = Activation::identity;
    plain.layers[i].channel_gain = false;
  }
  Network net(std::move(plain), std::move(layers), seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    net.set_activation(i, spec.layers[i].activation, 0.0);
    if (spec.layers[i].channel_gain) net.set_channel_gain(i);
  }
  net.check();
  return net;
}

namespace {

template <class Net>
Var forward_impl(Tape& tape, Net& net, Var input) {
  const auto& spec = net.spec();
  if (input.value().rank() != 2 || input.value().cols() != spec.input_width())
    throw ShapeError("forward: batch of shape " + to_string(input.value().shape()) +
                     " does not match network input width " + std::to_string(spec.input_width()));
  auto& layers = net.layers();
  std::size_t next_span = 0;
  std::optional<Var> skip;
  Var h = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (next_span < spec.spans.size() && spec.spans[next_span].first == i) skip = h;
    auto& layer = layers[i];
    const auto& ls = spec.layers[i];
    h = matmul(h, tape.parameter(layer.weight));
    if (ls.bias) h = add_bias(h, tape.parameter(layer.bias));
    switch (ls.activation) {
      case Activation::relu: h = relu(h); break;
      case Activation::prelu_channel:
      case Activation::prelu_layer: h = prelu(h, tape.parameter(layer.slopes), layer.unit_map); break;
      case Activation::identity: break;
    }
    if (ls.channel_gain) h = mul_channel(h, tape.parameter(layer.gain));
    if (next_span < spec.spans.size() && spec.spans[next_span].last == i) {
      h = add(h, *skip);
      skip.reset();
      ++next_span;
    }
  }
  return h;
}

}  // namespace

Var forward(Tape& tape, Network& net, Var input) { return forward_impl(tape, net, input); }
Var forward(Tape& tape, const Network& net, Var input) { return forward_impl(tape, net, input); }

Tensor forward(const Network& net, const Tensor& batch) {
  Tape tape;
  Var out = forward(tape, net, tape.constant(batch));
  return out.value();
}

Network relu_to_prelu(Network net, Granularity granularity) {
  if (net.has_prelu()) throw SpecError("relu_to_prelu: network already uses PReLU units");
  const auto a = granularity == Granularity::channel ? Activation::prelu_channel
                                                     : Activation::prelu_layer;
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    if (net.spec().layers[i].activation == Activation::relu) net.set_activation(i, a, 0.0);
  net.check();
  return net;
}

Network replace_nonlinear_layerwise_with_channelwise(Network net) {
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (net.spec().layers[i].activation != Activation::prelu_layer) continue;
    const Parameter& s = net.layers()[i].slopes;
    if (s.tensor[0] == 1.0) {
      // Fully linear: keep one slope, frozen.
      net.layers()[i].slopes.frozen.assign(1, 1);
      continue;
    }
    const double slope = s.tensor[0];
    net.set_activation(i, Activation::prelu_channel, slope);
  }
  net.check();
  return net;
}

Network append_channel_multiplier(Network net) {
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    if (net.spec().layers[i].activation == Activation::prelu_layer &&
        !net.spec().layers[i].channel_gain)
      net.set_channel_gain(i);
  net.check();
  return net;
}

}  // namespace vdn
