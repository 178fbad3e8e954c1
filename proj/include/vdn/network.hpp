#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vdn/autodiff.hpp"
#include "vdn/tensor.hpp"

namespace vdn {

enum class Activation { relu, prelu_channel, prelu_layer, identity };
enum class Granularity { channel, layer };

std::string_view to_string(Activation a);
std::string_view to_string(Granularity g);
Activation parse_activation(std::string_view s);
Granularity parse_granularity(std::string_view s);

inline bool is_prelu(Activation a) {
  return a == Activation::prelu_channel || a == Activation::prelu_layer;
}
inline bool is_nonlinear(Activation a) { return a != Activation::identity; }

struct LayerSpec {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  Activation activation = Activation::relu;
  bool bias = true;
  /// Learnable per-channel gain applied after the activation.
  bool channel_gain = false;

  bool operator==(const LayerSpec&) const = default;
};

/// Identity skip around layers [first, last]: the output of layer `last`
/// gets the input of layer `first` added to it.
struct ResidualSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const ResidualSpan&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::vector<ResidualSpan> spans;

  /// Throws SpecError naming the first violated invariant.
  void validate() const;
  /// Number of nonlinear layers inside `span`.
  std::size_t block_length(const ResidualSpan& span) const;
  std::size_t input_width() const { return layers.front().n_in; }
  std::size_t output_width() const { return layers.back().n_out; }

  /// Chain of layers through `widths` (widths.size() - 1 layers). Hidden
  /// layers use `hidden`, the last layer is identity.
  static NetworkSpec feedforward(const std::vector<std::size_t>& widths,
                                 Activation hidden = Activation::relu);

  bool operator==(const NetworkSpec&) const = default;
};

/// Parameters of one layer: y = act(x·W + b) [· gain]. W is stored n_in×n_out.
struct Layer {
  Parameter weight;
  Parameter bias;
  /// One slope per channel or a single slope; empty unless the layer is PReLU.
  Parameter slopes;
  Parameter gain;
  /// Channel -> slope index.
  std::vector<std::size_t> unit_map;
};

class Network {
 public:
  Network(NetworkSpec spec, std::vector<Layer> layers, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Trainable parameters in a fixed order (weight, bias, slopes, gain per
  /// layer, skipping empty ones).
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  std::size_t slope_count() const;
  bool has_prelu() const;

  /// Re-checks that parameters agree with the spec and slopes are valid.
  void check() const;

  /// Sets the activation kind of layer `i` and rebuilds its slope parameter.
  /// Used by the surgery operations.
  void set_activation(std::size_t i, Activation a, double initial_slope);
  void set_channel_gain(std::size_t i);

 private:
  NetworkSpec spec_;
  std::vector<Layer> layers_;
  std::uint64_t seed_;
};

/// He-normal weights (variance 2/n_in), zero biases. Deterministic in seed.
Network build(const NetworkSpec& spec, std::uint64_t seed);

/// Records the forward pass on `tape`, binding the network's parameters so
/// that backward() fills their gradients.
Var forward(Tape& tape, Network& net, Var input);
/// Records the forward pass with the parameters as constants.
Var forward(Tape& tape, const Network& net, Var input);
/// Plain evaluation.
Tensor forward(const Network& net, const Tensor& batch);

/// Replaces every ReLU with PReLU at the given granularity. Slopes start at 0
/// so the network function is unchanged.
Network relu_to_prelu(Network net, Granularity granularity);

/// Turns every layer-wise PReLU whose slope is not 1 into a channel-wise
/// PReLU initialized to the layer slope. Fully linear layers stay as a
/// single frozen slope.
Network replace_nonlinear_layerwise_with_channelwise(Network net);

/// Adds a per-channel gain, initialized to 1, after every layer-wise PReLU.
Network append_channel_multiplier(Network net);

}  // namespace vdn
