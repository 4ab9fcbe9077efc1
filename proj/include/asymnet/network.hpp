#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "asymnet/profile.hpp"
#include "asymnet/rng.hpp"
#include "asymnet/tensor.hpp"

namespace asymnet {

enum class LayerKind : std::uint8_t { dense = 0, conv2d = 1, maxpool = 2, flatten = 3 };

std::string_view to_string(LayerKind kind);

/// One layer of an asymmetric network.
///
/// dense:   weights n_out x n_in, bias n_out
/// conv2d:  weights C_out x C_in x kh x kw, bias C_out
/// maxpool, flatten: no parameters
///
/// A weighted layer computes x_i = s_i * f0(u_i) when it carries a profile
/// and x_i = f0(u_i) when it does not. Biases are added to u and are not
/// scaled separately.
struct Layer {
  LayerKind kind = LayerKind::dense;
  Activation base = Activation::none;
  Padding padding = Padding::valid;
  Tensor weights;
  Tensor bias;
  std::optional<SensitivityProfile> profile;

  bool weighted() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  /// Output nodes (dense) or channels (conv); 0 for parameter-free layers.
  std::size_t output_nodes() const { return weighted() ? weights.extent(0) : 0; }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }

  bool operator==(const Layer&) const = default;
};

Layer dense_layer(std::size_t inputs, std::size_t outputs, Activation base,
                  std::optional<SensitivityProfile> profile = std::nullopt);
Layer conv_layer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                 Padding padding, Activation base,
                 std::optional<SensitivityProfile> profile = std::nullopt);
Layer maxpool_layer();
Layer flatten_layer();

/// Ordered stack of layers applied to per-sample inputs of `input_shape`.
/// Batched tensors carry a leading batch extent in front of every shape.
class Network {
 public:
  Network() = default;
  /// Throws DimensionError naming the first layer whose shapes do not chain.
  Network(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access for parameter edits. Changing weight shapes through this
  /// reference is caught by validate() and by the next forward().
  Layer& layer(std::size_t i) { return layers_.at(i); }

  /// Per-sample shape entering layer i (i == size() gives the network output).
  std::vector<Shape> shapes() const;
  Shape output_shape() const;
  void validate() const;

  /// Indices of dense/conv layers in order.
  std::vector<std::size_t> weighted_layers() const;
  /// Weighted layers whose nodes may be removed: all but the last weighted layer.
  std::vector<std::size_t> hidden_layers() const;
  std::size_t output_layer() const;

  /// Hash of everything that fixes tensor shapes (kinds, extents, padding).
  std::uint64_t structure_signature() const;

  bool operator==(const Network&) const = default;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
};

/// Glorot-uniform weights, zero biases.
void initialize(Network& net, Rng& rng);

/// Cached quantities from one forward pass, consumed by backward().
struct BackpropState {
  std::size_t batch = 0;
  std::uint64_t signature = 0;
  /// Batched input x^{l-1} of every layer.
  std::vector<Tensor> inputs;
  /// Batched pre-activation u^l of weighted layers (empty otherwise).
  std::vector<Tensor> pre;
  /// Per-sample argmax maps of pooling layers (flat index within a sample).
  std::vector<std::vector<std::size_t>> pool_index;
  /// Set by backward(): dE/du for weighted layers, dE/d(output) for the rest.
  std::vector<Tensor> deltas;
};

struct ForwardResult {
  Tensor output;
  BackpropState state;
};

ForwardResult forward(const Network& net, const Tensor& input);
/// forward() without keeping the cache.
Tensor predict(const Network& net, const Tensor& input);

struct LayerGradient {
  Tensor weights;
  Tensor bias;
};
using Gradients = std::vector<LayerGradient>;

/// Backpropagates dE/dx^L (batched, shaped like the network output).
/// Parameter gradients are summed over the batch. Throws StateError when the
/// state was produced by a different network structure.
Gradients backward(const Network& net, BackpropState& state, const Tensor& loss_grad);

/// W <- W - step * grad for every weighted layer.
void apply_update(Network& net, const Gradients& grads, double step);

/// Returns a copy of `net` without node `node` of weighted layer `layer`,
/// shrinking the next weighted layer's inputs to match. Through a flatten,
/// every dense input column fed by the removed channel goes.
Network remove_node(const Network& net, std::size_t layer, std::size_t node);

/// Copy of `net` where the listed nodes of `layer` feed nothing: the consuming
/// weights are zeroed and every shape is kept.
Network silence_nodes(const Network& net, std::size_t layer, const std::vector<std::size_t>& nodes);

/// Weight and bias scalars over all layers.
std::size_t count_weights(const Network& net);
double prune_ratio(std::size_t before, std::size_t after);
double prune_ratio(const Network& before, const Network& after);

/// Architecture description used by builders and the experiment config.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t width = 0;   // dense outputs / conv channels
  std::size_t kernel = 0;  // conv only
  Padding padding = Padding::valid;
  bool operator==(const LayerSpec&) const = default;
};

/// How hidden layers get their sensitivity profiles.
struct ProfilePlan {
  enum class Mode : std::uint8_t { none, ones, schedule, explicit_values };
  Mode mode = Mode::none;
  Schedule schedule = Schedule::quadratic;
  double floor = kDefaultProfileFloor;
  std::vector<double> values;  // explicit_values only; must match the single hidden layer
  bool operator==(const ProfilePlan&) const = default;
};

std::optional<SensitivityProfile> plan_profile(const ProfilePlan& plan, std::size_t nodes);

/// Builds and initializes a network. Every weighted layer except the last uses
/// `base` and gets a profile from `plan`; the last layer is a profile-free
/// head with `head` activation.
Network build_network(const Shape& input_shape, const std::vector<LayerSpec>& specs,
                      Activation base, Activation head, const ProfilePlan& plan, Rng& rng);

}  // namespace asymnet
