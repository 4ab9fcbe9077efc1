#include "asymnet/network.hpp"

#include <algorithm>
#include <cmath>

#include "asymnet/errors.hpp"
#include "asymnet/kernels.hpp"

namespace asymnet {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv";
    case LayerKind::maxpool: return "pool";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

Layer dense_layer(std::size_t inputs, std::size_t outputs, Activation base,
                  std::optional<SensitivityProfile> profile) {
  Layer l;
  l.kind = LayerKind::dense;
  l.base = base;
  l.weights = Tensor({outputs, inputs});
  l.bias = Tensor({outputs});
  l.profile = std::move(profile);
  return l;
}

Layer conv_layer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                 Padding padding, Activation base, std::optional<SensitivityProfile> profile) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.base = base;
  l.padding = padding;
  l.weights = Tensor({out_channels, in_channels, kernel, kernel});
  l.bias = Tensor({out_channels});
  l.profile = std::move(profile);
  return l;
}

Layer maxpool_layer() {
  Layer l;
  l.kind = LayerKind::maxpool;
  return l;
}

Layer flatten_layer() {
  Layer l;
  l.kind = LayerKind::flatten;
  return l;
}

namespace {

std::string layer_label(std::size_t i, const Layer& l) {
  return "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
}

Shape next_shape(std::size_t index, const Layer& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::dense: {
      if (l.weights.rank() != 2) throw DimensionError(layer_label(index, l) + ": weights must be 2-D");
      if (in.size() != 1 || in[0] != l.weights.extent(1)) {
        throw DimensionError(layer_label(index, l) + ": expects input [" +
                             std::to_string(l.weights.extent(1)) + "], got " + shape_string(in));
      }
      return {l.weights.extent(0)};
    }
    case LayerKind::conv2d: {
      if (l.weights.rank() != 4) throw DimensionError(layer_label(index, l) + ": weights must be 4-D");
      if (in.size() != 3 || in[0] != l.weights.extent(1)) {
        throw DimensionError(layer_label(index, l) + ": expects " +
                             std::to_string(l.weights.extent(1)) + " input channels, got " +
                             shape_string(in));
      }
      try {
        const auto g = kernels::conv_geometry(in[0], in[1], in[2], l.weights.extent(2),
                                              l.weights.extent(3), l.padding);
        return {l.weights.extent(0), g.out_h(), g.out_w()};
      } catch (const DimensionError& e) {
        throw DimensionError(layer_label(index, l) + ": " + e.what());
      }
    }
    case LayerKind::maxpool:
      if (in.size() != 3) {
        throw DimensionError(layer_label(index, l) + ": expects C x H x W, got " + shape_string(in));
      }
      return {in[0], (in[1] + 1) / 2, (in[2] + 1) / 2};
    case LayerKind::flatten:
      return {shape_size(in)};
  }
  throw DimensionError(layer_label(index, l) + ": unknown layer kind");
}

void check_parameters(std::size_t index, const Layer& l) {
  if (!l.weighted()) {
    if (!l.weights.empty() || !l.bias.empty() || l.profile) {
      throw DimensionError(layer_label(index, l) + ": carries parameters");
    }
    return;
  }
  const auto n = l.weights.extent(0);
  if (l.bias.rank() != 1 || l.bias.size() != n) {
    throw DimensionError(layer_label(index, l) + ": bias must have " + std::to_string(n) + " entries");
  }
  if (l.profile) {
    if (l.profile->size() != n) {
      throw DimensionError(layer_label(index, l) + ": profile has " +
                           std::to_string(l.profile->size()) + " entries for " + std::to_string(n) +
                           " nodes");
    }
    validate_profile(l.profile->values);
  }
  if (l.base == Activation::none) {
    throw DimensionError(layer_label(index, l) + ": weighted layers need an activation");
  }
}

}  // namespace

Network::Network(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  validate();
}

std::vector<Shape> Network::shapes() const {
  std::vector<Shape> out;
  out.reserve(layers_.size() + 1);
  out.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) out.push_back(next_shape(i, layers_[i], out.back()));
  return out;
}

Shape Network::output_shape() const { return shapes().back(); }

void Network::validate() const {
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw DimensionError("network input shape must have positive extents");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) check_parameters(i, layers_[i]);
  (void)shapes();
}

std::vector<std::size_t> Network::weighted_layers() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].weighted()) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> Network::hidden_layers() const {
  auto idx = weighted_layers();
  if (!idx.empty()) idx.pop_back();
  return idx;
}

std::size_t Network::output_layer() const {
  auto idx = weighted_layers();
  if (idx.empty()) throw UnsupportedLayerError("network has no weighted layer");
  return idx.back();
}

std::uint64_t Network::structure_signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  for (auto e : input_shape_) mix(e);
  for (const auto& l : layers_) {
    mix(static_cast<std::uint64_t>(l.kind));
    mix(static_cast<std::uint64_t>(l.padding));
    for (auto e : l.weights.shape()) mix(e);
    mix(0xFFFF);
  }
  return h;
}

void initialize(Network& net, Rng& rng) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layer(i);
    if (!l.weighted()) continue;
    const auto& s = l.weights.shape();
    const std::size_t receptive = s.size() == 4 ? s[2] * s[3] : 1;
    const double fan_in = static_cast<double>(s[1] * receptive);
    const double fan_out = static_cast<double>(s[0] * receptive);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& w : l.weights.values()) w = rng.uniform(-limit, limit);
    l.bias.fill(0.0);
  }
}

namespace {

Shape batched(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

// x = s * f0(u), applied in place over a batch of [N x nodes x spatial].
void activate(const Layer& l, const Tensor& u, Tensor& x, std::size_t batch, std::size_t spatial) {
  const auto nodes = l.output_nodes();
  const double* up = u.data();
  double* xp = x.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < nodes; ++c) {
      const std::size_t off = (n * nodes + c) * spatial;
      if (l.profile) {
        const double s = l.profile->values[c];
        for (std::size_t p = 0; p < spatial; ++p) xp[off + p] = s * base_activation(l.base, up[off + p]);
      } else {
        for (std::size_t p = 0; p < spatial; ++p) xp[off + p] = base_activation(l.base, up[off + p]);
      }
    }
  }
}

}  // namespace

ForwardResult forward(const Network& net, const Tensor& input) {
  const auto shapes = net.shapes();
  const auto& in_shape = shapes.front();
  if (input.rank() != in_shape.size() + 1 ||
      !std::equal(in_shape.begin(), in_shape.end(), input.shape().begin() + 1)) {
    throw DimensionError("network expects batched input [N]" + shape_string(in_shape) + ", got " +
                         shape_string(input.shape()));
  }
  const std::size_t batch = input.extent(0);
  ForwardResult r;
  auto& st = r.state;
  st.batch = batch;
  st.signature = net.structure_signature();
  st.inputs.resize(net.size());
  st.pre.resize(net.size());
  st.pool_index.resize(net.size());

  Tensor x = input;
  for (std::size_t li = 0; li < net.size(); ++li) {
    const auto& l = net.layer(li);
    const auto& out_shape = shapes[li + 1];
    Tensor y(batched(batch, out_shape));
    switch (l.kind) {
      case LayerKind::dense: {
        const auto n_in = l.weights.extent(1);
        const auto n_out = l.weights.extent(0);
        Tensor u(batched(batch, out_shape));
        kernels::gemm_nt(x.data(), l.weights.data(), u.data(), batch, n_out, n_in);
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t j = 0; j < n_out; ++j) u[n * n_out + j] += l.bias[j];
        activate(l, u, y, batch, 1);
        st.pre[li] = std::move(u);
        break;
      }
      case LayerKind::conv2d: {
        const auto& is = shapes[li];
        const auto g = kernels::conv_geometry(is[0], is[1], is[2], l.weights.extent(2),
                                              l.weights.extent(3), l.padding);
        const auto c_out = l.weights.extent(0);
        const auto in_size = shape_size(is);
        const auto out_size = c_out * g.positions();
        Tensor u(batched(batch, out_shape));
        std::vector<double> cols(g.patch() * g.positions());
        for (std::size_t n = 0; n < batch; ++n) {
          kernels::im2col(x.data() + n * in_size, g, cols.data());
          double* un = u.data() + n * out_size;
          kernels::gemm_nn(l.weights.data(), cols.data(), un, c_out, g.positions(), g.patch());
          for (std::size_t c = 0; c < c_out; ++c)
            for (std::size_t p = 0; p < g.positions(); ++p) un[c * g.positions() + p] += l.bias[c];
        }
        activate(l, u, y, batch, g.positions());
        st.pre[li] = std::move(u);
        break;
      }
      case LayerKind::maxpool: {
        const auto& is = shapes[li];
        const auto in_size = shape_size(is);
        const auto out_size = shape_size(out_shape);
        auto& idx = st.pool_index[li];
        idx.resize(batch * out_size);
        for (std::size_t n = 0; n < batch; ++n) {
          Tensor sample(is, std::vector<double>(x.data() + n * in_size, x.data() + (n + 1) * in_size));
          auto pooled = maxpool2d(sample);
          std::copy(pooled.output.storage().begin(), pooled.output.storage().end(),
                    y.data() + n * out_size);
          std::copy(pooled.argmax.begin(), pooled.argmax.end(), idx.begin() + n * out_size);
        }
        break;
      }
      case LayerKind::flatten:
        y = x.reshaped(batched(batch, out_shape));
        break;
    }
    st.inputs[li] = std::move(x);
    x = std::move(y);
  }
  r.output = std::move(x);
  return r;
}

Tensor predict(const Network& net, const Tensor& input) { return forward(net, input).output; }

Gradients backward(const Network& net, BackpropState& state, const Tensor& loss_grad) {
  if (state.signature != net.structure_signature() || state.inputs.size() != net.size()) {
    throw StateError("backprop state was produced by a different network structure");
  }
  const auto shapes = net.shapes();
  const std::size_t batch = state.batch;
  const Shape expected = batched(batch, shapes.back());
  if (loss_grad.shape() != expected) {
    throw DimensionError("loss gradient must have shape " + shape_string(expected) + ", got " +
                         shape_string(loss_grad.shape()));
  }
  Gradients grads(net.size());
  state.deltas.assign(net.size(), Tensor());

  Tensor g = loss_grad;
  for (std::size_t li = net.size(); li-- > 0;) {
    const auto& l = net.layer(li);
    const Tensor& x_in = state.inputs[li];
    const bool need_input_grad = li > 0;
    Tensor g_prev;
    if (need_input_grad) g_prev = Tensor(batched(batch, shapes[li]));

    if (l.weighted()) {
      const Tensor& u = state.pre[li];
      const auto nodes = l.output_nodes();
      const auto spatial = shape_size(shapes[li + 1]) / nodes;
      Tensor delta(u.shape());
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < nodes; ++c) {
          const std::size_t off = (n * nodes + c) * spatial;
          for (std::size_t p = 0; p < spatial; ++p) {
            const double dx = l.profile ? l.profile->values[c] * g[off + p] : g[off + p];
            delta[off + p] = dx * base_derivative(l.base, u[off + p]);
          }
        }
      }
      LayerGradient lg{Tensor(l.weights.shape()), Tensor(l.bias.shape())};
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < nodes; ++c)
          for (std::size_t p = 0; p < spatial; ++p) lg.bias[c] += delta[(n * nodes + c) * spatial + p];

      if (l.kind == LayerKind::dense) {
        const auto n_in = l.weights.extent(1);
        kernels::gemm_tn(delta.data(), x_in.data(), lg.weights.data(), nodes, n_in, batch);
        if (need_input_grad) {
          kernels::gemm_nn(delta.data(), l.weights.data(), g_prev.data(), batch, n_in, nodes);
        }
      } else {
        const auto& is = shapes[li];
        const auto geo = kernels::conv_geometry(is[0], is[1], is[2], l.weights.extent(2),
                                                l.weights.extent(3), l.padding);
        const auto in_size = shape_size(is);
        const auto out_size = nodes * geo.positions();
        std::vector<double> cols(geo.patch() * geo.positions());
        std::vector<double> dcols(geo.patch() * geo.positions());
        for (std::size_t n = 0; n < batch; ++n) {
          kernels::im2col(x_in.data() + n * in_size, geo, cols.data());
          const double* dn = delta.data() + n * out_size;
          kernels::gemm_nt(dn, cols.data(), lg.weights.data(), nodes, geo.patch(), geo.positions());
          if (need_input_grad) {
            std::fill(dcols.begin(), dcols.end(), 0.0);
            kernels::gemm_tn(l.weights.data(), dn, dcols.data(), geo.patch(), geo.positions(), nodes);
            kernels::col2im(dcols.data(), geo, g_prev.data() + n * in_size);
          }
        }
      }
      grads[li] = std::move(lg);
      state.deltas[li] = std::move(delta);
    } else if (l.kind == LayerKind::maxpool) {
      if (need_input_grad) {
        const auto in_size = shape_size(shapes[li]);
        const auto out_size = shape_size(shapes[li + 1]);
        const auto& idx = state.pool_index[li];
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t o = 0; o < out_size; ++o)
            g_prev[n * in_size + idx[n * out_size + o]] += g[n * out_size + o];
      }
      state.deltas[li] = g;
    } else {
      if (need_input_grad) g_prev = g.reshaped(batched(batch, shapes[li]));
      state.deltas[li] = g;
    }
    g = std::move(g_prev);
  }
  return grads;
}

void apply_update(Network& net, const Gradients& grads, double step) {
  if (grads.size() != net.size()) {
    throw DimensionError("gradient list has " + std::to_string(grads.size()) + " layers, network has " +
                         std::to_string(net.size()));
  }
  for (std::size_t li = 0; li < net.size(); ++li) {
    auto& l = net.layer(li);
    if (!l.weighted()) continue;
    const auto& gr = grads[li];
    if (gr.weights.shape() != l.weights.shape() || gr.bias.shape() != l.bias.shape()) {
      throw DimensionError("gradient shape mismatch at layer " + std::to_string(li) + ": " +
                           shape_string(gr.weights.shape()) + " vs weights " +
                           shape_string(l.weights.shape()));
    }
    for (std::size_t k = 0; k < l.weights.size(); ++k) l.weights[k] -= step * gr.weights[k];
    for (std::size_t k = 0; k < l.bias.size(); ++k) l.bias[k] -= step * gr.bias[k];
  }
}

namespace {

// Drops index `node` along axis 0 of a tensor.
Tensor drop_leading(const Tensor& t, std::size_t node) {
  Shape s = t.shape();
  const std::size_t block = t.size() / s[0];
  s[0] -= 1;
  std::vector<double> data;
  data.reserve(t.size() - block);
  for (std::size_t i = 0; i < t.extent(0); ++i) {
    if (i == node) continue;
    data.insert(data.end(), t.data() + i * block, t.data() + (i + 1) * block);
  }
  return Tensor(std::move(s), std::move(data));
}

// Drops the contiguous index range [first, first + count) along axis 1.
Tensor drop_second_axis(const Tensor& t, std::size_t first, std::size_t count) {
  Shape s = t.shape();
  const std::size_t inner = t.size() / (s[0] * s[1]);
  const std::size_t old_cols = s[1];
  s[1] -= count;
  std::vector<double> data;
  data.reserve(shape_size(s));
  for (std::size_t i = 0; i < s[0]; ++i) {
    for (std::size_t j = 0; j < old_cols; ++j) {
      if (j >= first && j < first + count) continue;
      const double* src = t.data() + (i * old_cols + j) * inner;
      data.insert(data.end(), src, src + inner);
    }
  }
  return Tensor(std::move(s), std::move(data));
}

// Validates that `layer` is a hidden weighted layer and returns its node count.
std::size_t removable_nodes(const Network& net, std::size_t layer) {
  if (layer >= net.size()) {
    throw IndexError("layer index " + std::to_string(layer) + " out of range (" +
                     std::to_string(net.size()) + " layers)");
  }
  const auto& target = net.layer(layer);
  if (!target.weighted()) {
    throw UnsupportedLayerError("cannot remove nodes from " + std::string(to_string(target.kind)) +
                                " layer " + std::to_string(layer));
  }
  if (layer == net.output_layer()) {
    throw UnsupportedLayerError("output layer " + std::to_string(layer) + " nodes are not removable");
  }
  return target.output_nodes();
}

struct Consumer {
  std::size_t layer = 0;
  // Axis-1 entries of the consumer fed by one node of the producer.
  std::size_t block = 1;
};

// Follows a channel through parameter-free layers to the weighted layer that reads it.
Consumer find_consumer(const Network& net, std::size_t layer) {
  const auto shapes = net.shapes();
  Consumer c;
  for (std::size_t k = layer + 1; k < net.size(); ++k) {
    const auto& next = net.layer(k);
    if (next.kind == LayerKind::flatten) {
      const auto& in = shapes[k];
      c.block = shape_size(in) / in[0];
      continue;
    }
    if (next.kind == LayerKind::maxpool) continue;
    c.layer = k;
    return c;
  }
  throw StateError("layer " + std::to_string(layer) + " has no consuming weighted layer");
}

void check_node(std::size_t layer, std::size_t node, std::size_t nodes) {
  if (node >= nodes) {
    throw IndexError("node " + std::to_string(node) + " out of range for layer " +
                     std::to_string(layer) + " with " + std::to_string(nodes) + " nodes");
  }
}

}  // namespace

Network remove_node(const Network& net, std::size_t layer, std::size_t node) {
  const auto nodes = removable_nodes(net, layer);
  check_node(layer, node, nodes);
  if (nodes == 1) {
    throw ValidationError("layer " + std::to_string(layer) + " has a single node left");
  }
  const auto consumer = find_consumer(net, layer);
  std::vector<Layer> layers = net.layers();
  auto& l = layers[layer];
  l.weights = drop_leading(l.weights, node);
  l.bias = drop_leading(l.bias, node);
  if (l.profile) l.profile->values.erase(l.profile->values.begin() + static_cast<std::ptrdiff_t>(node));
  auto& next = layers[consumer.layer];
  next.weights = drop_second_axis(next.weights, node * consumer.block, consumer.block);
  return Network(net.input_shape(), std::move(layers));
}

Network silence_nodes(const Network& net, std::size_t layer, const std::vector<std::size_t>& nodes) {
  const auto n = removable_nodes(net, layer);
  const auto consumer = find_consumer(net, layer);
  Network out = net;
  auto& w = out.layer(consumer.layer).weights;
  const auto rows = w.extent(0), cols = w.extent(1);
  const auto inner = w.size() / (rows * cols);
  for (auto node : nodes) {
    check_node(layer, node, n);
    for (std::size_t i = 0; i < rows; ++i) {
      double* first = w.data() + (i * cols + node * consumer.block) * inner;
      std::fill(first, first + consumer.block * inner, 0.0);
    }
  }
  return out;
}

std::size_t count_weights(const Network& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers()) n += l.parameter_count();
  return n;
}

double prune_ratio(std::size_t before, std::size_t after) {
  if (before == 0) throw ValidationError("prune_ratio needs a non-empty original network");
  return static_cast<double>(after) / static_cast<double>(before);
}

double prune_ratio(const Network& before, const Network& after) {
  return prune_ratio(count_weights(before), count_weights(after));
}

std::optional<SensitivityProfile> plan_profile(const ProfilePlan& plan, std::size_t nodes) {
  switch (plan.mode) {
    case ProfilePlan::Mode::none:
      return std::nullopt;
    case ProfilePlan::Mode::ones:
      return explicit_profile(std::vector<double>(nodes, 1.0));
    case ProfilePlan::Mode::schedule:
      return make_profile(plan.schedule, nodes, plan.floor);
    case ProfilePlan::Mode::explicit_values:
      if (plan.values.size() != nodes) {
        throw ProfileError("explicit profile has " + std::to_string(plan.values.size()) +
                           " values for a layer of " + std::to_string(nodes) + " nodes");
      }
      return explicit_profile(plan.values);
  }
  return std::nullopt;
}

Network build_network(const Shape& input_shape, const std::vector<LayerSpec>& specs,
                      Activation base, Activation head, const ProfilePlan& plan, Rng& rng) {
  std::size_t last_weighted = specs.size();
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].kind == LayerKind::dense || specs[i].kind == LayerKind::conv2d) last_weighted = i;
  if (last_weighted == specs.size()) throw ValidationError("architecture has no weighted layer");

  std::vector<Layer> layers;
  Shape current = input_shape;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const bool is_head = i == last_weighted;
    switch (s.kind) {
      case LayerKind::dense: {
        if (current.size() != 1) {
          throw DimensionError("dense layer " + std::to_string(i) + " needs flat input, got " +
                               shape_string(current) + " (add a flatten layer)");
        }
        if (s.width == 0) throw ValidationError("dense layer " + std::to_string(i) + " has zero width");
        layers.push_back(dense_layer(current[0], s.width, is_head ? head : base,
                                     is_head ? std::nullopt : plan_profile(plan, s.width)));
        break;
      }
      case LayerKind::conv2d:
        if (current.size() != 3) {
          throw DimensionError("conv layer " + std::to_string(i) + " needs C x H x W input, got " +
                               shape_string(current));
        }
        if (s.width == 0 || s.kernel == 0) {
          throw ValidationError("conv layer " + std::to_string(i) + " needs width and kernel");
        }
        layers.push_back(conv_layer(current[0], s.width, s.kernel, s.padding, is_head ? head : base,
                                    is_head ? std::nullopt : plan_profile(plan, s.width)));
        break;
      case LayerKind::maxpool:
        layers.push_back(maxpool_layer());
        break;
      case LayerKind::flatten:
        layers.push_back(flatten_layer());
        break;
    }
    current = next_shape(i, layers.back(), current);
  }
  Network net(input_shape, std::move(layers));
  initialize(net, rng);
  return net;
}

}  // namespace asymnet
