#include "pinn/net.hpp"

#include <cmath>
#include <random>

namespace pinn::net {

std::string_view activation_name(Activation a) noexcept {
  return a == Activation::kSin ? "sin" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sin") return Activation::kSin;
  throw Error("unknown activation \"" + std::string(name) + "\" (expected tanh or sin)");
}

std::vector<std::size_t> MLPSpec::layer_widths() const {
  std::vector<std::size_t> widths;
  widths.reserve(hidden_layers.size() + 2);
  widths.push_back(input_width);
  widths.insert(widths.end(), hidden_layers.begin(), hidden_layers.end());
  widths.push_back(output_width);
  return widths;
}

void MLPSpec::validate() const {
  if (input_width < 1) throw Error("network input width must be >= 1");
  for (std::size_t i = 0; i < hidden_layers.size(); ++i) {
    if (hidden_layers[i] < 1) {
      throw Error("hidden layer " + std::to_string(i) + " has width 0");
    }
  }
  if (output_width != 1) {
    throw Error("network output width must be 1, got " + std::to_string(output_width));
  }
}

std::vector<LayerLayout> make_layout(const MLPSpec& spec) {
  const auto widths = spec.layer_widths();
  std::vector<LayerLayout> layout;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerLayout layer;
    layer.cols = widths[l];
    layer.rows = widths[l + 1];
    layer.weight_offset = offset;
    offset += layer.rows * layer.cols;
    layer.bias_offset = offset;
    offset += layer.rows;
    layout.push_back(layer);
  }
  return layout;
}

std::size_t parameter_count(const MLPSpec& spec) {
  const auto layout = make_layout(spec);
  return layout.empty() ? 0 : layout.back().bias_offset + layout.back().rows;
}

WeightStore init_glorot(const MLPSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightStore store;
  store.seed = seed;
  store.layout = make_layout(spec);
  store.flat.assign(parameter_count(spec), 0.0);

  std::mt19937_64 rng(seed);
  for (const LayerLayout& layer : store.layout) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
    for (std::size_t i = 0; i < layer.rows * layer.cols; ++i) {
      // 53 random bits -> [0, 1), mapped onto [-limit, limit).
      const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      store.flat[layer.weight_offset + i] = limit * (2.0 * unit - 1.0);
    }
  }
  return store;
}

std::vector<ad::Expr> register_weights(ad::Graph& graph, const WeightStore& weights,
                                       std::string_view prefix) {
  std::vector<ad::Expr> vars;
  vars.reserve(weights.flat.size());
  for (std::size_t i = 0; i < weights.flat.size(); ++i) {
    vars.push_back(
        graph.new_var(std::string(prefix) + "[" + std::to_string(i) + "]", weights.flat[i]));
  }
  return vars;
}

ad::Expr forward(const MLPSpec& spec, std::span<const ad::Expr> weight_vars, ad::Graph& graph,
                 std::span<const ad::Expr> inputs) {
  if (inputs.size() != spec.input_width) {
    throw Error("network expects " + std::to_string(spec.input_width) + " inputs, got " +
                std::to_string(inputs.size()));
  }
  if (weight_vars.size() != parameter_count(spec)) {
    throw Error("network expects " + std::to_string(parameter_count(spec)) + " weights, got " +
                std::to_string(weight_vars.size()));
  }
  for (const ad::Expr& e : inputs) {
    if (!graph.owns(e)) throw ad::ForeignNodeError("network input belongs to another graph");
  }
  for (const ad::Expr& e : weight_vars) {
    if (!graph.owns(e)) throw ad::ForeignNodeError("network weight belongs to another graph");
  }
  const auto layout = make_layout(spec);
  std::vector<ad::Expr> activations(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerLayout& layer = layout[l];
    const bool last = l + 1 == layout.size();
    std::vector<ad::Expr> next;
    next.reserve(layer.rows);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      ad::Expr z = weight_vars[layer.bias_offset + r];
      for (std::size_t c = 0; c < layer.cols; ++c) {
        z = z + weight_vars[layer.weight_offset + r * layer.cols + c] * activations[c];
      }
      if (!last) z = spec.activation == Activation::kSin ? ad::sin(z) : ad::tanh(z);
      next.push_back(z);
    }
    activations = std::move(next);
  }
  return activations.front();
}

}  // namespace pinn::net
