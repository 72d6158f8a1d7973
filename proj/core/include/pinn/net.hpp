#pragma once

// Fully-connected multilayer perceptron with a scalar output. The forward
// pass is built from graph nodes so derivatives with respect to the inputs
// and to the weights are both available.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/error.hpp"

namespace pinn::net {

enum class Activation : std::uint8_t { kTanh = 0, kSin = 1 };

std::string_view activation_name(Activation a) noexcept;
/// Throws pinn::Error for anything other than "tanh" or "sin".
Activation parse_activation(std::string_view name);

struct MLPSpec {
  std::size_t input_width = 1;
  std::vector<std::size_t> hidden_layers;
  Activation activation = Activation::kTanh;
  std::size_t output_width = 1;

  /// [input, hidden..., output]
  std::vector<std::size_t> layer_widths() const;
  /// Throws pinn::Error describing the first violated invariant.
  void validate() const;

  friend bool operator==(const MLPSpec&, const MLPSpec&) = default;
};

/// Weight matrix (rows = fan-out, cols = fan-in, row-major) followed by the
/// bias vector, for one affine layer.
struct LayerLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  friend bool operator==(const LayerLayout&, const LayerLayout&) = default;
};

std::vector<LayerLayout> make_layout(const MLPSpec& spec);
std::size_t parameter_count(const MLPSpec& spec);

struct WeightStore {
  std::vector<double> flat;
  std::vector<LayerLayout> layout;
  std::uint64_t seed = 0;

  friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

/// Glorot-uniform weights, zero biases; deterministic for a fixed seed.
WeightStore init_glorot(const MLPSpec& spec, std::uint64_t seed);

/// Registers one variable per flat entry ("<prefix>[i]"), bound to its value.
std::vector<ad::Expr> register_weights(ad::Graph& graph, const WeightStore& weights,
                                       std::string_view prefix = "w");

/// Builds u(inputs; w). `weight_vars` holds one node per flat entry in
/// layout order; the last layer is affine with no activation.
ad::Expr forward(const MLPSpec& spec, std::span<const ad::Expr> weight_vars, ad::Graph& graph,
                 std::span<const ad::Expr> inputs);

class ArchiveError : public Error {
 public:
  enum class Kind { kVersionMismatch, kCorrupt, kLayout, kIo };
  ArchiveError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

struct Archive {
  MLPSpec spec;
  WeightStore weights;
};

/// Binary layout: "PINN", u32 version, spec, u64 seed, u64 count, f64[count]
/// little-endian, then CRC-32 of everything before it.
std::vector<std::uint8_t> encode_archive(const MLPSpec& spec, const WeightStore& weights);
Archive decode_archive(std::span<const std::uint8_t> bytes);

void save(const WeightStore& weights, const MLPSpec& spec, const std::filesystem::path& path);
Archive load(const std::filesystem::path& path);

}  // namespace pinn::net
