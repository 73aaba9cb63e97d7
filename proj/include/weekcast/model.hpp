#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "weekcast/layers.hpp"
#include "weekcast/optim.hpp"

namespace weekcast {

enum class ModelKind { Cnn1, Cnn2, Lstm1, Lstm2, Lstm3 };

constexpr std::array<ModelKind, 5> kAllModelKinds = {
    ModelKind::Cnn1, ModelKind::Cnn2, ModelKind::Lstm1, ModelKind::Lstm2, ModelKind::Lstm3};

std::string kind_name(ModelKind kind);
ModelKind kind_from_name(const std::string& name);

// Widths the published figures leave open, with conventional defaults.
struct ModelOverrides {
  std::size_t cnn_filters = 16;
  std::size_t cnn_kernel = 3;
  std::size_t cnn_hidden = 10;
  std::size_t encoder_filters = 64;  // conv filters in lstm2 / convlstm filters in lstm3
  std::size_t encoder_kernel = 3;
  std::size_t lstm_units = 200;
  std::size_t td_hidden = 100;

  bool operator==(const ModelOverrides&) const = default;
};

enum class ScalerMode { None, MinMax };

std::string scaler_mode_name(ScalerMode mode);
ScalerMode scaler_mode_from_name(const std::string& name);

// y = (x - offset) / scale. Identity by default.
struct AffineScaler {
  double offset = 0.0;
  double scale = 1.0;

  double transform(double x) const { return (x - offset) / scale; }
  double inverse(double y) const { return y * scale + offset; }

  bool operator==(const AffineScaler&) const = default;
};

// Fit so the observed range maps onto [0, 1]; constant series map to offset
// with scale 1.
AffineScaler fit_minmax(std::span<const double> values);

struct StackCache {
  std::vector<ForwardCache> layers;
};

// Per-layer gradient tensors, ordered like each layer's params().
struct ModelGrads {
  std::vector<std::vector<Tensor>> layers;
};

// An ordered layer stack mapping one input window of open values to the 5
// opens of the following week.
class Model {
 public:
  Model(ModelKind kind, ModelOverrides overrides, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  const ModelOverrides& overrides() const { return overrides_; }
  std::uint64_t seed() const { return seed_; }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t window_len() const { return window_len_; }
  static constexpr std::size_t horizon() { return 5; }

  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  ScalerMode scaler_mode() const { return scaler_mode_; }
  const AffineScaler& scaler() const { return scaler_; }
  void set_scaler(AffineScaler scaler, ScalerMode mode);

  // Full forward pass; the result always has exactly 5 finite entries.
  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, StackCache& cache) const;

  // Accumulates parameter gradients into `grads` (sized on first use) and
  // returns the gradient wrt the input.
  Tensor backward(const Tensor& grad_out, const StackCache& cache, ModelGrads& grads) const;

  // Flattened mutable views named "layer<i>.<param>".
  std::vector<NamedParam> parameters();

  TrainConfig default_train_config() const;

 private:
  ModelKind kind_;
  ModelOverrides overrides_;
  std::uint64_t seed_;
  Shape input_shape_;
  std::size_t window_len_;
  ScalerMode scaler_mode_ = ScalerMode::None;
  AffineScaler scaler_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

Model build_model(ModelKind kind, ModelOverrides overrides = {}, std::uint64_t seed = 0);

// Trailing `window_len` opens shaped for the kind: (5,1) or (10,1), or
// (2,1,5,1) for the convolutional recurrent variant.
Tensor window_input(ModelKind kind, std::span<const double> window);

// Forecast from the trailing window of `opens`, applying the model's scaler
// on the way in and inverting it on the way out.
std::vector<double> forecast(const Model& model, std::span<const double> opens);

}  // namespace weekcast
