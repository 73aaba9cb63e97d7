#include "weekcast/model.hpp"

#include <algorithm>
#include <cctype>

#include "weekcast/errors.hpp"

namespace weekcast {

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnn1: return "cnn1";
    case ModelKind::Cnn2: return "cnn2";
    case ModelKind::Lstm1: return "lstm1";
    case ModelKind::Lstm2: return "lstm2";
    case ModelKind::Lstm3: return "lstm3";
  }
  throw ConfigError("unknown model kind");
}

ModelKind kind_from_name(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (ModelKind kind : kAllModelKinds)
    if (kind_name(kind) == lower) return kind;
  throw ConfigError("unknown model kind '" + name + "' (expected cnn1|cnn2|lstm1|lstm2|lstm3)");
}

std::string scaler_mode_name(ScalerMode mode) {
  return mode == ScalerMode::MinMax ? "minmax" : "none";
}

ScalerMode scaler_mode_from_name(const std::string& name) {
  if (name == "none") return ScalerMode::None;
  if (name == "minmax") return ScalerMode::MinMax;
  throw ConfigError("unknown scaler mode '" + name + "' (expected none|minmax)");
}

AffineScaler fit_minmax(std::span<const double> values) {
  if (values.empty()) throw DataError("scaler: cannot fit on an empty series");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  AffineScaler s;
  s.offset = *lo;
  s.scale = *hi - *lo;
  if (s.scale == 0.0) s.scale = 1.0;
  return s;
}

namespace {

Shape kind_input_shape(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnn1: return {5, 1};
    case ModelKind::Lstm3: return {2, 1, 5, 1};
    default: return {10, 1};
  }
}

}  // namespace

Model::Model(ModelKind kind, ModelOverrides overrides, std::uint64_t seed)
    : kind_(kind),
      overrides_(overrides),
      seed_(seed),
      input_shape_(kind_input_shape(kind)),
      window_len_(shape_count(input_shape_)) {
  const auto& o = overrides_;
  Shape cur = input_shape_;
  auto push = [&](std::unique_ptr<Layer> layer) {
    cur = layer->output_shape(cur);
    layers_.push_back(std::move(layer));
  };

  switch (kind_) {
    case ModelKind::Cnn1:
    case ModelKind::Cnn2: {
      push(std::make_unique<Conv1DLayer>(1, o.cnn_filters, o.cnn_kernel));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<MaxPool1DLayer>(2));
      push(std::make_unique<FlattenLayer>());
      push(std::make_unique<DenseLayer>(cur[0], o.cnn_hidden));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<DenseLayer>(o.cnn_hidden, horizon()));
      break;
    }
    case ModelKind::Lstm1: {
      push(std::make_unique<LstmLayer>(1, o.lstm_units, false));
      push(std::make_unique<RepeatVectorLayer>(horizon()));
      push(std::make_unique<LstmLayer>(o.lstm_units, o.lstm_units, true));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<TimeDistributedDenseLayer>(o.lstm_units, o.td_hidden));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<TimeDistributedDenseLayer>(o.td_hidden, 1));
      break;
    }
    case ModelKind::Lstm2: {
      push(std::make_unique<Conv1DLayer>(1, o.encoder_filters, o.encoder_kernel));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<Conv1DLayer>(o.encoder_filters, o.encoder_filters, o.encoder_kernel));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<MaxPool1DLayer>(2));
      push(std::make_unique<FlattenLayer>());
      push(std::make_unique<RepeatVectorLayer>(horizon()));
      push(std::make_unique<LstmLayer>(cur[1], o.lstm_units, true));
      push(std::make_unique<TimeDistributedDenseLayer>(o.lstm_units, o.td_hidden));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<TimeDistributedDenseLayer>(o.td_hidden, 1));
      break;
    }
    case ModelKind::Lstm3: {
      push(std::make_unique<ConvLstmLayer>(1, o.encoder_filters, o.encoder_kernel));
      push(std::make_unique<FlattenLayer>());
      push(std::make_unique<RepeatVectorLayer>(horizon()));
      push(std::make_unique<LstmLayer>(cur[1], o.lstm_units, true));
      push(std::make_unique<TimeDistributedDenseLayer>(o.lstm_units, o.td_hidden));
      push(std::make_unique<ReluLayer>());
      push(std::make_unique<TimeDistributedDenseLayer>(o.td_hidden, 1));
      break;
    }
  }

  if (shape_count(cur) != horizon())
    throw ShapeError("model " + kind_name(kind_) + ": stack ends in " + shape_str(cur) +
                     ", expected 5 outputs");

  std::mt19937_64 rng(seed_);
  for (auto& layer : layers_) layer->init(rng);
}

void Model::set_scaler(AffineScaler scaler, ScalerMode mode) {
  if (scaler.scale == 0.0) throw ConfigError("scaler: scale must be nonzero");
  scaler_ = scaler;
  scaler_mode_ = mode;
}

Tensor Model::forward(const Tensor& input) const {
  StackCache cache;
  return forward(input, cache);
}

Tensor Model::forward(const Tensor& input, StackCache& cache) const {
  check_same_shape(input, Tensor(input_shape_), "model input");
  cache.layers.assign(layers_.size(), ForwardCache{});
  Tensor cur = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) cur = layers_[i]->forward(cur, cache.layers[i]);
  Tensor out = reshape(cur, {horizon()});
  ensure_finite(out, "model output");
  return out;
}

Tensor Model::backward(const Tensor& grad_out, const StackCache& cache, ModelGrads& grads) const {
  if (grad_out.size() != horizon())
    throw ShapeError("model backward: expected 5 output gradients, got " +
                     std::to_string(grad_out.size()));
  if (cache.layers.size() != layers_.size())
    throw ShapeError("model backward: cache does not match this stack");
  if (grads.layers.empty()) grads.layers.assign(layers_.size(), {});

  Shape tail = input_shape_;
  for (const auto& layer : layers_) tail = layer->output_shape(tail);
  Tensor grad = reshape(grad_out, tail);
  for (std::size_t i = layers_.size(); i-- > 0;)
    grad = layers_[i]->backward(grad, cache.layers[i], grads.layers[i]);
  return grad;
}

std::vector<NamedParam> Model::parameters() {
  std::vector<NamedParam> all;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto& p : layers_[i]->params())
      all.push_back({"layer" + std::to_string(i) + "." + p.name, p.tensor});
  return all;
}

TrainConfig Model::default_train_config() const {
  TrainConfig config;
  config.epochs = 20;
  config.batch_size =
      (kind_ == ModelKind::Cnn1 || kind_ == ModelKind::Cnn2) ? std::size_t{4} : std::size_t{16};
  config.seed = seed_;
  return config;
}

Model build_model(ModelKind kind, ModelOverrides overrides, std::uint64_t seed) {
  return Model(kind, overrides, seed);
}

Tensor window_input(ModelKind kind, std::span<const double> window) {
  const Shape shape = kind_input_shape(kind);
  if (window.size() != shape_count(shape))
    throw ShapeError("window_input: " + kind_name(kind) + " takes " +
                     std::to_string(shape_count(shape)) + " values, got " +
                     std::to_string(window.size()));
  return Tensor(shape, std::vector<double>(window.begin(), window.end()));
}

std::vector<double> forecast(const Model& model, std::span<const double> opens) {
  if (opens.size() < model.window_len())
    throw DataError("forecast: need at least " + std::to_string(model.window_len()) +
                    " opens, got " + std::to_string(opens.size()));
  const auto tail = opens.subspan(opens.size() - model.window_len());
  std::vector<double> scaled(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i) scaled[i] = model.scaler().transform(tail[i]);
  const Tensor out = model.forward(window_input(model.kind(), scaled));
  std::vector<double> result(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) result[i] = model.scaler().inverse(out[i]);
  return result;
}

}  // namespace weekcast
