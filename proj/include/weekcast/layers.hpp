#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "weekcast/tensor.hpp"

namespace weekcast {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

// Opaque per-layer record of intermediates captured by forward() and
// consumed by exactly one backward() call on the same input.
struct ForwardCache {
  std::vector<Tensor> slots;
};

// A layer is a pure function of (params, input). backward() accumulates
// parameter gradients into `param_grads`, resizing it to zero tensors
// congruent with params() when passed in empty, and returns grad wrt input.
class Layer {
public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, ForwardCache& cache) const = 0;
  virtual Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                          std::vector<Tensor>& param_grads) const = 0;
  virtual std::vector<NamedParam> params() { return {}; }
  virtual void init(std::mt19937_64&) {}
  virtual Shape output_shape(const Shape& input) const = 0;
};

// Weights uniform in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_fill(Tensor& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// y = xW + b on (batch, in) or a single (in,) row.
class DenseLayer : public Layer {
public:
  DenseLayer(std::size_t in, std::size_t out);
  std::string kind() const override { return "dense"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  std::vector<NamedParam> params() override;
  void init(std::mt19937_64& rng) override;
  Shape output_shape(const Shape& input) const override;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Tensor weights, bias;

private:
  std::size_t in_, out_;
};

class ReluLayer : public Layer {
public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  Shape output_shape(const Shape& input) const override { return input; }
};

// Valid cross-correlation, stride 1: (timesteps, in_channels) ->
// (timesteps - k + 1, filters).
class Conv1DLayer : public Layer {
public:
  Conv1DLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel);
  std::string kind() const override { return "conv1d"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  std::vector<NamedParam> params() override;
  void init(std::mt19937_64& rng) override;
  Shape output_shape(const Shape& input) const override;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t filters() const { return filters_; }
  std::size_t kernel() const { return kernel_; }
  Tensor kernels;  // (filters, kernel, in_channels)
  Tensor bias;     // (filters)

private:
  std::size_t in_channels_, filters_, kernel_;
};

// Non-overlapping windows, stride = width; trailing remainder dropped.
// Ties route the gradient to the earliest index.
class MaxPool1DLayer : public Layer {
public:
  explicit MaxPool1DLayer(std::size_t width = 2);
  std::string kind() const override { return "maxpool1d"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  Shape output_shape(const Shape& input) const override;

  std::size_t width() const { return width_; }

private:
  std::size_t width_;
};

class FlattenLayer : public Layer {
public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  Shape output_shape(const Shape& input) const override;
};

// Standard LSTM over (timesteps, features); h0 = c0 = 0. Gate order in
// params() is fixed as (input, forget, cell-candidate, output), input-path
// weights first, then recurrent weights, then biases.
class LstmLayer : public Layer {
public:
  LstmLayer(std::size_t features, std::size_t units, bool return_sequences);
  std::string kind() const override { return "lstm"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  std::vector<NamedParam> params() override;
  void init(std::mt19937_64& rng) override;
  Shape output_shape(const Shape& input) const override;

  std::size_t features() const { return features_; }
  std::size_t units() const { return units_; }
  bool return_sequences() const { return return_sequences_; }

  Tensor w[4];  // (features, units) per gate
  Tensor u[4];  // (units, units) per gate
  Tensor b[4];  // (units) per gate

private:
  std::size_t features_, units_;
  bool return_sequences_;
};

// (units,) -> (n, units); backward sums gradients over the n copies.
class RepeatVectorLayer : public Layer {
public:
  explicit RepeatVectorLayer(std::size_t n);
  std::string kind() const override { return "repeat_vector"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  Shape output_shape(const Shape& input) const override;

  std::size_t count() const { return n_; }

private:
  std::size_t n_;
};

// The same dense weights applied independently at each timestep of a
// (timesteps, in) input; weight gradients sum over timesteps.
class TimeDistributedDenseLayer : public Layer {
public:
  TimeDistributedDenseLayer(std::size_t in, std::size_t out);
  std::string kind() const override { return "time_distributed_dense"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  std::vector<NamedParam> params() override;
  void init(std::mt19937_64& rng) override;
  Shape output_shape(const Shape& input) const override;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Tensor weights, bias;

private:
  std::size_t in_, out_;
};

// LSTM recurrence with every matrix product replaced by a convolution over
// the (rows, cols) plane with a 1 x kernel_w kernel. Input convolutions are
// valid, recurrent convolutions on the state are same-padded, so the state
// spatial size is fixed at (rows, cols - kernel_w + 1) from the first step.
// Input (timesteps, rows, cols, channels); returns the final hidden state
// (rows, cols - kernel_w + 1, filters). Gate order as in LstmLayer.
class ConvLstmLayer : public Layer {
public:
  ConvLstmLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel_w);
  std::string kind() const override { return "convlstm"; }
  Tensor forward(const Tensor& x, ForwardCache& cache) const override;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override;
  std::vector<NamedParam> params() override;
  void init(std::mt19937_64& rng) override;
  Shape output_shape(const Shape& input) const override;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t filters() const { return filters_; }
  std::size_t kernel_w() const { return kernel_w_; }

  Tensor w[4];  // (filters, 1, kernel_w, in_channels) per gate
  Tensor u[4];  // (filters, 1, kernel_w, filters) per gate
  Tensor b[4];  // (filters) per gate

private:
  std::size_t in_channels_, filters_, kernel_w_;
};

// Compares analytic backward against central finite differences over all
// parameters and inputs; returns max(|a - n| / max(|a|, |n|, 1e-8)).
double gradient_check(Layer& layer, const Shape& input_shape, double eps, std::uint64_t seed);

}  // namespace weekcast
