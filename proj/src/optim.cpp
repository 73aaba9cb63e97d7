#include "weekcast/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "weekcast/errors.hpp"
#include "weekcast/model.hpp"

namespace weekcast {

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam: state was sized for a different parameter list");
  }

  // Validate before touching any state so a bad batch aborts cleanly.
  for (std::size_t i = 0; i < grads.size(); ++i) {
    check_same_shape(grads[i], *params[i], "adam gradient");
    if (!grads[i].all_finite())
      throw NumericError("adam: non-finite gradient in parameter " + std::to_string(i));
  }

  state.step += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      theta[j] -= c.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.epsilon);
    }
  }
}

LossGrad mse_loss(const Tensor& predictions, const Tensor& targets) {
  check_same_shape(predictions, targets, "mse_loss");
  LossGrad out;
  out.grad = Tensor(predictions.shape());
  const double n = static_cast<double>(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    out.loss += d * d / n;
    out.grad[i] = 2.0 * d / n;
  }
  return out;
}

std::vector<double> train(Model& model, const std::vector<TrainSample>& samples,
                          const TrainConfig& config) {
  if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (samples.empty()) throw ConfigError("train: no samples");

  auto named = model.parameters();
  std::vector<Tensor*> params;
  params.reserve(named.size());
  for (auto& p : named) params.push_back(p.tensor);

  AdamState state{config.adam};
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> history;
  history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, samples.size());
      const double count = static_cast<double>(end - start);
      ModelGrads grads;
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const TrainSample& sample = samples[order[k]];
        StackCache cache;
        const Tensor pred = model.forward(sample.input, cache);
        LossGrad lg = mse_loss(pred, sample.target);
        batch_loss += lg.loss / count;
        model.backward(lg.grad, cache, grads);
      }
      if (!std::isfinite(batch_loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                           " batch " + std::to_string(batches + 1));
      std::vector<Tensor> flat;
      flat.reserve(params.size());
      for (auto& layer_grads : grads.layers)
        for (auto& g : layer_grads) flat.push_back(scale(g, 1.0 / count));
      adam_step(params, flat, state);
      epoch_loss += batch_loss;
      ++batches;
    }
    history.push_back(epoch_loss / static_cast<double>(batches));
  }
  return history;
}

}  // namespace weekcast
