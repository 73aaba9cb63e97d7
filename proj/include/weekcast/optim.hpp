#pragma once

#include <cstdint>
#include <vector>

#include "weekcast/tensor.hpp"

namespace weekcast {

class Model;

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Moment estimates are sized lazily on the first step and must stay
// congruent with the parameter list afterwards.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

// One update: m <- b1*m + (1-b1)*g, v <- b2*v + (1-b2)*g^2, bias-corrected,
// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
// Throws NumericError on any non-finite gradient entry.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state);

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

// Mean squared error over every entry; grad = 2*(pred - target)/N.
LossGrad mse_loss(const Tensor& predictions, const Tensor& targets);

struct TrainSample {
  Tensor input;
  Tensor target;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  bool shuffle = true;
  AdamConfig adam;
};

// Mini-batch gradient descent with Adam. Sample order is reshuffled every
// epoch from the seeded generator when shuffle is on; a final short batch is
// kept. Gradients are averaged over the batch. Returns one mean batch loss
// per epoch.
std::vector<double> train(Model& model, const std::vector<TrainSample>& samples,
                          const TrainConfig& config);

}  // namespace weekcast
