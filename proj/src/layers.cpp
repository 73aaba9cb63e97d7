#include "weekcast/layers.hpp"

#include <algorithm>
#include <cmath>

namespace weekcast {

namespace {

using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::Map<const RowVec> row_map(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

Eigen::Map<RowVec> row_map(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

// Grad slots congruent with the given parameter tensors; zero-filled when
// the caller passed an empty vector, shape-checked otherwise so repeated
// backward calls accumulate.
void ensure_grad_slots(std::vector<Tensor>& grads, std::initializer_list<const Tensor*> like) {
  if (grads.empty()) {
    grads.reserve(like.size());
    for (const Tensor* t : like) grads.emplace_back(t->shape());
    return;
  }
  if (grads.size() != like.size())
    throw ShapeError("param_grads: expected " + std::to_string(like.size()) + " slots, got " +
                     std::to_string(grads.size()));
  std::size_t i = 0;
  for (const Tensor* t : like) check_same_shape(grads[i++], *t, "param_grads");
}

Tensor shape_as_tensor(const Shape& s) {
  Tensor t({s.size()});
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = static_cast<double>(s[i]);
  return t;
}

Shape tensor_as_shape(const Tensor& t) {
  Shape s(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) s[i] = static_cast<std::size_t>(t[i]);
  return s;
}

}  // namespace

void glorot_fill(Tensor& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w.values()) v = dist(rng);
}

// ---------------------------------------------------------------- dense --

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weights({in, out}), bias({out}), in_(in), out_(out) {}

std::vector<NamedParam> DenseLayer::params() { return {{"weights", &weights}, {"bias", &bias}}; }

void DenseLayer::init(std::mt19937_64& rng) { glorot_fill(weights, in_, out_, rng); }

Shape DenseLayer::output_shape(const Shape& input) const {
  if (input.size() == 1 && input[0] == in_) return {out_};
  if (input.size() == 2 && input[1] == in_) return {input[0], out_};
  throw ShapeError("dense: input " + shape_str(input) + " incompatible with " +
                   std::to_string(in_) + " features");
}

Tensor DenseLayer::forward(const Tensor& x, ForwardCache& cache) const {
  output_shape(x.shape());
  const Tensor x2 = x.rank() == 1 ? reshape(x, {1, in_}) : x;
  Tensor y({x2.dim(0), out_});
  y.matrix().noalias() = x2.matrix() * weights.matrix();
  y.matrix().rowwise() += row_map(bias);
  cache.slots = {x};
  return x.rank() == 1 ? reshape(y, {out_}) : y;
}

Tensor DenseLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                            std::vector<Tensor>& param_grads) const {
  ensure_grad_slots(param_grads, {&weights, &bias});
  const Tensor& x = cache.slots.at(0);
  const Tensor x2 = x.rank() == 1 ? reshape(x, {1, in_}) : x;
  const Tensor g2 = grad_out.rank() == 1 ? reshape(grad_out, {1, out_}) : grad_out;
  check_same_shape(g2, Tensor({x2.dim(0), out_}), "dense backward");
  param_grads[0].matrix().noalias() += x2.matrix().transpose() * g2.matrix();
  row_map(param_grads[1]) += g2.matrix().colwise().sum();
  Tensor gx({x2.dim(0), in_});
  gx.matrix().noalias() = g2.matrix() * weights.matrix().transpose();
  return x.rank() == 1 ? reshape(gx, {in_}) : gx;
}

// ----------------------------------------------------------------- relu --

Tensor ReluLayer::forward(const Tensor& x, ForwardCache& cache) const {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  cache.slots = {x};
  return y;
}

// Subgradient at exactly 0 is 0.
Tensor ReluLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                           std::vector<Tensor>&) const {
  const Tensor& x = cache.slots.at(0);
  check_same_shape(grad_out, x, "relu backward");
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return gx;
}

// --------------------------------------------------------------- conv1d --

Conv1DLayer::Conv1DLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel)
    : kernels({filters, kernel, in_channels}),
      bias({filters}),
      in_channels_(in_channels),
      filters_(filters),
      kernel_(kernel) {}

std::vector<NamedParam> Conv1DLayer::params() {
  return {{"kernels", &kernels}, {"bias", &bias}};
}

void Conv1DLayer::init(std::mt19937_64& rng) {
  glorot_fill(kernels, kernel_ * in_channels_, kernel_ * filters_, rng);
}

Shape Conv1DLayer::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != in_channels_)
    throw ShapeError("conv1d: input " + shape_str(input) + " incompatible with " +
                     std::to_string(in_channels_) + " channels");
  if (input[0] < kernel_)
    throw ShapeError("conv1d: " + std::to_string(input[0]) + " timesteps < kernel " +
                     std::to_string(kernel_));
  return {input[0] - kernel_ + 1, filters_};
}

Tensor Conv1DLayer::forward(const Tensor& x, ForwardCache& cache) const {
  Tensor y(output_shape(x.shape()));
  const std::size_t out_t = y.dim(0);
  for (std::size_t t = 0; t < out_t; ++t)
    for (std::size_t f = 0; f < filters_; ++f) {
      double acc = bias[f];
      for (std::size_t j = 0; j < kernel_; ++j)
        for (std::size_t c = 0; c < in_channels_; ++c) acc += kernels(f, j, c) * x(t + j, c);
      y(t, f) = acc;
    }
  cache.slots = {x};
  return y;
}

Tensor Conv1DLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                             std::vector<Tensor>& param_grads) const {
  ensure_grad_slots(param_grads, {&kernels, &bias});
  const Tensor& x = cache.slots.at(0);
  check_same_shape(grad_out, Tensor(output_shape(x.shape())), "conv1d backward");
  Tensor gx(x.shape());
  const std::size_t out_t = grad_out.dim(0);
  for (std::size_t t = 0; t < out_t; ++t)
    for (std::size_t f = 0; f < filters_; ++f) {
      const double g = grad_out(t, f);
      param_grads[1][f] += g;
      for (std::size_t j = 0; j < kernel_; ++j)
        for (std::size_t c = 0; c < in_channels_; ++c) {
          param_grads[0](f, j, c) += g * x(t + j, c);
          gx(t + j, c) += g * kernels(f, j, c);
        }
    }
  return gx;
}

// ------------------------------------------------------------- maxpool1d --

MaxPool1DLayer::MaxPool1DLayer(std::size_t width) : width_(width) {
  if (width_ < 1) throw ShapeError("maxpool1d: width must be >= 1");
}

Shape MaxPool1DLayer::output_shape(const Shape& input) const {
  if (input.size() != 2) throw ShapeError("maxpool1d: expected rank-2, got " + shape_str(input));
  if (input[0] < width_)
    throw ShapeError("maxpool1d: " + std::to_string(input[0]) + " timesteps < width " +
                     std::to_string(width_));
  return {input[0] / width_, input[1]};
}

Tensor MaxPool1DLayer::forward(const Tensor& x, ForwardCache& cache) const {
  Tensor y(output_shape(x.shape()));
  Tensor argmax(y.shape());
  const std::size_t channels = x.dim(1);
  for (std::size_t t = 0; t < y.dim(0); ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      std::size_t best = t * width_;
      for (std::size_t j = 1; j < width_; ++j)
        if (x(t * width_ + j, c) > x(best, c)) best = t * width_ + j;
      y(t, c) = x(best, c);
      argmax(t, c) = static_cast<double>(best);
    }
  cache.slots = {shape_as_tensor(x.shape()), argmax};
  return y;
}

Tensor MaxPool1DLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                                std::vector<Tensor>&) const {
  Tensor gx(tensor_as_shape(cache.slots.at(0)));
  const Tensor& argmax = cache.slots.at(1);
  check_same_shape(grad_out, Tensor(output_shape(gx.shape())), "maxpool1d backward");
  for (std::size_t t = 0; t < grad_out.dim(0); ++t)
    for (std::size_t c = 0; c < grad_out.dim(1); ++c)
      gx(static_cast<std::size_t>(argmax(t, c)), c) += grad_out(t, c);
  return gx;
}

// -------------------------------------------------------------- flatten --

Shape FlattenLayer::output_shape(const Shape& input) const { return {shape_count(input)}; }

Tensor FlattenLayer::forward(const Tensor& x, ForwardCache& cache) const {
  cache.slots = {shape_as_tensor(x.shape())};
  return reshape(x, {x.size()});
}

Tensor FlattenLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                              std::vector<Tensor>&) const {
  return reshape(grad_out, tensor_as_shape(cache.slots.at(0)));
}

// ----------------------------------------------------------------- lstm --

namespace {
// Cache slot order shared by forward/backward.
enum LstmSlot { kX = 0, kGateI, kGateF, kGateC, kGateO, kCell, kTanhCell, kHidden, kSlotCount };
}  // namespace

LstmLayer::LstmLayer(std::size_t features, std::size_t units, bool return_sequences)
    : features_(features), units_(units), return_sequences_(return_sequences) {
  for (int g = 0; g < 4; ++g) {
    w[g] = Tensor({features_, units_});
    u[g] = Tensor({units_, units_});
    b[g] = Tensor({units_});
  }
}

std::vector<NamedParam> LstmLayer::params() {
  return {{"w_i", &w[0]}, {"w_f", &w[1]}, {"w_c", &w[2]}, {"w_o", &w[3]},
          {"u_i", &u[0]}, {"u_f", &u[1]}, {"u_c", &u[2]}, {"u_o", &u[3]},
          {"b_i", &b[0]}, {"b_f", &b[1]}, {"b_c", &b[2]}, {"b_o", &b[3]}};
}

void LstmLayer::init(std::mt19937_64& rng) {
  for (int g = 0; g < 4; ++g) glorot_fill(w[g], features_, units_, rng);
  for (int g = 0; g < 4; ++g) glorot_fill(u[g], units_, units_, rng);
}

Shape LstmLayer::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != features_)
    throw ShapeError("lstm: input " + shape_str(input) + " incompatible with " +
                     std::to_string(features_) + " features");
  if (return_sequences_) return {input[0], units_};
  return {units_};
}

Tensor LstmLayer::forward(const Tensor& x, ForwardCache& cache) const {
  output_shape(x.shape());
  const std::size_t steps = x.dim(0);
  cache.slots.assign(kSlotCount, Tensor());
  cache.slots[kX] = x;
  for (int s = kGateI; s < kSlotCount; ++s) cache.slots[s] = Tensor({steps, units_});

  RowVec h = RowVec::Zero(units_);
  RowVec c = RowVec::Zero(units_);
  RowVec a[4];
  for (std::size_t t = 0; t < steps; ++t) {
    for (int g = 0; g < 4; ++g)
      a[g] = x.matrix().row(t) * w[g].matrix() + h * u[g].matrix() + row_map(b[g]);
    for (std::size_t k = 0; k < units_; ++k) {
      const double gi = sigmoid(a[0][k]);
      const double gf = sigmoid(a[1][k]);
      const double gc = std::tanh(a[2][k]);
      const double go = sigmoid(a[3][k]);
      const double cn = gf * c[k] + gi * gc;
      const double tc = std::tanh(cn);
      const double hn = go * tc;
      if (!std::isfinite(hn) || !std::isfinite(cn))
        throw NumericError("lstm: non-finite state at timestep " + std::to_string(t));
      cache.slots[kGateI](t, k) = gi;
      cache.slots[kGateF](t, k) = gf;
      cache.slots[kGateC](t, k) = gc;
      cache.slots[kGateO](t, k) = go;
      cache.slots[kCell](t, k) = cn;
      cache.slots[kTanhCell](t, k) = tc;
      cache.slots[kHidden](t, k) = hn;
      c[k] = cn;
      h[k] = hn;
      // o <= 1 and |tanh| <= 1 keep every component in [-1, 1]
      if (std::fabs(hn) > 1.0 + 1e-12)
        throw NumericError("lstm: hidden state bound violated at timestep " + std::to_string(t));
    }
  }
  if (return_sequences_) return cache.slots[kHidden];
  return reshape(slice_rows(cache.slots[kHidden], steps - 1, steps), {units_});
}

Tensor LstmLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                           std::vector<Tensor>& param_grads) const {
  ensure_grad_slots(param_grads, {&w[0], &w[1], &w[2], &w[3], &u[0], &u[1], &u[2], &u[3], &b[0],
                                  &b[1], &b[2], &b[3]});
  const Tensor& x = cache.slots.at(kX);
  const std::size_t steps = x.dim(0);
  check_same_shape(grad_out, Tensor(output_shape(x.shape())), "lstm backward");
  const Tensor g2 =
      return_sequences_ ? grad_out : reshape(grad_out, {1, units_});  // final-state grad as a row

  const Tensor& gate_i = cache.slots[kGateI];
  const Tensor& gate_f = cache.slots[kGateF];
  const Tensor& gate_c = cache.slots[kGateC];
  const Tensor& gate_o = cache.slots[kGateO];
  const Tensor& cell = cache.slots[kCell];
  const Tensor& tanh_cell = cache.slots[kTanhCell];

  Tensor gx(x.shape());
  RowVec dh_next = RowVec::Zero(units_);
  RowVec dc_next = RowVec::Zero(units_);
  RowVec da[4];
  for (int g = 0; g < 4; ++g) da[g] = RowVec::Zero(units_);

  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t k = 0; k < units_; ++k) {
      double dh = dh_next[k];
      if (return_sequences_)
        dh += g2(t, k);
      else if (t == steps - 1)
        dh += g2(std::size_t{0}, k);
      const double tc = tanh_cell(t, k);
      const double go = gate_o(t, k);
      const double dout = dh * tc;
      double dc = dh * go * (1.0 - tc * tc) + dc_next[k];
      const double c_prev = t > 0 ? cell(t - 1, k) : 0.0;
      const double gi = gate_i(t, k);
      const double gf = gate_f(t, k);
      const double gc = gate_c(t, k);
      da[0][k] = dc * gc * gi * (1.0 - gi);
      da[1][k] = dc * c_prev * gf * (1.0 - gf);
      da[2][k] = dc * gi * (1.0 - gc * gc);
      da[3][k] = dout * go * (1.0 - go);
      dc_next[k] = dc * gf;
    }
    dh_next.setZero();
    for (int g = 0; g < 4; ++g) {
      param_grads[g].matrix().noalias() += x.matrix().row(t).transpose() * da[g];
      if (t > 0) {
        const auto h_prev = cache.slots[kHidden].matrix().row(t - 1);
        param_grads[4 + g].matrix().noalias() += h_prev.transpose() * da[g];
        dh_next.noalias() += da[g] * u[g].matrix().transpose();
      }
      row_map(param_grads[8 + g]) += da[g];
      gx.matrix().row(t).noalias() += da[g] * w[g].matrix().transpose();
    }
  }
  return gx;
}

// -------------------------------------------------------- repeat_vector --

RepeatVectorLayer::RepeatVectorLayer(std::size_t n) : n_(n) {
  if (n_ < 1) throw ShapeError("repeat_vector: count must be >= 1");
}

Shape RepeatVectorLayer::output_shape(const Shape& input) const {
  if (input.size() != 1)
    throw ShapeError("repeat_vector: expected rank-1 input, got " + shape_str(input));
  return {n_, input[0]};
}

Tensor RepeatVectorLayer::forward(const Tensor& x, ForwardCache& cache) const {
  Tensor y(output_shape(x.shape()));
  for (std::size_t r = 0; r < n_; ++r)
    std::copy(x.data(), x.data() + x.size(), y.data() + r * x.size());
  cache.slots = {shape_as_tensor(x.shape())};
  return y;
}

Tensor RepeatVectorLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                                   std::vector<Tensor>&) const {
  Shape in_shape = tensor_as_shape(cache.slots.at(0));
  check_same_shape(grad_out, Tensor(output_shape(in_shape)), "repeat_vector backward");
  Tensor gx(in_shape);
  for (std::size_t r = 0; r < n_; ++r)
    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += grad_out(r, k);
  return gx;
}

// ----------------------------------------------- time-distributed dense --

TimeDistributedDenseLayer::TimeDistributedDenseLayer(std::size_t in, std::size_t out)
    : weights({in, out}), bias({out}), in_(in), out_(out) {}

std::vector<NamedParam> TimeDistributedDenseLayer::params() {
  return {{"weights", &weights}, {"bias", &bias}};
}

void TimeDistributedDenseLayer::init(std::mt19937_64& rng) { glorot_fill(weights, in_, out_, rng); }

Shape TimeDistributedDenseLayer::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != in_)
    throw ShapeError("time_distributed_dense: input " + shape_str(input) +
                     " incompatible with " + std::to_string(in_) + " features");
  return {input[0], out_};
}

Tensor TimeDistributedDenseLayer::forward(const Tensor& x, ForwardCache& cache) const {
  output_shape(x.shape());
  Tensor y({x.dim(0), out_});
  y.matrix().noalias() = x.matrix() * weights.matrix();
  y.matrix().rowwise() += row_map(bias);
  cache.slots = {x};
  return y;
}

// Shared weights: gradients sum over timesteps.
Tensor TimeDistributedDenseLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                                           std::vector<Tensor>& param_grads) const {
  ensure_grad_slots(param_grads, {&weights, &bias});
  const Tensor& x = cache.slots.at(0);
  check_same_shape(grad_out, Tensor(output_shape(x.shape())), "time_distributed_dense backward");
  param_grads[0].matrix().noalias() += x.matrix().transpose() * grad_out.matrix();
  row_map(param_grads[1]) += grad_out.matrix().colwise().sum();
  Tensor gx(x.shape());
  gx.matrix().noalias() = grad_out.matrix() * weights.matrix().transpose();
  return gx;
}

// ------------------------------------------------------------- convlstm --

ConvLstmLayer::ConvLstmLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel_w)
    : in_channels_(in_channels), filters_(filters), kernel_w_(kernel_w) {
  if (kernel_w_ % 2 == 0)
    throw ShapeError("convlstm: kernel width must be odd for same-padded recurrence");
  for (int g = 0; g < 4; ++g) {
    w[g] = Tensor({filters_, 1, kernel_w_, in_channels_});
    u[g] = Tensor({filters_, 1, kernel_w_, filters_});
    b[g] = Tensor({filters_});
  }
}

std::vector<NamedParam> ConvLstmLayer::params() {
  return {{"w_i", &w[0]}, {"w_f", &w[1]}, {"w_c", &w[2]}, {"w_o", &w[3]},
          {"u_i", &u[0]}, {"u_f", &u[1]}, {"u_c", &u[2]}, {"u_o", &u[3]},
          {"b_i", &b[0]}, {"b_f", &b[1]}, {"b_c", &b[2]}, {"b_o", &b[3]}};
}

void ConvLstmLayer::init(std::mt19937_64& rng) {
  for (int g = 0; g < 4; ++g) glorot_fill(w[g], kernel_w_ * in_channels_, kernel_w_ * filters_, rng);
  for (int g = 0; g < 4; ++g) glorot_fill(u[g], kernel_w_ * filters_, kernel_w_ * filters_, rng);
}

Shape ConvLstmLayer::output_shape(const Shape& input) const {
  if (input.size() != 4 || input[3] != in_channels_)
    throw ShapeError("convlstm: input " + shape_str(input) +
                     " is not (timesteps, rows, cols, channels) with " +
                     std::to_string(in_channels_) + " channels");
  if (input[2] < kernel_w_)
    throw ShapeError("convlstm: " + std::to_string(input[2]) + " cols < kernel width " +
                     std::to_string(kernel_w_));
  return {input[1], input[2] - kernel_w_ + 1, filters_};
}

namespace {
enum ConvLstmSlot {
  kClX = 0,
  kClGateI,
  kClGateF,
  kClGateC,
  kClGateO,
  kClCell,
  kClTanhCell,
  kClHidden,
  kClSlotCount
};
}  // namespace

Tensor ConvLstmLayer::forward(const Tensor& x, ForwardCache& cache) const {
  const Shape state_shape = output_shape(x.shape());
  const std::size_t steps = x.dim(0), rows = x.dim(1), cols = x.dim(2);
  const std::size_t outw = state_shape[1];
  const std::size_t pad = (kernel_w_ - 1) / 2;

  cache.slots.assign(kClSlotCount, Tensor());
  cache.slots[kClX] = x;
  for (int s = kClGateI; s < kClSlotCount; ++s)
    cache.slots[s] = Tensor({steps, rows, outw, filters_});

  Tensor h(state_shape), c(state_shape);
  Tensor a[4];
  for (std::size_t t = 0; t < steps; ++t) {
    for (int g = 0; g < 4; ++g) {
      a[g] = Tensor(state_shape);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t p = 0; p < outw; ++p)
          for (std::size_t f = 0; f < filters_; ++f) {
            double acc = b[g][f];
            // valid convolution of the input slab
            for (std::size_t j = 0; j < kernel_w_; ++j)
              for (std::size_t ci = 0; ci < in_channels_; ++ci)
                acc += w[g](f, std::size_t{0}, j, ci) * x(t, r, p + j, ci);
            // same-padded convolution of the previous hidden state
            if (t > 0)
              for (std::size_t j = 0; j < kernel_w_; ++j) {
                const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p + j) -
                                         static_cast<std::ptrdiff_t>(pad);
                if (q < 0 || q >= static_cast<std::ptrdiff_t>(outw)) continue;
                for (std::size_t cf = 0; cf < filters_; ++cf)
                  acc += u[g](f, std::size_t{0}, j, cf) * h(r, static_cast<std::size_t>(q), cf);
              }
            a[g](r, p, f) = acc;
          }
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double gi = sigmoid(a[0][i]);
      const double gf = sigmoid(a[1][i]);
      const double gc = std::tanh(a[2][i]);
      const double go = sigmoid(a[3][i]);
      const double cn = gf * c[i] + gi * gc;
      const double tc = std::tanh(cn);
      const double hn = go * tc;
      if (!std::isfinite(hn) || !std::isfinite(cn))
        throw NumericError("convlstm: non-finite state at timestep " + std::to_string(t));
      cache.slots[kClGateI][t * h.size() + i] = gi;
      cache.slots[kClGateF][t * h.size() + i] = gf;
      cache.slots[kClGateC][t * h.size() + i] = gc;
      cache.slots[kClGateO][t * h.size() + i] = go;
      cache.slots[kClCell][t * h.size() + i] = cn;
      cache.slots[kClTanhCell][t * h.size() + i] = tc;
      cache.slots[kClHidden][t * h.size() + i] = hn;
      c[i] = cn;
      h[i] = hn;
    }
  }
  return h;
}

Tensor ConvLstmLayer::backward(const Tensor& grad_out, const ForwardCache& cache,
                               std::vector<Tensor>& param_grads) const {
  ensure_grad_slots(param_grads, {&w[0], &w[1], &w[2], &w[3], &u[0], &u[1], &u[2], &u[3], &b[0],
                                  &b[1], &b[2], &b[3]});
  const Tensor& x = cache.slots.at(kClX);
  const Shape state_shape = output_shape(x.shape());
  check_same_shape(grad_out, Tensor(state_shape), "convlstm backward");
  const std::size_t steps = x.dim(0), rows = x.dim(1);
  const std::size_t outw = state_shape[1];
  const std::size_t pad = (kernel_w_ - 1) / 2;
  const std::size_t state_n = shape_count(state_shape);

  Tensor gx(x.shape());
  Tensor dh_next(state_shape), dc_next(state_shape);
  Tensor da[4];
  for (int g = 0; g < 4; ++g) da[g] = Tensor(state_shape);

  auto slot = [&](int s, std::size_t t, std::size_t i) -> double {
    return cache.slots[s][t * state_n + i];
  };

  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t i = 0; i < state_n; ++i) {
      double dh = dh_next[i] + (t == steps - 1 ? grad_out[i] : 0.0);
      const double tc = slot(kClTanhCell, t, i);
      const double go = slot(kClGateO, t, i);
      const double dout = dh * tc;
      double dc = dh * go * (1.0 - tc * tc) + dc_next[i];
      const double c_prev = t > 0 ? slot(kClCell, t - 1, i) : 0.0;
      const double gi = slot(kClGateI, t, i);
      const double gf = slot(kClGateF, t, i);
      const double gc = slot(kClGateC, t, i);
      da[0][i] = dc * gc * gi * (1.0 - gi);
      da[1][i] = dc * c_prev * gf * (1.0 - gf);
      da[2][i] = dc * gi * (1.0 - gc * gc);
      da[3][i] = dout * go * (1.0 - go);
      dc_next[i] = dc * gf;
    }
    for (auto& v : dh_next.values()) v = 0.0;
    for (int g = 0; g < 4; ++g) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t p = 0; p < outw; ++p)
          for (std::size_t f = 0; f < filters_; ++f) {
            const double d = da[g](r, p, f);
            param_grads[8 + g][f] += d;
            for (std::size_t j = 0; j < kernel_w_; ++j) {
              for (std::size_t ci = 0; ci < in_channels_; ++ci) {
                param_grads[g](f, std::size_t{0}, j, ci) += d * x(t, r, p + j, ci);
                gx(t, r, p + j, ci) += d * w[g](f, std::size_t{0}, j, ci);
              }
              if (t > 0) {
                const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p + j) -
                                         static_cast<std::ptrdiff_t>(pad);
                if (q < 0 || q >= static_cast<std::ptrdiff_t>(outw)) continue;
                for (std::size_t cf = 0; cf < filters_; ++cf) {
                  const std::size_t hi =
                      (r * outw + static_cast<std::size_t>(q)) * filters_ + cf;
                  param_grads[4 + g](f, std::size_t{0}, j, cf) +=
                      d * cache.slots[kClHidden][(t - 1) * state_n + hi];
                  dh_next[hi] += d * u[g](f, std::size_t{0}, j, cf);
                }
              }
            }
          }
    }
  }
  return gx;
}

// -------------------------------------------------------- gradient check --

double gradient_check(Layer& layer, const Shape& input_shape, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  layer.init(rng);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  Tensor x(input_shape);
  for (auto& v : x.values()) v = dist(rng);

  ForwardCache cache;
  const Tensor y = layer.forward(x, cache);
  Tensor weight(y.shape());
  for (auto& v : weight.values()) v = dist(rng);

  // scalar probe loss: sum of the weighted output
  auto loss = [&](const Tensor& in) {
    ForwardCache scratch;
    const Tensor out = layer.forward(in, scratch);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weight[i];
    return s;
  };

  std::vector<Tensor> pgrads;
  const Tensor gx = layer.backward(weight, cache, pgrads);

  double max_rel = 0.0;
  auto compare = [&max_rel](double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
  };

  Tensor probe = x;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + eps;
    const double lp = loss(probe);
    probe[i] = keep - eps;
    const double lm = loss(probe);
    probe[i] = keep;
    compare(gx[i], (lp - lm) / (2.0 * eps));
  }

  auto ps = layer.params();
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    Tensor& theta = *ps[pi].tensor;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + eps;
      const double lp = loss(x);
      theta[i] = keep - eps;
      const double lm = loss(x);
      theta[i] = keep;
      compare(pgrads[pi][i], (lp - lm) / (2.0 * eps));
    }
  }
  return max_rel;
}

}  // namespace weekcast
