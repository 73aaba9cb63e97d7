#include <cmath>
#include <random>

#include "doctest.h"
#include "weekcast/layers.hpp"

using namespace weekcast;

namespace {

Tensor run_forward(const Layer& layer, const Tensor& x) {
  ForwardCache cache;
  return layer.forward(x, cache);
}

}  // namespace

TEST_CASE("glorot_fill stays in bound and is seed-deterministic") {
  Tensor a({4, 4}), b({4, 4});
  std::mt19937_64 r1(42), r2(42);
  glorot_fill(a, 4, 4, r1);
  glorot_fill(b, 4, 4, r2);
  const double limit = std::sqrt(6.0 / 8.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::fabs(a[i]) <= limit);
    CHECK(a[i] == b[i]);
  }
}

TEST_CASE("dense forward matches hand result") {
  DenseLayer d(2, 1);
  d.weights(0, 0) = 1.0;
  d.weights(1, 0) = 1.0;
  d.bias[0] = 0.5;

  Tensor batch({1, 2}, {1.0, 2.0});
  Tensor y = run_forward(d, batch);
  CHECK(y.shape() == Shape{1, 1});
  CHECK(y[0] == doctest::Approx(3.5));

  Tensor row({2}, {1.0, 2.0});
  Tensor y1 = run_forward(d, row);
  CHECK(y1.shape() == Shape{1});
  CHECK(y1[0] == doctest::Approx(3.5));

  CHECK_THROWS_AS(run_forward(d, Tensor({3})), ShapeError);
}

TEST_CASE("dense backward matches hand result") {
  DenseLayer d(2, 2);
  d.weights = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor x({1, 2}, {5.0, 6.0});
  ForwardCache cache;
  d.forward(x, cache);

  std::vector<Tensor> grads;
  Tensor g({1, 2}, {1.0, 1.0});
  Tensor gx = d.backward(g, cache, grads);
  // dW = x^T g, db = g, dx = g W^T
  CHECK(grads[0](0, 0) == doctest::Approx(5.0));
  CHECK(grads[0](1, 1) == doctest::Approx(6.0));
  CHECK(grads[1][0] == doctest::Approx(1.0));
  CHECK(gx(0, 0) == doctest::Approx(3.0));
  CHECK(gx(0, 1) == doctest::Approx(7.0));

  // second call accumulates
  d.backward(g, cache, grads);
  CHECK(grads[0](0, 0) == doctest::Approx(10.0));
}

TEST_CASE("relu clamps forward and gates backward") {
  ReluLayer r;
  Tensor x({4}, {-1.0, 0.0, 2.0, -3.0});
  ForwardCache cache;
  Tensor y = r.forward(x, cache);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);

  std::vector<Tensor> none;
  Tensor g({4}, {1.0, 1.0, 1.0, 1.0});
  Tensor gx = r.backward(g, cache, none);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);  // subgradient at 0 is 0
  CHECK(gx[2] == 1.0);
  CHECK(gx[3] == 0.0);
}

TEST_CASE("conv1d forward matches hand result") {
  Conv1DLayer c(1, 1, 3);
  c.kernels(0, 0, 0) = 1.0;
  c.kernels(0, 1, 0) = 0.0;
  c.kernels(0, 2, 0) = -1.0;

  Tensor x({5, 1}, {1, 2, 3, 4, 5});
  Tensor y = run_forward(c, x);
  CHECK(y.shape() == Shape{3, 1});
  for (std::size_t t = 0; t < 3; ++t) CHECK(y(t, std::size_t{0}) == doctest::Approx(-2.0));

  CHECK(c.output_shape({5, 1}) == Shape{3, 1});
  CHECK_THROWS_AS(c.output_shape({2, 1}), ShapeError);
  CHECK_THROWS_AS(c.output_shape({5, 2}), ShapeError);
}

TEST_CASE("maxpool picks maxima and routes gradients to earliest tie") {
  MaxPool1DLayer p(2);
  Tensor x({4, 1}, {3.0, 1.0, 2.0, 5.0});
  ForwardCache cache;
  Tensor y = p.forward(x, cache);
  CHECK(y.shape() == Shape{2, 1});
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 5.0);

  std::vector<Tensor> none;
  Tensor g({2, 1}, {1.0, 1.0});
  Tensor gx = p.backward(g, cache, none);
  CHECK(gx[0] == 1.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 0.0);
  CHECK(gx[3] == 1.0);

  Tensor tie({2, 1}, {2.0, 2.0});
  ForwardCache c2;
  p.forward(tie, c2);
  Tensor gt = p.backward(Tensor({1, 1}, {1.0}), c2, none);
  CHECK(gt[0] == 1.0);
  CHECK(gt[1] == 0.0);

  // trailing odd element dropped
  CHECK(p.output_shape({5, 3}) == Shape{2, 3});
  CHECK_THROWS_AS(p.output_shape({1, 3}), ShapeError);
  CHECK_THROWS_AS(MaxPool1DLayer(0), ShapeError);
}

TEST_CASE("flatten keeps order and restores shape on backward") {
  FlattenLayer f;
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  ForwardCache cache;
  Tensor y = f.forward(x, cache);
  CHECK(y.shape() == Shape{6});
  CHECK(y[4] == 5.0);

  std::vector<Tensor> none;
  Tensor gx = f.backward(y, cache, none);
  CHECK(gx.shape() == Shape{2, 3});
  CHECK(gx(1, 1) == 5.0);
}

TEST_CASE("repeat_vector copies rows and sums backward") {
  RepeatVectorLayer rv(3);
  Tensor x({2}, {4.0, 7.0});
  ForwardCache cache;
  Tensor y = rv.forward(x, cache);
  CHECK(y.shape() == Shape{3, 2});
  CHECK(y(2, 1) == 7.0);

  std::vector<Tensor> none;
  Tensor g({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor gx = rv.backward(g, cache, none);
  CHECK(gx[0] == doctest::Approx(9.0));
  CHECK(gx[1] == doctest::Approx(12.0));

  CHECK_THROWS_AS(rv.output_shape({2, 2}), ShapeError);
  CHECK_THROWS_AS(RepeatVectorLayer(0), ShapeError);
}

TEST_CASE("lstm with zero weights emits zeros and obeys shapes") {
  LstmLayer seq(2, 3, true);
  Tensor x({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor y = run_forward(seq, x);
  CHECK(y.shape() == Shape{4, 3});
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);

  LstmLayer last(2, 3, false);
  Tensor h = run_forward(last, x);
  CHECK(h.shape() == Shape{3});
  CHECK_THROWS_AS(run_forward(last, Tensor({4, 3})), ShapeError);
}

TEST_CASE("lstm hidden state stays within [-1, 1]") {
  LstmLayer l(1, 8, true);
  std::mt19937_64 rng(7);
  l.init(rng);
  std::uniform_real_distribution<double> big(-50.0, 50.0);
  Tensor x({10, 1});
  for (auto& v : x.values()) v = big(rng);
  Tensor y = run_forward(l, x);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::fabs(y[i]) <= 1.0);
}

TEST_CASE("lstm final state equals last row of the sequence output") {
  LstmLayer seq(2, 4, true), last(2, 4, false);
  std::mt19937_64 r1(11), r2(11);
  seq.init(r1);
  last.init(r2);
  for (int g = 0; g < 4; ++g) {
    last.w[g] = seq.w[g];
    last.u[g] = seq.u[g];
    last.b[g] = seq.b[g];
  }
  Tensor x({5, 2});
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : x.values()) v = dist(r1);
  Tensor ys = run_forward(seq, x);
  Tensor yl = run_forward(last, x);
  for (std::size_t k = 0; k < 4; ++k) CHECK(yl[k] == doctest::Approx(ys(std::size_t{4}, k)));
}

TEST_CASE("time-distributed dense equals a dense applied per row") {
  TimeDistributedDenseLayer td(3, 2);
  DenseLayer d(3, 2);
  std::mt19937_64 rng(5);
  td.init(rng);
  d.weights = td.weights;
  d.bias = td.bias;

  Tensor x({4, 3});
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (auto& v : x.values()) v = dist(rng);

  Tensor y = run_forward(td, x);
  CHECK(y.shape() == Shape{4, 2});
  for (std::size_t t = 0; t < 4; ++t) {
    Tensor row({3}, {x(t, std::size_t{0}), x(t, std::size_t{1}), x(t, std::size_t{2})});
    Tensor yr = run_forward(d, row);
    for (std::size_t k = 0; k < 2; ++k) CHECK(y(t, k) == doctest::Approx(yr[k]));
  }
}

TEST_CASE("convlstm with width-1 kernel and one step matches per-position lstm") {
  ConvLstmLayer cl(2, 3, 1);
  LstmLayer ref(2, 3, false);
  std::mt19937_64 rng(13);
  cl.init(rng);
  ref.init(rng);
  for (int g = 0; g < 4; ++g) {
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t ci = 0; ci < 2; ++ci)
        ref.w[g](ci, f) = cl.w[g](f, std::size_t{0}, std::size_t{0}, ci);
    for (auto& v : ref.u[g].values()) v = 0.0;  // single step never uses recurrence
    ref.b[g] = cl.b[g];
  }

  Tensor x({1, 2, 4, 2});
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : x.values()) v = dist(rng);

  Tensor y = run_forward(cl, x);
  CHECK(y.shape() == Shape{2, 4, 3});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t p = 0; p < 4; ++p) {
      Tensor cell({1, 2}, {x(std::size_t{0}, r, p, std::size_t{0}),
                           x(std::size_t{0}, r, p, std::size_t{1})});
      Tensor h = run_forward(ref, cell);
      for (std::size_t f = 0; f < 3; ++f) CHECK(y(r, p, f) == doctest::Approx(h[f]));
    }
}

TEST_CASE("convlstm validates kernel and input") {
  CHECK_THROWS_AS(ConvLstmLayer(1, 4, 2), ShapeError);
  ConvLstmLayer cl(1, 4, 3);
  CHECK(cl.output_shape({2, 1, 5, 1}) == Shape{1, 3, 4});
  CHECK_THROWS_AS(cl.output_shape({2, 1, 2, 1}), ShapeError);
  CHECK_THROWS_AS(cl.output_shape({2, 1, 5, 2}), ShapeError);
  CHECK_THROWS_AS(cl.output_shape({2, 5, 1}), ShapeError);
}

TEST_CASE("gradient checks: feedforward layers within 1e-6") {
  {
    DenseLayer d(3, 4);
    CHECK(gradient_check(d, {2, 3}, 1e-5, 101) < 1e-6);
  }
  {
    ReluLayer r;
    CHECK(gradient_check(r, {7}, 1e-5, 102) < 1e-6);
  }
  {
    Conv1DLayer c(2, 3, 3);
    CHECK(gradient_check(c, {6, 2}, 1e-5, 103) < 1e-6);
  }
  {
    MaxPool1DLayer p(2);
    CHECK(gradient_check(p, {6, 3}, 1e-5, 104) < 1e-6);
  }
  {
    FlattenLayer f;
    CHECK(gradient_check(f, {2, 3, 2}, 1e-5, 105) < 1e-6);
  }
  {
    RepeatVectorLayer rv(4);
    CHECK(gradient_check(rv, {3}, 1e-5, 106) < 1e-6);
  }
  {
    TimeDistributedDenseLayer td(3, 2);
    CHECK(gradient_check(td, {4, 3}, 1e-5, 107) < 1e-6);
  }
}

TEST_CASE("gradient checks: recurrent layers within 1e-4") {
  {
    LstmLayer seq(3, 4, true);
    CHECK(gradient_check(seq, {3, 3}, 1e-5, 201) < 1e-4);
  }
  {
    LstmLayer last(3, 4, false);
    CHECK(gradient_check(last, {3, 3}, 1e-5, 202) < 1e-4);
  }
  {
    ConvLstmLayer cl(2, 3, 3);
    CHECK(gradient_check(cl, {2, 2, 5, 2}, 1e-5, 203) < 1e-4);
  }
}

namespace {

// Deliberately wrong backward; the checker has to flag it.
class SkewedDense : public DenseLayer {
public:
  using DenseLayer::DenseLayer;
  Tensor backward(const Tensor& grad_out, const ForwardCache& cache,
                  std::vector<Tensor>& param_grads) const override {
    Tensor gx = DenseLayer::backward(grad_out, cache, param_grads);
    return scale(gx, 1.01);
  }
};

}  // namespace

TEST_CASE("gradient check flags a corrupted backward") {
  SkewedDense bad(3, 3);
  CHECK(gradient_check(bad, {2, 3}, 1e-5, 301) > 1e-3);
}
