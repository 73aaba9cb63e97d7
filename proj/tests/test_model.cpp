#include <random>
#include <vector>

#include "doctest.h"
#include "weekcast/model.hpp"

using namespace weekcast;

namespace {

std::vector<Shape> shape_chain(const Model& model) {
  std::vector<Shape> chain = {model.input_shape()};
  for (std::size_t i = 0; i < model.layer_count(); ++i)
    chain.push_back(model.layer(i).output_shape(chain.back()));
  return chain;
}

std::vector<double> ramp(std::size_t n, double lo = 100.0, double step = 1.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  return v;
}

// Tiny widths so whole-stack checks stay fast.
ModelOverrides small_overrides() {
  ModelOverrides o;
  o.cnn_filters = 3;
  o.cnn_hidden = 4;
  o.encoder_filters = 4;
  o.lstm_units = 6;
  o.td_hidden = 5;
  return o;
}

}  // namespace

TEST_CASE("kind names round-trip") {
  for (ModelKind kind : kAllModelKinds) CHECK(kind_from_name(kind_name(kind)) == kind);
  CHECK(kind_from_name("LSTM2") == ModelKind::Lstm2);
  CHECK_THROWS_AS(kind_from_name("gru"), ConfigError);
}

TEST_CASE("input windows per kind") {
  CHECK(build_model(ModelKind::Cnn1).input_shape() == Shape{5, 1});
  CHECK(build_model(ModelKind::Cnn1).window_len() == 5);
  CHECK(build_model(ModelKind::Cnn2).input_shape() == Shape{10, 1});
  CHECK(build_model(ModelKind::Lstm1).input_shape() == Shape{10, 1});
  CHECK(build_model(ModelKind::Lstm2).input_shape() == Shape{10, 1});
  CHECK(build_model(ModelKind::Lstm3).input_shape() == Shape{2, 1, 5, 1});
  CHECK(build_model(ModelKind::Lstm3).window_len() == 10);
}

TEST_CASE("shape chains match the published stacks") {
  using S = std::vector<Shape>;
  CHECK(shape_chain(build_model(ModelKind::Cnn1)) ==
        S{{5, 1}, {3, 16}, {3, 16}, {1, 16}, {16}, {10}, {10}, {5}});
  CHECK(shape_chain(build_model(ModelKind::Cnn2)) ==
        S{{10, 1}, {8, 16}, {8, 16}, {4, 16}, {64}, {10}, {10}, {5}});
  CHECK(shape_chain(build_model(ModelKind::Lstm1)) ==
        S{{10, 1}, {200}, {5, 200}, {5, 200}, {5, 200}, {5, 100}, {5, 100}, {5, 1}});
  CHECK(shape_chain(build_model(ModelKind::Lstm2)) ==
        S{{10, 1},
          {8, 64},
          {8, 64},
          {6, 64},
          {6, 64},
          {3, 64},
          {192},
          {5, 192},
          {5, 200},
          {5, 100},
          {5, 100},
          {5, 1}});
  CHECK(shape_chain(build_model(ModelKind::Lstm3)) ==
        S{{2, 1, 5, 1}, {1, 3, 64}, {192}, {5, 192}, {5, 200}, {5, 100}, {5, 100}, {5, 1}});
}

TEST_CASE("every kind forecasts exactly five finite values") {
  for (ModelKind kind : kAllModelKinds) {
    Model model = build_model(kind, small_overrides(), 3);
    auto out = forecast(model, ramp(12));
    REQUIRE(out.size() == 5);
    for (double v : out) CHECK(std::isfinite(v));
  }
}

TEST_CASE("same seed builds identical models") {
  for (ModelKind kind : kAllModelKinds) {
    Model a = build_model(kind, small_overrides(), 9);
    Model b = build_model(kind, small_overrides(), 9);
    auto fa = forecast(a, ramp(10));
    auto fb = forecast(b, ramp(10));
    for (std::size_t i = 0; i < 5; ++i) CHECK(fa[i] == fb[i]);
  }
}

TEST_CASE("forecast reads only the trailing window") {
  for (ModelKind kind : kAllModelKinds) {
    Model model = build_model(kind, small_overrides(), 4);
    auto tail = ramp(model.window_len());
    std::vector<double> padded = {9999.0, -3.0, 42.0};
    padded.insert(padded.end(), tail.begin(), tail.end());
    auto a = forecast(model, tail);
    auto b = forecast(model, padded);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("forecast requires enough history") {
  Model model = build_model(ModelKind::Lstm1, small_overrides(), 1);
  CHECK_THROWS_AS(forecast(model, ramp(9)), DataError);
  CHECK_NOTHROW(forecast(model, ramp(10)));
}

TEST_CASE("a zeroed output head forces a zero forecast") {
  Model model = build_model(ModelKind::Cnn1, {}, 5);
  auto params = model.parameters();
  for (auto& p : params)
    if (p.name.starts_with("layer6."))
      for (auto& v : p.tensor->values()) v = 0.0;
  auto out = forecast(model, ramp(5));
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("window_input shapes the convlstm layout") {
  auto w = ramp(10, 0.0);
  Tensor t = window_input(ModelKind::Lstm3, w);
  CHECK(t.shape() == Shape{2, 1, 5, 1});
  CHECK(t(std::size_t{0}, std::size_t{0}, std::size_t{3}, std::size_t{0}) == 3.0);
  CHECK(t(std::size_t{1}, std::size_t{0}, std::size_t{0}, std::size_t{0}) == 5.0);
  CHECK_THROWS_AS(window_input(ModelKind::Lstm3, ramp(9)), ShapeError);
}

TEST_CASE("minmax scaler maps observed range onto [0,1]") {
  std::vector<double> v = {10.0, 20.0, 14.0};
  AffineScaler s = fit_minmax(v);
  CHECK(s.transform(10.0) == 0.0);
  CHECK(s.transform(20.0) == 1.0);
  CHECK(s.transform(15.0) == doctest::Approx(0.5));
  CHECK(s.inverse(s.transform(17.3)) == doctest::Approx(17.3));

  std::vector<double> flat = {4.0, 4.0};
  AffineScaler c = fit_minmax(flat);
  CHECK(c.transform(4.0) == 0.0);
  CHECK(c.scale == 1.0);

  CHECK_THROWS_AS(fit_minmax(std::vector<double>{}), DataError);
}

TEST_CASE("the scaler wraps forecasting transparently") {
  Model plain = build_model(ModelKind::Cnn1, small_overrides(), 2);
  Model scaled = build_model(ModelKind::Cnn1, small_overrides(), 2);
  auto history = ramp(5, 1000.0, 10.0);
  scaled.set_scaler(fit_minmax(history), ScalerMode::MinMax);
  CHECK(scaled.scaler_mode() == ScalerMode::MinMax);

  // the scaled model sees inputs in [0,1]; its raw outputs are mapped back
  auto out = forecast(scaled, history);
  for (double v : out) CHECK(std::isfinite(v));

  AffineScaler degenerate{0.0, 0.0};
  CHECK_THROWS_AS(plain.set_scaler(degenerate, ScalerMode::MinMax), ConfigError);
}

TEST_CASE("parameter names are layer-qualified") {
  Model model = build_model(ModelKind::Cnn1);
  auto params = model.parameters();
  REQUIRE(params.size() == 6);
  CHECK(params[0].name == "layer0.kernels");
  CHECK(params[1].name == "layer0.bias");
  CHECK(params[2].name == "layer4.weights");
  CHECK(params[5].name == "layer6.bias");

  CHECK(build_model(ModelKind::Lstm1, small_overrides()).parameters().size() == 28);
}

TEST_CASE("default training configs follow the per-kind presets") {
  CHECK(build_model(ModelKind::Cnn1).default_train_config().batch_size == 4);
  CHECK(build_model(ModelKind::Cnn2).default_train_config().batch_size == 4);
  for (ModelKind kind : {ModelKind::Lstm1, ModelKind::Lstm2, ModelKind::Lstm3})
    CHECK(build_model(kind, small_overrides()).default_train_config().batch_size == 16);
  CHECK(build_model(ModelKind::Cnn1).default_train_config().epochs == 20);
  Model seeded = build_model(ModelKind::Cnn1, {}, 77);
  CHECK(seeded.default_train_config().seed == 77);
}

TEST_CASE("whole-stack backward agrees with finite differences") {
  for (ModelKind kind : kAllModelKinds) {
    Model model = build_model(kind, small_overrides(), 21);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor x(model.input_shape());
    for (auto& v : x.values()) v = dist(rng);
    Tensor weight({Model::horizon()});
    for (auto& v : weight.values()) v = dist(rng);

    auto loss = [&](const Tensor& in) {
      Tensor out = model.forward(in);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weight[i];
      return s;
    };

    StackCache cache;
    model.forward(x, cache);
    ModelGrads grads;
    Tensor gx = model.backward(weight, cache, grads);

    const double eps = 1e-5;
    double max_rel = 0.0;
    auto compare = [&](double analytic, double numeric) {
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
      compare(gx[i], (lp - lm) / (2 * eps));
    }
    CHECK(max_rel < 1e-4);
  }
}
