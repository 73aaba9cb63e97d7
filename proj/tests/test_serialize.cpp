#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "weekcast/optim.hpp"
#include "weekcast/serialize.hpp"
#include "weekcast/synth.hpp"

using namespace weekcast;
namespace fs = std::filesystem;

namespace {

ModelOverrides small_overrides() {
  ModelOverrides o;
  o.cnn_filters = 3;
  o.cnn_hidden = 4;
  o.encoder_filters = 4;
  o.lstm_units = 6;
  o.td_hidden = 5;
  return o;
}

// A model with non-initial parameters and a fitted scaler.
Model trained_model(ModelKind kind) {
  Model model = build_model(kind, small_overrides(), 17);
  SynthSpec spec;
  spec.days = 40;
  const std::vector<double> history = opens(synth_series(spec));
  model.set_scaler(fit_minmax(history), ScalerMode::MinMax);
  const WindowSet ws = make_windows(std::span<const double>(history), model.window_len());
  std::vector<TrainSample> samples;
  for (std::size_t i = 0; i < ws.count(); ++i) {
    std::vector<double> in = ws.inputs[i];
    for (auto& v : in) v = model.scaler().transform(v);
    std::vector<double> target(ws.targets[i].begin(), ws.targets[i].end());
    for (auto& v : target) v = model.scaler().transform(v);
    samples.push_back({window_input(kind, in), Tensor({5}, std::move(target))});
  }
  TrainConfig tc = model.default_train_config();
  tc.epochs = 2;
  train(model, samples, tc);
  return model;
}

void check_identical(Model& a, Model& b) {
  REQUIRE(a.layer_count() == b.layer_count());
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    REQUIRE(pa[i].tensor->shape() == pb[i].tensor->shape());
    for (std::size_t k = 0; k < pa[i].tensor->size(); ++k)
      CHECK((*pa[i].tensor)[k] == (*pb[i].tensor)[k]);
  }
  CHECK(a.scaler() == b.scaler());
  CHECK(a.scaler_mode() == b.scaler_mode());
  CHECK(a.overrides() == b.overrides());
  CHECK(a.seed() == b.seed());
}

}  // namespace

TEST_CASE("save and load reproduce every parameter bit for bit") {
  for (const ModelKind kind : kAllModelKinds) {
    CAPTURE(kind_name(kind));
    Model model = trained_model(kind);
    Model back = model_from_json(model_to_json(model));
    check_identical(model, back);

    SynthSpec spec;
    spec.days = 40;
    const std::vector<double> history = opens(synth_series(spec));
    const auto f1 = forecast(model, history);
    const auto f2 = forecast(back, history);
    for (std::size_t d = 0; d < 5; ++d) CHECK(f1[d] == f2[d]);
  }
}

TEST_CASE("model json is keyed by layer index and tensor name") {
  Model model = build_model(ModelKind::Cnn1, small_overrides(), 1);
  const auto j = nlohmann::json::parse(model_to_json(model));
  CHECK(j.at("format") == "weekcast-model");
  CHECK(j.at("version") == 1);
  CHECK(j.at("kind") == "cnn1");
  CHECK(j.at("seed") == 1);
  CHECK(j.at("overrides").at("cnn_filters") == 3);
  CHECK(j.at("scaler").at("mode") == "none");
  REQUIRE(j.at("layers").size() == model.layer_count());
  CHECK(j.at("layers").at(0).at("index") == 0);
  CHECK(j.at("layers").at(0).at("kind") == "conv1d");
  CHECK(j.at("layers").at(0).at("tensors").contains("kernels"));
  CHECK(j.at("layers").at(0).at("tensors").contains("bias"));
  CHECK(j.at("layers").at(1).at("tensors").empty());  // relu holds no params
  const auto& kernels = j.at("layers").at(0).at("tensors").at("kernels");
  CHECK(kernels.at("shape") == nlohmann::json({3, 3, 1}));
  CHECK(kernels.at("values").size() == 9);
}

TEST_CASE("loading rejects containers that do not match the rebuilt stack") {
  Model model = build_model(ModelKind::Cnn1, small_overrides(), 1);
  const std::string good = model_to_json(model);

  CHECK_THROWS_AS(model_from_json("{nope"), DataError);
  CHECK_THROWS_AS(model_from_json("{}"), DataError);

  auto tampered = nlohmann::json::parse(good);
  tampered["layers"][0]["kind"] = "dense";
  CHECK_THROWS_AS(model_from_json(tampered.dump()), DataError);

  tampered = nlohmann::json::parse(good);
  tampered["layers"][0]["tensors"]["kernels"]["shape"] = {2, 3, 1};
  CHECK_THROWS_AS(model_from_json(tampered.dump()), DataError);

  tampered = nlohmann::json::parse(good);
  tampered["layers"][0]["tensors"]["kernels"]["values"][0] = "oops";
  CHECK_THROWS_AS(model_from_json(tampered.dump()), DataError);

  tampered = nlohmann::json::parse(good);
  tampered["layers"][0]["tensors"].erase("bias");
  CHECK_THROWS_AS(model_from_json(tampered.dump()), DataError);

  tampered = nlohmann::json::parse(good);
  tampered["format"] = "something-else";
  CHECK_THROWS_AS(model_from_json(tampered.dump()), DataError);

  tampered = nlohmann::json::parse(good);
  tampered["version"] = 99;
  CHECK_THROWS_AS(model_from_json(tampered.dump()), DataError);
}

TEST_CASE("file save and load round-trip") {
  const fs::path dir = fs::temp_directory_path() / "weekcast_serialize_test";
  fs::create_directories(dir);
  const std::string path = (dir / "model.json").string();

  Model model = trained_model(ModelKind::Lstm1);
  save_model(model, path);
  Model back = load_model(path);
  check_identical(model, back);

  CHECK_THROWS_AS(load_model((dir / "missing.json").string()), DataError);
  fs::remove_all(dir);
}
