#include "weekcast/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace weekcast {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kFormat = "weekcast-model";
constexpr int kVersion = 1;

ordered_json tensor_json(const Tensor& t) {
  ordered_json j;
  j["shape"] = t.shape();
  j["values"] = ordered_json::array();
  for (std::size_t i = 0; i < t.size(); ++i) j["values"].push_back(t[i]);
  return j;
}

void load_tensor(Tensor& t, const nlohmann::json& j, const std::string& where) {
  const auto shape = j.at("shape").get<Shape>();
  if (shape != t.shape())
    throw DataError("model json: " + where + ": stored shape " + shape_str(shape) +
                    " does not match built shape " + shape_str(t.shape()));
  const auto& values = j.at("values");
  if (values.size() != t.size())
    throw DataError("model json: " + where + ": expected " + std::to_string(t.size()) +
                    " values, got " + std::to_string(values.size()));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = values.at(i).get<double>();
  ensure_finite(t, "model json: " + where);
}

}  // namespace

std::string model_to_json(Model& model) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = kind_name(model.kind());
  j["seed"] = model.seed();
  const ModelOverrides& o = model.overrides();
  j["overrides"] = ordered_json{{"cnn_filters", o.cnn_filters},
                                {"cnn_kernel", o.cnn_kernel},
                                {"cnn_hidden", o.cnn_hidden},
                                {"encoder_filters", o.encoder_filters},
                                {"encoder_kernel", o.encoder_kernel},
                                {"lstm_units", o.lstm_units},
                                {"td_hidden", o.td_hidden}};
  j["scaler"] = ordered_json{{"mode", scaler_mode_name(model.scaler_mode())},
                             {"offset", model.scaler().offset},
                             {"scale", model.scaler().scale}};
  j["layers"] = ordered_json::array();
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    Layer& layer = model.layer(i);
    ordered_json lj;
    lj["index"] = i;
    lj["kind"] = layer.kind();
    lj["tensors"] = ordered_json::object();
    for (const NamedParam& p : layer.params()) {
      ensure_finite(*p.tensor, "layer " + std::to_string(i) + "." + p.name);
      lj["tensors"][p.name] = tensor_json(*p.tensor);
    }
    j["layers"].push_back(lj);
  }
  return j.dump(2) + "\n";
}

Model model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model json: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw DataError("model json: unrecognized format field");
    if (j.at("version").get<int>() != kVersion)
      throw DataError("model json: unsupported version " + j.at("version").dump());

    ModelOverrides o;
    const auto& oj = j.at("overrides");
    o.cnn_filters = oj.at("cnn_filters").get<std::size_t>();
    o.cnn_kernel = oj.at("cnn_kernel").get<std::size_t>();
    o.cnn_hidden = oj.at("cnn_hidden").get<std::size_t>();
    o.encoder_filters = oj.at("encoder_filters").get<std::size_t>();
    o.encoder_kernel = oj.at("encoder_kernel").get<std::size_t>();
    o.lstm_units = oj.at("lstm_units").get<std::size_t>();
    o.td_hidden = oj.at("td_hidden").get<std::size_t>();

    Model model = build_model(kind_from_name(j.at("kind").get<std::string>()), o,
                              j.at("seed").get<std::uint64_t>());

    const auto& sj = j.at("scaler");
    AffineScaler scaler;
    scaler.offset = sj.at("offset").get<double>();
    scaler.scale = sj.at("scale").get<double>();
    model.set_scaler(scaler, scaler_mode_from_name(sj.at("mode").get<std::string>()));

    const auto& layers = j.at("layers");
    if (layers.size() != model.layer_count())
      throw DataError("model json: stored " + std::to_string(layers.size()) + " layers, built " +
                      std::to_string(model.layer_count()));
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
      Layer& layer = model.layer(i);
      const auto& lj = layers.at(i);
      const std::string where = "layer " + std::to_string(i);
      if (lj.at("index").get<std::size_t>() != i)
        throw DataError("model json: " + where + ": index mismatch");
      if (lj.at("kind").get<std::string>() != layer.kind())
        throw DataError("model json: " + where + ": stored kind '" +
                        lj.at("kind").get<std::string>() + "', built '" + layer.kind() + "'");
      const auto& tensors = lj.at("tensors");
      auto params = layer.params();
      if (tensors.size() != params.size())
        throw DataError("model json: " + where + ": expected " + std::to_string(params.size()) +
                        " tensors, got " + std::to_string(tensors.size()));
      for (const NamedParam& p : params) {
        if (!tensors.contains(p.name))
          throw DataError("model json: " + where + ": missing tensor '" + p.name + "'");
        load_tensor(*p.tensor, tensors.at(p.name), where + "." + p.name);
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model json: ") + e.what());
  }
}

void save_model(Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << model_to_json(model);
  if (!out) throw DataError("failed writing '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace weekcast
