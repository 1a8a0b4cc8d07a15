#include "caplab/model_io.hpp"

#include <fstream>

#include "caplab/errors.hpp"

namespace caplab {

nlohmann::json model_to_json(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& layer : model.layers()) {
    layers.push_back({{"rows", layer.out_dim()},
                      {"cols", layer.in_dim()},
                      {"activation", to_string(layer.activation)},
                      {"weights", std::vector<double>(layer.weight.values().begin(), layer.weight.values().end())},
                      {"bias", std::vector<double>(layer.bias.values().begin(), layer.bias.values().end())}});
  }
  return {{"version", kModelFormatVersion}, {"dims", model.dims()}, {"layers", std::move(layers)}};
}

MlpModel model_from_json(const nlohmann::json& doc, const std::string& source) {
  try {
    if (!doc.is_object()) throw ParseError(source, 0, "checkpoint is not a JSON object");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError(source, 0, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto dims = doc.at("dims").get<std::vector<std::size_t>>();
    const auto& jlayers = doc.at("layers");
    if (!jlayers.is_array() || jlayers.size() + 1 != dims.size()) {
      throw ParseError(source, 0, "layer list does not match dims");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k < jlayers.size(); ++k) {
      const auto& jl = jlayers[k];
      const auto rows = jl.at("rows").get<std::size_t>();
      const auto cols = jl.at("cols").get<std::size_t>();
      if (rows != dims[k + 1] || cols != dims[k]) {
        throw ParseError(source, 0, "layer " + std::to_string(k) + " shape disagrees with dims");
      }
      auto weights = jl.at("weights").get<std::vector<double>>();
      auto bias = jl.at("bias").get<std::vector<double>>();
      if (weights.size() != rows * cols || bias.size() != rows) {
        throw ParseError(source, 0, "layer " + std::to_string(k) + " has the wrong number of values");
      }
      layers.push_back({Tensor::matrix(rows, cols, std::move(weights)), Tensor::vector(std::move(bias)),
                        parse_activation(jl.at("activation").get<std::string>())});
    }
    return MlpModel(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, 0, std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(source, 0, e.what());
  } catch (const ContractViolation& e) {
    throw ParseError(source, 0, e.what());
  } catch (const NumericError& e) {
    throw ParseError(source, 0, e.what());
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open checkpoint");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
  return model_from_json(doc, path.string());
}

}  // namespace caplab
