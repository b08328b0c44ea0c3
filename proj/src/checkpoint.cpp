#include "anacore/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace anacore {

namespace {

using nlohmann::json;

json layer_to_json(const Layer& l) {
  json j;
  if (const auto* c = std::get_if<Conv1dLayer>(&l)) {
    j["kind"] = "conv1d";
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
    j["in_len"] = c->in_len;
    j["out_channels"] = c->out_channels;
    j["weights"] = c->weights.values;
    if (c->requant_shift) j["requant_shift"] = *c->requant_shift;
  } else if (const auto* f = std::get_if<LinearLayer>(&l)) {
    j["kind"] = "linear";
    j["in_features"] = f->in_features;
    j["out_features"] = f->out_features;
    j["weights"] = f->weights.values;
    if (f->requant_shift) j["requant_shift"] = *f->requant_shift;
  } else if (std::holds_alternative<ReluLayer>(l)) {
    j["kind"] = "relu";
  } else if (const auto* p = std::get_if<AvgPoolLayer>(&l)) {
    j["kind"] = "avgpool";
    j["group_size"] = p->group_size;
  } else if (const auto* p = std::get_if<MaxPoolLayer>(&l)) {
    j["kind"] = "maxpool";
    j["group_size"] = p->group_size;
  } else {
    j["kind"] = "argmax";
  }
  return j;
}

Layer layer_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "conv1d") {
    Conv1dLayer c;
    c.kernel = j.at("kernel");
    c.stride = j.at("stride");
    c.in_len = j.at("in_len");
    c.out_channels = j.at("out_channels");
    c.weights = SignedWeightMatrix(c.kernel, c.out_channels);
    c.weights.values = j.at("weights").get<std::vector<int>>();
    if (j.contains("requant_shift")) c.requant_shift = j.at("requant_shift").get<int>();
    return c;
  }
  if (kind == "linear") {
    LinearLayer f;
    f.in_features = j.at("in_features");
    f.out_features = j.at("out_features");
    f.weights = SignedWeightMatrix(f.in_features, f.out_features);
    f.weights.values = j.at("weights").get<std::vector<int>>();
    if (j.contains("requant_shift")) f.requant_shift = j.at("requant_shift").get<int>();
    return f;
  }
  if (kind == "relu") return ReluLayer{};
  if (kind == "avgpool") return AvgPoolLayer{j.at("group_size")};
  if (kind == "maxpool") return MaxPoolLayer{j.at("group_size")};
  if (kind == "argmax") return ArgmaxLayer{};
  throw std::invalid_argument("unknown layer kind '" + kind + "' in checkpoint");
}

}  // namespace

void write_checkpoint(const LayerGraph& g, std::ostream& out) {
  g.validate();
  json j;
  j["format"] = "anacore-checkpoint";
  j["version"] = 1;
  j["input_len"] = g.input_len;
  j["layers"] = json::array();
  for (const Layer& l : g.layers) j["layers"].push_back(layer_to_json(l));
  out << j.dump(2) << "\n";
}

void save_checkpoint(const LayerGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  write_checkpoint(g, out);
}

LayerGraph read_checkpoint(std::istream& in) {
  json j;
  in >> j;
  if (j.value("format", "") != "anacore-checkpoint")
    throw std::invalid_argument("not a checkpoint file");
  if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported checkpoint version");
  LayerGraph g;
  g.input_len = j.at("input_len");
  for (const json& lj : j.at("layers")) g.layers.push_back(layer_from_json(lj));
  g.validate();
  return g;
}

LayerGraph load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace anacore
