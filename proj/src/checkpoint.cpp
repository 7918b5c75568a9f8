#include "lptgnn/checkpoint.hpp"

#include <fstream>

#include "lptgnn/errors.hpp"

namespace lptgnn {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json tensor_to_json(const Tensor& t) {
  ordered_json j;
  j["shape"] = t.shape();
  j["data"] = t.vec();
  return j;
}

Tensor tensor_from_json(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw DataError("checkpoint tensor '" + name + "' is malformed");
  }
  Shape shape;
  std::vector<double> data;
  try {
    shape = j.at("shape").get<Shape>();
    data = j.at("data").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw DataError("checkpoint tensor '" + name + "' is malformed");
  }
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw DataError("checkpoint tensor '" + name + "' has " + std::to_string(data.size()) +
                    " values for shape " + shape_str(shape));
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void save_checkpoint(const std::string& path, const ordered_json& manifest,
                     const ParamStore& store) {
  ordered_json doc;
  doc["format"] = "lptgnn-checkpoint";
  doc["version"] = 1;
  doc["manifest"] = manifest;
  doc["step_count"] = store.step_count();
  ordered_json params;
  for (const std::string& name : store.names()) {
    params[name] = tensor_to_json(store.value(name));
  }
  doc["params"] = params;
  ordered_json buffers;
  for (const std::string& name : store.buffer_names()) {
    buffers[name] = tensor_to_json(store.buffer(name));
  }
  doc["buffers"] = buffers;

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << doc.dump(1, '\t') << "\n";
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

json load_checkpoint(const std::string& path, ParamStore& store) {
  if (store.size() != 0) throw DataError("checkpoint load needs an empty parameter store");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || doc.value("format", "") != "lptgnn-checkpoint") {
    throw DataError("'" + path + "' is not a checkpoint file");
  }
  if (!doc.contains("manifest") || !doc.contains("params") || !doc.contains("buffers") ||
      !doc.contains("step_count")) {
    throw DataError("checkpoint '" + path + "' is missing required sections");
  }
  for (auto it = doc.at("params").begin(); it != doc.at("params").end(); ++it) {
    store.create(it.key(), tensor_from_json(it.value(), it.key()));
  }
  for (auto it = doc.at("buffers").begin(); it != doc.at("buffers").end(); ++it) {
    store.create_buffer(it.key(), tensor_from_json(it.value(), it.key()));
  }
  try {
    store.set_step_count(doc.at("step_count").get<std::int64_t>());
  } catch (const json::exception&) {
    throw DataError("checkpoint '" + path + "' has a malformed step_count");
  }
  return doc.at("manifest");
}

}  // namespace lptgnn
