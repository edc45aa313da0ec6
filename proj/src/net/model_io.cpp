#include "kinemo/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include "kinemo/io.hpp"

namespace kinemo {

using nlohmann::json;

ad::Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("no parameter tensor: " + name);
  return it->second;
}

const ad::Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("no parameter tensor: " + name);
  return it->second;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, t] : tensors) {
    out.tensors.emplace(name, ad::Tensor(t.rows, t.cols));
  }
  return out;
}

void ParamStore::fill(double v) {
  for (auto& [name, t] : tensors) {
    std::fill(t.v.begin(), t.v.end(), v);
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.v.size();
  return n;
}

void save_model(const std::string& path, const json& config,
                const ParamStore& params) {
  json tensors = json::object();
  for (const auto& [name, t] : params.tensors) {
    tensors[name] = json{{"shape", json::array({t.rows, t.cols})}, {"data", t.v}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << json{{"config", config}, {"tensors", std::move(tensors)}}.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("config") || !j.contains("tensors")) {
    throw ParseError(path + ": expected {config, tensors}");
  }
  LoadedModel m;
  m.config = j["config"];
  for (auto it = j["tensors"].begin(); it != j["tensors"].end(); ++it) {
    const json& tj = it.value();
    if (!tj.contains("shape") || !tj.contains("data") || tj["shape"].size() != 2) {
      throw ParseError(path + ": tensor " + it.key() + " malformed");
    }
    ad::Tensor t(tj["shape"][0].get<int>(), tj["shape"][1].get<int>());
    const auto& data = tj["data"];
    if (static_cast<int>(data.size()) != t.size()) {
      throw ParseError(path + ": tensor " + it.key() + " size mismatch");
    }
    for (int i = 0; i < t.size(); ++i) t.v[i] = data[i].get<double>();
    m.params.tensors.emplace(it.key(), std::move(t));
  }
  return m;
}

}  // namespace kinemo
