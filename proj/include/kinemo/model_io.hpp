#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "kinemo/tape.hpp"

namespace kinemo {

/// Named parameter tensors. Iteration is name-ordered, which makes
/// initialization, updates, and serialization deterministic.
struct ParamStore {
  std::map<std::string, ad::Tensor> tensors;

  ad::Tensor& at(const std::string& name);
  const ad::Tensor& at(const std::string& name) const;

  /// Same-shape store filled with zeros (gradient / moment buffers).
  ParamStore zeros_like() const;
  void fill(double v);
  std::size_t parameter_count() const;
};

/// Model file layout: {"config": {...}, "tensors": {name: {"shape": [r, c],
/// "data": [...]}}}. Plain numbers for portability and diff-ability.
void save_model(const std::string& path, const nlohmann::json& config,
                const ParamStore& params);

struct LoadedModel {
  nlohmann::json config;
  ParamStore params;
};

LoadedModel load_model(const std::string& path);

}  // namespace kinemo
