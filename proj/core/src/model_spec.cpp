#include "ordgam/model_spec.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ordgam/errors.hpp"

namespace ordgam {

ModelSpec ModelSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model spec JSON: ") + e.what());
  }
  ModelSpec spec;
  if (j.contains("label")) spec.label = j.at("label").get<std::string>();
  if (j.contains("linear"))
    spec.linear = j.at("linear").get<std::vector<std::string>>();
  if (j.contains("smooth")) {
    for (const auto& s : j.at("smooth")) {
      SmoothSpec sm;
      sm.covariate = s.at("covariate").get<std::string>();
      if (s.contains("k")) sm.k = s.at("k").get<int>();
      if (sm.k < 3) throw SchemaError("smooth basis dimension k must be >= 3");
      if (s.contains("by")) sm.by = s.at("by").get<std::string>();
      spec.smooths.push_back(std::move(sm));
    }
  }
  if (j.contains("random_intercept")) {
    const auto& ri = j.at("random_intercept");
    if (!ri.is_null()) spec.random_intercept = ri.get<std::string>();
  }
  if (j.contains("reference")) {
    for (auto& [k, v] : j.at("reference").items())
      spec.reference[k] = v.get<std::string>();
  }
  return spec;
}

ModelSpec ModelSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open model spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ModelSpec spec = from_json(ss.str());
  if (spec.label == "model") {
    // default label from the file stem
    std::string stem = path;
    if (auto pos = stem.find_last_of("/\\"); pos != std::string::npos)
      stem = stem.substr(pos + 1);
    if (auto pos = stem.rfind('.'); pos != std::string::npos) stem = stem.substr(0, pos);
    if (!stem.empty()) spec.label = stem;
  }
  return spec;
}

std::string ModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["linear"] = linear;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : smooths) {
    nlohmann::ordered_json sm;
    sm["covariate"] = s.covariate;
    sm["k"] = s.k;
    if (s.by) sm["by"] = *s.by;
    arr.push_back(sm);
  }
  j["smooth"] = arr;
  if (random_intercept) j["random_intercept"] = *random_intercept;
  else j["random_intercept"] = nullptr;
  if (!reference.empty()) j["reference"] = reference;
  return j.dump(2);
}

}  // namespace ordgam
