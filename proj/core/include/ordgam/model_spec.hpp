#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ordgam {

struct SmoothSpec {
  std::string covariate;
  int k = 10;
  std::optional<std::string> by;  // factor whose levels get separate smooths
};

// Declarative model description, read from JSON:
//   {
//     "label": "best",
//     "linear": ["study", "site"],
//     "smooth": [{"covariate": "cumdos_site", "k": 10, "by": "site"}],
//     "random_intercept": "patient",
//     "reference": {"site": "hard"}
//   }
// Linear entries are continuous columns or factors; factors are dummy-coded
// against the reference level (first declared level unless overridden).
struct ModelSpec {
  std::string label = "model";
  std::vector<std::string> linear;
  std::vector<SmoothSpec> smooths;
  std::optional<std::string> random_intercept;
  std::map<std::string, std::string> reference;

  static ModelSpec from_json(const std::string& text);
  static ModelSpec from_json_file(const std::string& path);
  std::string to_json() const;
};

}  // namespace ordgam
