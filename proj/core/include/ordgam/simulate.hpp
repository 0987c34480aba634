#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ordgam/data.hpp"

namespace ordgam {

// Generative configuration for synthetic longitudinal ordinal data. Draws
// use mt19937_64 with hand-rolled transforms and per-patient substreams, so
// output is bit-identical across platforms and thread counts.
struct SimConfig {
  int patients = 75;
  std::vector<std::string> sites;
  int n_categories = 4;
  Eigen::VectorXd cutpoints;        // increasing, first = -1
  double sigma_b = 1.0;
  std::uint64_t seed = 1;

  // treatment schedule: weekday fractions until the sampled total dose
  double fraction_gy = 2.0;
  double total_dose_min = 60.0;
  double total_dose_max = 70.0;
  double break_probability = 0.0;   // chance of one mid-course pause
  int break_after_fraction = 10;
  int break_length_days = 14;

  // evaluations happen on days congruent to one of these offsets mod 7
  std::vector<int> eval_offsets{0, 3};
  int first_eval_day = 3;
  int followup_days = 0;

  std::map<std::string, std::pair<double, double>> perc_by_site;  // uniform range
  std::pair<double, double> age_range{40.0, 75.0};
  std::vector<std::string> sex_levels{"f", "m"};
  std::vector<std::string> study_levels{"obs", "trial"};

  // truth: eta = intercept + linear terms + f(smooth covariate) + b_i
  double intercept = 0.0;
  std::map<std::string, double> beta_continuous;             // e.g. {"age": 0.01}
  std::map<std::string, std::map<std::string, double>> beta_factor;  // level -> coef
  Eigen::VectorXd smooth_x;   // grid for f, linearly interpolated, clamped at the ends
  Eigen::VectorXd smooth_f;
  std::string smooth_covariate = "cumdos_site";

  static SimConfig from_json(const std::string& text);
  static SimConfig from_json_file(const std::string& path);
  std::string to_json() const;
  void validate() const;

  double smooth_value(double x) const;
  double linear_predictor_part(const ObservationRecord& r) const;  // without f and b
};

struct SimTruth {
  std::vector<double> b;   // per patient, in patient-id order
  Eigen::VectorXd eta;     // per record, in dataset order
  SimConfig config;
};

Dataset simulate(const SimConfig& cfg, SimTruth* truth = nullptr);

// Defaults shaped like a head-and-neck radiotherapy study: 75 patients,
// 8 mouth sites, 2 Gy weekday fractions to 60-70 Gy, twice-weekly scoring.
SimConfig paper_like_config();

std::string truth_to_json(const SimTruth& truth, const Dataset& d);

}  // namespace ordgam
