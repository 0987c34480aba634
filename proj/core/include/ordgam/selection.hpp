#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ordgam/data.hpp"
#include "ordgam/fit.hpp"
#include "ordgam/model_spec.hpp"

namespace ordgam {

// AIC = -2 l + 2 edf, BIC = -2 l + log(n) edf, with the conditional
// log-likelihood and the total effective degrees of freedom.
std::pair<double, double> aic_bic(const FitResult& fit, std::size_t n);

// fold id per patient index; folds partition patients, never rows
std::vector<int> make_patient_folds(std::size_t n_patients, int folds, std::uint64_t seed);

// RPE_r = sqrt(mean((1{y=r} - p_r)^2)) pooled over rows
Eigen::VectorXd rpe_per_category(const std::vector<int>& y, const Eigen::MatrixXd& probs);

struct CvOptions {
  int threads = 1;
  int ghq_points = 0;  // 0: population-mode prediction (b = 0)
  FitOptions fit;
  TprsOptions tprs;
};

struct CvResult {
  Eigen::VectorXd rpe;          // per category
  std::vector<int> fold_of_patient;
  std::uint64_t seed_used = 0;  // may be seed+1 after a retry
  int folds = 0;
};

CvResult cv_rmspe(const ModelSpec& spec, const Dataset& d, int folds, std::uint64_t seed,
                  const CvOptions& opts = {});

struct OddsRatioRow {
  std::string level;
  double log_or = 0.0;
  double se = 0.0;
  double odds_ratio = 1.0;
  double ci_low = 1.0;
  double ci_high = 1.0;
  bool reference = false;
};

// Odds of exceeding any score r for `level` versus the reference level
// (constant over r under proportional odds); CI = exp(estimate +- 1.96 se).
struct OddsRatioTable {
  std::string term;
  std::vector<OddsRatioRow> rows;
};

OddsRatioTable odds_ratios(const FitResult& fit, const std::string& term);

// Proportional-odds check: the same spec refitted as a binary model at each
// collapse point r, reported next to the proportional-odds estimates.
struct PoDiagnostic {
  OddsRatioTable proportional;            // from the full ordinal fit
  std::vector<int> r_values;
  std::vector<OddsRatioTable> binary;     // one per r
  std::vector<bool> binary_converged;
};

PoDiagnostic po_diagnostic(const ModelSpec& spec, const Dataset& d,
                           const std::string& term, const CvOptions& opts = {});

// Randomized quantile residuals on the latent logistic scale:
// u ~ U(F(alpha_y - eta), F(alpha_{y+1} - eta)), residual = logit(u).
Eigen::VectorXd quantile_residuals(const FitResult& fit, const Dataset& d,
                                   std::uint64_t seed);

struct ModelComparisonRow {
  std::string label;
  std::size_t n = 0;
  double edf = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  Eigen::VectorXd rpe;
};

struct SelectionReport {
  std::vector<ModelComparisonRow> rows;
  std::uint64_t seed = 0;
  int folds = 0;
};

SelectionReport compare_models(const std::vector<ModelSpec>& specs, const Dataset& d,
                               int folds, std::uint64_t seed, const CvOptions& opts = {});

}  // namespace ordgam
