#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ordgam/basis.hpp"
#include "ordgam/data.hpp"
#include "ordgam/likelihood.hpp"

namespace ordgam {

struct FitOptions {
  double pirls_tol = 1e-8;        // on max|grad|, relative to 1 + |penalized loglik|
  int pirls_max_iter = 200;
  double outer_tol_value = 1e-6;  // |change in outer criterion|
  double outer_tol_grad = 1e-4;   // max|finite-difference gradient|
  int outer_max_iter = 100;
  double fd_step_rho = 1e-4;
  double fd_step_delta = 1e-5;
  double rho_bound = 15.0;        // log smoothing parameters are clamped to +-bound
};

struct PirlsResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd penalized_hessian;  // negative Hessian of the penalized loglik, p x p
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool ridge_used = false;
  bool converged = false;
};

// Inner Newton loop: maximizes l(theta) - 0.5 sum_k exp(rho_k) theta' S_k theta
// at fixed cutpoints and smoothing parameters, with step halving so the
// penalized log-likelihood never decreases.
PirlsResult pirls(const DesignBlocks& blocks, const CutPoints& cuts,
                  const Eigen::VectorXd& rho, const Dataset& d,
                  const Eigen::VectorXd* init = nullptr, const FitOptions& opts = {});

struct TermEdf {
  std::string term;
  double edf = 0.0;
};

struct ConvergenceReport {
  bool converged = false;
  int outer_iterations = 0;
  long inner_iterations = 0;
  double final_grad_norm = 0.0;
  double final_delta_v = 0.0;
  std::vector<double> v_trace;
  std::vector<std::string> notices;
};

struct FitResult {
  DesignBlocks design;  // rows cleared; transforms kept for prediction
  Eigen::VectorXd beta;
  std::vector<std::string> coef_names;
  Eigen::VectorXd alpha;             // all cutpoints, first pinned
  Eigen::VectorXd rho;               // log smoothing parameters, one per penalty
  std::vector<std::string> rho_names;
  std::optional<double> sigma_b;     // exp(-rho_b / 2) when a random intercept is present
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  double laml = 0.0;
  double edf_total = 0.0;
  Eigen::VectorXd edf_by_coef;       // length p + R-2
  std::vector<TermEdf> edf_terms;
  Eigen::MatrixXd covariance;        // (p + R-2)^2 posterior covariance
  ConvergenceReport report;

  int n_free_parameters() const { return static_cast<int>(edf_by_coef.size()); }
};

// Outer optimization: BFGS over (log smoothing parameters, cutpoint log gaps)
// of the Laplace-approximate marginal likelihood
//   V = l_p(theta_hat) + 0.5 log|S_lambda|_+ - 0.5 log|H_p| + (M_p/2) log(2 pi),
// each evaluation solving the inner problem warm-started from the previous
// optimum.
FitResult laml(const DesignBlocks& blocks, const Dataset& d, const FitOptions& opts = {});

struct EdfResult {
  Eigen::VectorXd by_coef;
  double total = 0.0;
};

// edf = tr(Hp^-1 H): the trace of the map from unpenalized to penalized
// estimates. Hp and H are negative (penalized / unpenalized) Hessians.
EdfResult edf(const Eigen::MatrixXd& penalized_hessian, const Eigen::MatrixXd& hessian);

enum class PredictMode { population, conditional };

struct Prediction {
  Eigen::VectorXd eta;
  Eigen::MatrixXd probs;  // n x R
};

// Population mode sets the random intercept to zero; conditional mode uses
// the estimated intercept and refuses patients absent from the training
// data. ghq_points > 0 (population mode) marginalizes the category
// probabilities over N(0, sigma_b^2) with Gauss-Hermite quadrature.
Prediction predict(const FitResult& fit, const Dataset& newdata,
                   PredictMode mode = PredictMode::population, int ghq_points = 0);

// Fitted smooth on a uniform grid with pointwise standard errors from the
// coefficient covariance of the block.
struct SmoothGrid {
  std::string term;
  Eigen::VectorXd x;
  Eigen::VectorXd fit;
  Eigen::VectorXd se;
};
std::vector<SmoothGrid> smooth_grids(const FitResult& fit, int points = 200);

}  // namespace ordgam
