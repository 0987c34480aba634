#pragma once

#include <vector>

#include <Eigen/Core>

#include "ordgam/data.hpp"

namespace ordgam {

struct DesignBlocks;  // basis.hpp

double logistic_cdf(double z);
double logistic_pdf(double z);
double log_logistic_cdf(double z);
double logistic_quantile(double u);

// Ordered thresholds on the latent scale. The first threshold is pinned at
// -1 for identifiability; the remaining R-2 are encoded as log gaps
// delta_r = log(alpha_{r+1} - alpha_r), which keeps the ordering constraint
// away from the optimizer.
class CutPoints {
 public:
  static constexpr double kFirst = -1.0;

  explicit CutPoints(Eigen::VectorXd alpha);
  static CutPoints from_log_gaps(const Eigen::VectorXd& delta);
  // spacing matched to empirical cumulative score frequencies, shifted so
  // the first threshold lands on kFirst
  static CutPoints from_score_frequencies(const std::vector<long>& counts);

  const Eigen::VectorXd& alpha() const { return alpha_; }
  Eigen::VectorXd log_gaps() const;
  int n_categories() const { return static_cast<int>(alpha_.size()) + 1; }
  int n_free() const { return static_cast<int>(alpha_.size()) - 1; }

 private:
  Eigen::VectorXd alpha_;  // increasing, alpha_[0] == kFirst
};

// P(Y <= r) = F(alpha_{r+1} - eta); r = R-1 gives exactly 1.
double cumulative_prob(const CutPoints& cuts, double eta, int r);
// P(Y = r), computed as a difference of stable CDFs.
double category_prob(const CutPoints& cuts, double eta, int r);

// Per-observation pieces of the ordered-logit log-likelihood: everything the
// fitting loop needs in eta space, plus the threshold blocks for the joint
// (theta, delta) gradient/Hessian.
struct ObsDerivatives {
  double loglik = 0.0;
  bool finite = true;           // false when some category prob is NaN/zero beyond rescue
  bool guard_triggered = false; // a probability was floored at 1e-305 before log
  Eigen::VectorXd d_eta;        // dl/deta per observation
  Eigen::VectorXd weight;       // -d2l/deta2 per observation, >= 0
  // threshold blocks over all R-1 cutpoints (the pinned first included;
  // its entries are simply never chained into free parameters)
  Eigen::VectorXd g_alpha;       // sum over obs of dl/dalpha_r
  Eigen::MatrixXd h_alpha;       // sum over obs of d2l/dalpha dalpha
  Eigen::MatrixXd cross;         // n x (R-1), row i holds d2l/deta dalpha_r
};

ObsDerivatives obs_derivatives(const Eigen::VectorXd& eta, const std::vector<int>& y,
                               const CutPoints& cuts, bool need_threshold_blocks);

// Full-likelihood state in the joint (theta, delta) parameterization.
struct LikelihoodState {
  double loglik = 0.0;
  bool finite = true;
  bool guard_triggered = false;
  Eigen::VectorXd eta;
  Eigen::MatrixXd probs;     // n x R category probabilities
  Eigen::VectorXd gradient;  // length p + R-2
  Eigen::MatrixXd hessian;   // (p + R-2)^2, the actual (not negated) Hessian
};

LikelihoodState loglik(const DesignBlocks& blocks, const Eigen::VectorXd& theta,
                       const CutPoints& cuts, const Dataset& d);

// Jacobian d alpha / d delta of the log-gap encoding, (R-1) x (R-2).
Eigen::MatrixXd cutpoint_jacobian(const CutPoints& cuts);

}  // namespace ordgam
