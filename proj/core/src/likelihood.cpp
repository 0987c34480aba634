#include "ordgam/likelihood.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include "ordgam/basis.hpp"
#include "ordgam/errors.hpp"

namespace ordgam {

namespace {

constexpr double kLogFloor = -702.2884805;  // log(1e-305)

// log(1 + exp(t)) without overflow
double softplus(double t) {
  if (t > 36.0) return t;
  if (t < -36.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

}  // namespace

double logistic_cdf(double z) {
  if (std::isnan(z)) {
    assert(!"logistic_cdf: NaN input");
    return z;
  }
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_pdf(double z) {
  const double e = std::exp(-std::abs(z));
  const double denom = 1.0 + e;
  return e / (denom * denom);
}

double log_logistic_cdf(double z) { return -softplus(-z); }

double logistic_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw ArgumentError("logistic_quantile: u outside (0,1)");
  return std::log(u) - std::log1p(-u);
}

CutPoints::CutPoints(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
  if (alpha_.size() < 1) throw ArgumentError("need at least one cutpoint");
  if (alpha_[0] != kFirst)
    throw ArgumentError("first cutpoint must equal " + std::to_string(kFirst));
  for (Eigen::Index r = 1; r < alpha_.size(); ++r)
    if (!(alpha_[r] > alpha_[r - 1]))
      throw ArgumentError("cutpoints must be strictly increasing");
}

CutPoints CutPoints::from_log_gaps(const Eigen::VectorXd& delta) {
  Eigen::VectorXd alpha(delta.size() + 1);
  alpha[0] = kFirst;
  for (Eigen::Index s = 0; s < delta.size(); ++s)
    alpha[s + 1] = alpha[s] + std::exp(delta[s]);
  return CutPoints(std::move(alpha));
}

CutPoints CutPoints::from_score_frequencies(const std::vector<long>& counts) {
  const int R = static_cast<int>(counts.size());
  if (R < 2) throw ArgumentError("need at least two categories");
  long total = 0;
  for (long c : counts) total += c;
  Eigen::VectorXd alpha(R - 1);
  bool degenerate = total <= 0;
  double cum = 0.0;
  for (int r = 0; r < R - 1 && !degenerate; ++r) {
    cum += counts[static_cast<std::size_t>(r)];
    double q = cum / static_cast<double>(total);
    if (q <= 1e-6 || q >= 1.0 - 1e-6) {
      degenerate = true;
      break;
    }
    alpha[r] = logistic_quantile(q);
  }
  if (!degenerate) {
    // enforce the pin by translation; guard against numerically equal quantiles
    const double shift = kFirst - alpha[0];
    for (int r = 0; r < R - 1; ++r) alpha[r] += shift;
    for (int r = 1; r < R - 1; ++r)
      if (alpha[r] <= alpha[r - 1] + 1e-8) degenerate = true;
  }
  if (degenerate) {
    for (int r = 0; r < R - 1; ++r) alpha[r] = kFirst + r;
  }
  return CutPoints(std::move(alpha));
}

Eigen::VectorXd CutPoints::log_gaps() const {
  Eigen::VectorXd delta(alpha_.size() - 1);
  for (Eigen::Index s = 0; s + 1 < alpha_.size(); ++s)
    delta[s] = std::log(alpha_[s + 1] - alpha_[s]);
  return delta;
}

double cumulative_prob(const CutPoints& cuts, double eta, int r) {
  const int R = cuts.n_categories();
  if (r < 0 || r >= R) throw ArgumentError("category index out of range");
  if (r == R - 1) return 1.0;
  return logistic_cdf(cuts.alpha()[r] - eta);
}

double category_prob(const CutPoints& cuts, double eta, int r) {
  const int R = cuts.n_categories();
  if (r < 0 || r >= R) throw ArgumentError("category index out of range");
  if (r == 0) return logistic_cdf(cuts.alpha()[0] - eta);
  if (r == R - 1) return logistic_cdf(eta - cuts.alpha()[R - 2]);
  const double b = cuts.alpha()[r] - eta;
  const double a = cuts.alpha()[r - 1] - eta;
  // difference taken in whichever tail keeps the small term representable
  if (a + b > 0) return logistic_cdf(-a) - logistic_cdf(-b);
  return logistic_cdf(b) - logistic_cdf(a);
}

Eigen::MatrixXd cutpoint_jacobian(const CutPoints& cuts) {
  const int R = cuts.n_categories();
  const Eigen::VectorXd delta = cuts.log_gaps();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(R - 1, R - 2);
  for (int r = 1; r < R - 1; ++r)
    for (int s = 0; s < r; ++s) J(r, s) = std::exp(delta[s]);
  return J;
}

ObsDerivatives obs_derivatives(const Eigen::VectorXd& eta, const std::vector<int>& y,
                               const CutPoints& cuts, bool need_threshold_blocks) {
  const Eigen::Index n = eta.size();
  if (static_cast<Eigen::Index>(y.size()) != n)
    throw ArgumentError("eta / y length mismatch");
  const int R = cuts.n_categories();
  const Eigen::VectorXd& alpha = cuts.alpha();

  ObsDerivatives out;
  out.d_eta.resize(n);
  out.weight.resize(n);
  if (need_threshold_blocks) {
    out.g_alpha = Eigen::VectorXd::Zero(R - 1);
    out.h_alpha = Eigen::MatrixXd::Zero(R - 1, R - 1);
    out.cross = Eigen::MatrixXd::Zero(n, R - 1);
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    if (yi < 0 || yi >= R) throw ArgumentError("score outside 0..R-1 at row " +
                                               std::to_string(i + 1));
    // hi threshold alpha_{y+1} has 0-based index yi, lo threshold index yi-1
    double l, l_b = 0, l_a = 0, l_bb = 0, l_aa = 0, l_ab = 0;
    if (yi == 0) {
      const double b = alpha[0] - eta[i];
      l = log_logistic_cdf(b);
      if (l < kLogFloor) { l = kLogFloor; out.guard_triggered = true; }
      l_b = logistic_cdf(-b);
      l_bb = -logistic_pdf(b);
    } else if (yi == R - 1) {
      const double a = alpha[R - 2] - eta[i];
      l = log_logistic_cdf(-a);
      if (l < kLogFloor) { l = kLogFloor; out.guard_triggered = true; }
      l_a = -logistic_cdf(a);
      l_aa = -logistic_pdf(a);
    } else {
      const double b = alpha[yi] - eta[i];
      const double a = alpha[yi - 1] - eta[i];
      // log(F(b) - F(a)) = b + log1p(-e^{a-b}) - softplus(a) - softplus(b)
      l = b + std::log1p(-std::exp(a - b)) - softplus(a) - softplus(b);
      if (!(l >= kLogFloor)) {
        if (std::isnan(l)) { out.finite = false; break; }
        l = kLogFloor;
        out.guard_triggered = true;
      }
      // pdf-over-prob ratios via logs so extreme tails stay finite
      const double log_fb = -softplus(b) - softplus(-b);
      const double log_fa = -softplus(a) - softplus(-a);
      const double rb = std::exp(log_fb - l);
      const double ra = std::exp(log_fa - l);
      const double Fb = logistic_cdf(b);
      const double Fa = logistic_cdf(a);
      l_b = rb;
      l_a = -ra;
      l_bb = rb * (1.0 - 2.0 * Fb) - rb * rb;
      l_aa = -ra * (1.0 - 2.0 * Fa) - ra * ra;
      l_ab = rb * ra;
    }
    if (std::isnan(l)) { out.finite = false; break; }
    total += l;
    out.d_eta[i] = -(l_b + l_a);
    out.weight[i] = -(l_bb + 2.0 * l_ab + l_aa);
    if (need_threshold_blocks) {
      if (yi <= R - 2) {  // hi threshold is a real cutpoint
        out.g_alpha[yi] += l_b;
        out.h_alpha(yi, yi) += l_bb;
        out.cross(i, yi) = -(l_bb + l_ab);
      }
      if (yi >= 1) {  // lo threshold
        out.g_alpha[yi - 1] += l_a;
        out.h_alpha(yi - 1, yi - 1) += l_aa;
        out.cross(i, yi - 1) = -(l_aa + l_ab);
        if (yi <= R - 2) {
          out.h_alpha(yi, yi - 1) += l_ab;
          out.h_alpha(yi - 1, yi) += l_ab;
        }
      }
    }
  }
  out.loglik = out.finite ? total : -std::numeric_limits<double>::infinity();
  return out;
}

LikelihoodState loglik(const DesignBlocks& blocks, const Eigen::VectorXd& theta,
                       const CutPoints& cuts, const Dataset& d) {
  const Eigen::MatrixXd& X = blocks.X;
  if (theta.size() != X.cols()) throw ArgumentError("theta length does not match design");
  if (static_cast<Eigen::Index>(d.n()) != X.rows())
    throw ArgumentError("dataset does not match design rows");
  const int R = cuts.n_categories();
  if (R != d.n_categories)
    throw ArgumentError("cutpoint count inconsistent with dataset categories");

  std::vector<int> y(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) y[i] = d.records[i].score;

  LikelihoodState st;
  st.eta = X * theta;
  const ObsDerivatives der = obs_derivatives(st.eta, y, cuts, true);
  st.loglik = der.loglik;
  st.finite = der.finite;
  st.guard_triggered = der.guard_triggered;

  st.probs.resize(X.rows(), R);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (int r = 0; r < R; ++r) st.probs(i, r) = category_prob(cuts, st.eta[i], r);

  const Eigen::Index p = X.cols();
  const int nfree = R - 2;
  st.gradient.resize(p + nfree);
  st.hessian.resize(p + nfree, p + nfree);
  if (!st.finite) {
    st.gradient.setZero();
    st.hessian.setZero();
    return st;
  }

  st.gradient.head(p) = X.transpose() * der.d_eta;
  Eigen::MatrixXd Hxx = Eigen::MatrixXd::Zero(p, p);
  Hxx.selfadjointView<Eigen::Lower>().rankUpdate(
      (der.weight.cwiseSqrt().asDiagonal() * X).transpose(), -1.0);
  st.hessian.topLeftCorner(p, p) = Hxx.selfadjointView<Eigen::Lower>();

  if (nfree > 0) {
    const Eigen::MatrixXd J = cutpoint_jacobian(cuts);
    const Eigen::VectorXd g_delta = J.transpose() * der.g_alpha;
    st.gradient.tail(nfree) = g_delta;
    const Eigen::MatrixXd cross_delta = X.transpose() * (der.cross * J);  // p x nfree
    st.hessian.topRightCorner(p, nfree) = cross_delta;
    st.hessian.bottomLeftCorner(nfree, p) = cross_delta.transpose();
    Eigen::MatrixXd Hdd = J.transpose() * der.h_alpha * J;
    Hdd.diagonal() += g_delta;  // curvature of the exp reparameterization
    st.hessian.bottomRightCorner(nfree, nfree) = Hdd;
  }
  return st;
}

}  // namespace ordgam
