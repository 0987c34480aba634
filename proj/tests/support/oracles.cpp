#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_hessian_of_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
    const Eigen::VectorXd& x, double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    H.col(j) = (grad(xp) - grad(xm)) / (2.0 * h);
  }
  return (H + H.transpose()) / 2.0;
}

namespace {

SimplexResult nelder_mead_once(const ScalarFn& f, const Eigen::VectorXd& x0, double scale,
                               double tol, long max_evaluations) {
  const Eigen::Index n = x0.size();
  const int m = static_cast<int>(n) + 1;
  std::vector<Eigen::VectorXd> pts(m, x0);
  std::vector<double> vals(m);
  for (int i = 1; i < m; ++i) pts[i][i - 1] += scale;
  long evals = 0;
  for (int i = 0; i < m; ++i) {
    vals[i] = f(pts[i]);
    ++evals;
  }
  std::vector<int> idx(m);
  while (evals < max_evaluations) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = idx[0], worst = idx[m - 1], second = idx[m - 2];
    if (std::abs(vals[worst] - vals[best]) <
        tol * (1.0 + std::abs(vals[best]) + std::abs(vals[worst])))
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(m - 1);

    Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    double fr = f(xr);
    ++evals;
    if (fr < vals[idx[0]]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (pts[worst] - centroid);
      double fc = f(xc);
      ++evals;
      if (fc < vals[worst]) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (int i = 0; i < m; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          vals[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < m; ++i)
    if (vals[i] < vals[best]) best = i;
  return {pts[best], vals[best], evals};
}

}  // namespace

SimplexResult nelder_mead(const ScalarFn& f, const Eigen::VectorXd& x0, double scale,
                          double tol, long max_evaluations) {
  SimplexResult res = nelder_mead_once(f, x0, scale, tol, max_evaluations);
  // restart with a shrinking simplex until the incumbent stops moving
  double s = scale;
  for (int round = 0; round < 8; ++round) {
    s = std::max(s * 0.1, 1e-7);
    SimplexResult next = nelder_mead_once(f, res.x, s, tol, max_evaluations);
    next.evaluations += res.evaluations;
    const bool moved = (next.x - res.x).lpNorm<Eigen::Infinity>() > 1e-10 ||
                       res.value - next.value > tol;
    res = next;
    if (!moved) break;
  }
  return res;
}

LogisticMle binary_logistic_mle(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                double tol, int max_iter) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<Eigen::Index>(y.size()) != n) throw std::invalid_argument("y size");
  LogisticMle res;
  res.beta = Eigen::VectorXd::Zero(p);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd eta = X * res.beta;
    Eigen::VectorXd mu(n), w(n);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = 1.0 / (1.0 + std::exp(-eta[i]));
      mu[i] = m;
      w[i] = std::max(m * (1.0 - m), 1e-12);
      ll += y[static_cast<std::size_t>(i)] == 1 ? std::log(std::max(m, 1e-300))
                                                : std::log(std::max(1.0 - m, 1e-300));
    }
    res.loglik = ll;
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = y[static_cast<std::size_t>(i)] - mu[i];
    const Eigen::VectorXd g = X.transpose() * r;
    const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd step = H.ldlt().solve(g);
    res.beta += step;
    if (g.lpNorm<Eigen::Infinity>() < tol && step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  const Eigen::VectorXd eta = X * res.beta;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = 1.0 / (1.0 + std::exp(-eta[i]));
    w[i] = std::max(m * (1.0 - m), 1e-12);
  }
  const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
  res.covariance = H.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return res;
}

}  // namespace oracles
