#include "ordgam/fit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "ordgam/csv.hpp"
#include "ordgam/errors.hpp"
#include "ordgam/ghq.hpp"
#include "ordgam/log.hpp"

namespace ordgam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void add_penalty_into(Eigen::MatrixXd& K, const DesignBlocks& blocks,
                      const Eigen::VectorXd& rho) {
  for (std::size_t k = 0; k < blocks.penalties.size(); ++k) {
    const PenaltyBlock& b = blocks.penalties[k];
    K.block(b.offset, b.offset, b.dim, b.dim) += std::exp(rho[static_cast<Eigen::Index>(k)]) * b.S;
  }
}

double penalty_value(const DesignBlocks& blocks, const Eigen::VectorXd& rho,
                     const Eigen::VectorXd& theta) {
  double v = 0.0;
  for (std::size_t k = 0; k < blocks.penalties.size(); ++k) {
    const PenaltyBlock& b = blocks.penalties[k];
    const auto seg = theta.segment(b.offset, b.dim);
    v += 0.5 * std::exp(rho[static_cast<Eigen::Index>(k)]) * seg.dot(b.S * seg);
  }
  return v;
}

Eigen::VectorXd penalty_gradient(const DesignBlocks& blocks, const Eigen::VectorXd& rho,
                                 const Eigen::VectorXd& theta) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t k = 0; k < blocks.penalties.size(); ++k) {
    const PenaltyBlock& b = blocks.penalties[k];
    g.segment(b.offset, b.dim) +=
        std::exp(rho[static_cast<Eigen::Index>(k)]) * (b.S * theta.segment(b.offset, b.dim));
  }
  return g;
}

// Cholesky with escalating ridge; throws when the matrix stays indefinite.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& K, bool* ridge_used,
                                       const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) return llt;
  const Eigen::Index p = K.rows();
  double ridge = 1e-8 * K.trace() / static_cast<double>(p);
  if (!(ridge > 0)) ridge = 1e-8;
  for (int attempt = 0; attempt < 12; ++attempt) {
    llt.compute(K + ridge * Eigen::MatrixXd::Identity(p, p));
    if (llt.info() == Eigen::Success) {
      if (ridge_used) *ridge_used = true;
      log::warn(std::string(what) + ": indefinite matrix stabilised with ridge " +
                format_double(ridge));
      return llt;
    }
    ridge *= 10.0;
  }
  throw ConvergenceError(std::string(what) + ": matrix is not positive definite");
}

double half_logdet(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

std::vector<int> scores_of(const Dataset& d) {
  std::vector<int> y(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) y[i] = d.records[i].score;
  return y;
}

}  // namespace

PirlsResult pirls(const DesignBlocks& blocks, const CutPoints& cuts,
                  const Eigen::VectorXd& rho, const Dataset& d,
                  const Eigen::VectorXd* init, const FitOptions& opts) {
  const Eigen::MatrixXd& X = blocks.X;
  const Eigen::Index p = X.cols();
  if (rho.size() != static_cast<Eigen::Index>(blocks.penalties.size()))
    throw ArgumentError("rho length does not match the number of penalties");
  if (!rho.allFinite()) throw ArgumentError("non-finite log smoothing parameter");
  if (static_cast<Eigen::Index>(d.n()) != X.rows())
    throw ArgumentError("dataset does not match design rows");
  const std::vector<int> y = scores_of(d);

  PirlsResult res;
  res.theta = (init && init->size() == p) ? *init : Eigen::VectorXd::Zero(p);

  auto penalized_ll = [&](const Eigen::VectorXd& theta, double* ll_out) {
    const ObsDerivatives der = obs_derivatives(X * theta, y, cuts, false);
    if (ll_out) *ll_out = der.loglik;
    if (!der.finite) return -kInf;
    return der.loglik - penalty_value(blocks, rho, theta);
  };

  Eigen::VectorXd eta = X * res.theta;
  ObsDerivatives der = obs_derivatives(eta, y, cuts, false);
  if (!der.finite && init) {  // bad warm start; retry cold
    res.theta.setZero();
    eta = X * res.theta;
    der = obs_derivatives(eta, y, cuts, false);
  }
  if (!der.finite)
    throw ConvergenceError("pirls: log-likelihood not finite at the starting point");

  double lp = der.loglik - penalty_value(blocks, rho, res.theta);
  Eigen::MatrixXd K(p, p);
  for (res.iterations = 0; res.iterations < opts.pirls_max_iter; ++res.iterations) {
    const Eigen::VectorXd g =
        X.transpose() * der.d_eta - penalty_gradient(blocks, rho, res.theta);
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_norm < opts.pirls_tol * (1.0 + std::abs(lp))) {
      res.converged = true;
      break;
    }

    K.setZero();
    K.selfadjointView<Eigen::Lower>().rankUpdate(
        (der.weight.cwiseSqrt().asDiagonal() * X).transpose());
    K = K.selfadjointView<Eigen::Lower>();
    add_penalty_into(K, blocks, rho);
    const auto llt = robust_llt(K, &res.ridge_used, "pirls");
    const Eigen::VectorXd step = llt.solve(g);

    double s = 1.0;
    bool accepted = false;
    Eigen::VectorXd theta_new;
    double lp_new = 0.0, ll_new = 0.0;
    for (int halvings = 0; halvings < 40; ++halvings) {
      theta_new = res.theta + s * step;
      lp_new = penalized_ll(theta_new, &ll_new);
      if (std::isfinite(lp_new) && lp_new >= lp) {
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) {
      // flat to machine precision near the optimum counts as converged
      if (res.grad_norm < std::sqrt(opts.pirls_tol) * (1.0 + std::abs(lp))) {
        res.converged = true;
        break;
      }
      std::ostringstream trace;
      trace << "iter=" << res.iterations << " lp=" << lp << " grad=" << res.grad_norm
            << " |theta|=" << res.theta.norm();
      throw ConvergenceError("pirls: step halving failed to increase the penalized "
                             "log-likelihood",
                             trace.str());
    }
    res.theta = theta_new;
    lp = lp_new;
    der = obs_derivatives(X * res.theta, y, cuts, false);
    if (!der.finite)
      throw ConvergenceError("pirls: likelihood became non-finite after an accepted step");
  }

  if (!res.converged) {
    std::ostringstream trace;
    trace << "iterations=" << res.iterations << " grad=" << res.grad_norm << " lp=" << lp
          << " |theta|=" << res.theta.norm();
    throw ConvergenceError("pirls: no convergence after " +
                               std::to_string(opts.pirls_max_iter) + " iterations",
                           trace.str());
  }

  res.loglik = der.loglik;
  res.penalized_loglik = lp;
  K.setZero();
  K.selfadjointView<Eigen::Lower>().rankUpdate(
      (der.weight.cwiseSqrt().asDiagonal() * X).transpose());
  K = K.selfadjointView<Eigen::Lower>();
  add_penalty_into(K, blocks, rho);
  res.penalized_hessian = std::move(K);
  return res;
}

EdfResult edf(const Eigen::MatrixXd& penalized_hessian, const Eigen::MatrixXd& hessian) {
  if (penalized_hessian.rows() != hessian.rows())
    throw ArgumentError("edf: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(penalized_hessian);
  if (llt.info() != Eigen::Success)
    throw ArgumentError("edf: penalized Hessian is singular; stabilise it with a ridge");
  const Eigen::MatrixXd map = llt.solve(hessian);
  EdfResult out;
  out.by_coef = map.diagonal();
  out.total = out.by_coef.sum();
  return out;
}

namespace {

struct OuterEval {
  double v = -kInf;
  PirlsResult pirls_result;
  bool ok = false;
};

}  // namespace

FitResult laml(const DesignBlocks& blocks, const Dataset& d, const FitOptions& opts) {
  const int n_pen = static_cast<int>(blocks.penalties.size());
  const int R = d.n_categories;
  if (R != blocks.n_categories)
    throw ArgumentError("design was assembled for a different number of categories");
  const int n_free_cuts = std::max(0, R - 2);
  const int m = n_pen + n_free_cuts;
  const Eigen::Index p = blocks.X.cols();
  const double mp_half_log2pi =
      0.5 * static_cast<double>(blocks.penalty_null_dim()) * std::log(2.0 * M_PI);

  ConvergenceReport report;
  Eigen::VectorXd warm_theta = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd x0(m);
  x0.head(n_pen).setZero();
  x0.tail(n_free_cuts) = CutPoints::from_score_frequencies(d.score_counts())
                             .log_gaps()
                             .tail(n_free_cuts);

  auto clamp_rho = [&](Eigen::VectorXd v) {
    for (int k = 0; k < n_pen; ++k) v[k] = std::clamp(v[k], -opts.rho_bound, opts.rho_bound);
    return v;
  };

  auto evaluate = [&](const Eigen::VectorXd& x, bool allow_fail) {
    OuterEval ev;
    const Eigen::VectorXd xc = clamp_rho(x);
    const CutPoints cuts = n_free_cuts > 0
                               ? CutPoints::from_log_gaps(xc.tail(n_free_cuts))
                               : CutPoints(Eigen::VectorXd::Constant(1, CutPoints::kFirst));
    try {
      ev.pirls_result = pirls(blocks, cuts, xc.head(n_pen), d, &warm_theta, opts);
    } catch (const ConvergenceError&) {
      if (!allow_fail) throw;
      return ev;
    }
    report.inner_iterations += ev.pirls_result.iterations;
    warm_theta = ev.pirls_result.theta;

    double log_det_s = 0.0;
    for (int k = 0; k < n_pen; ++k) {
      const PenaltyBlock& b = blocks.penalties[static_cast<std::size_t>(k)];
      log_det_s += b.rank * xc[k] + b.logdet_plus;
    }
    bool ridge = false;
    const auto llt = robust_llt(ev.pirls_result.penalized_hessian, &ridge, "laml");
    if (ridge) ev.pirls_result.ridge_used = true;
    ev.v = ev.pirls_result.penalized_loglik + 0.5 * log_det_s - half_logdet(llt) +
           mp_half_log2pi;
    ev.ok = std::isfinite(ev.v);
    return ev;
  };

  Eigen::VectorXd x = clamp_rho(x0);
  OuterEval cur = evaluate(x, false);
  report.v_trace.push_back(cur.v);

  std::vector<bool> frozen(static_cast<std::size_t>(m), false);

  auto fd_gradient = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
      if (frozen[static_cast<std::size_t>(i)]) continue;
      const double h = i < n_pen ? opts.fd_step_rho : opts.fd_step_delta;
      Eigen::VectorXd xp = at, xm = at;
      xp[i] += h;
      xm[i] -= h;
      const OuterEval ep = evaluate(xp, true);
      const OuterEval em = evaluate(xm, true);
      if (!ep.ok || !em.ok) {
        g[i] = 0.0;  // treat an unevaluable direction as flat
        continue;
      }
      g[i] = -(ep.v - em.v) / (2.0 * h);  // gradient of -V
    }
    return g;
  };

  if (m > 0) {
    Eigen::VectorXd g = fd_gradient(x);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(m, m);  // inverse Hessian estimate
    bool converged = false;
    for (int iter = 0; iter < opts.outer_max_iter; ++iter) {
      report.outer_iterations = iter + 1;
      Eigen::VectorXd dir = -(B * g);
      if (dir.dot(g) >= 0) {
        B.setIdentity();
        dir = -g;
      }
      for (int i = 0; i < m; ++i)
        if (frozen[static_cast<std::size_t>(i)]) dir[i] = 0.0;
      if (dir.lpNorm<Eigen::Infinity>() == 0.0) {
        converged = g.lpNorm<Eigen::Infinity>() < opts.outer_tol_grad;
        break;
      }

      double s = 1.0;
      bool accepted = false;
      Eigen::VectorXd x_new;
      OuterEval ev_new;
      const double f = -cur.v;
      const double slope = g.dot(dir);
      for (int ls = 0; ls < 30; ++ls) {
        x_new = clamp_rho(x + s * dir);
        ev_new = evaluate(x_new, true);
        if (ev_new.ok && -ev_new.v <= f + 1e-4 * s * slope) {
          accepted = true;
          break;
        }
        s *= 0.5;
      }
      if (!accepted) {
        // no downhill progress along this direction; drop the curvature
        // estimate once, then only a small gradient counts as converged
        if (B.isIdentity(0.0)) {
          converged = g.lpNorm<Eigen::Infinity>() < opts.outer_tol_grad;
          if (converged) break;
          std::ostringstream trace;
          trace << "grad=" << format_double(g.lpNorm<Eigen::Infinity>()) << " V trace:";
          for (double v : report.v_trace) trace << ' ' << format_double(v);
          throw ConvergenceError("laml: line search failed away from a stationary point",
                                 trace.str());
        }
        B.setIdentity();
        continue;
      }

      // freeze smoothing parameters that ran into the box
      for (int k = 0; k < n_pen; ++k) {
        if (frozen[static_cast<std::size_t>(k)]) continue;
        if (std::abs(x_new[k]) >= opts.rho_bound - 1e-12) {
          frozen[static_cast<std::size_t>(k)] = true;
          const std::string which = x_new[k] > 0 ? "upper" : "lower";
          report.notices.push_back("smoothing parameter '" +
                                   blocks.penalties[static_cast<std::size_t>(k)].label +
                                   "' frozen at the " + which + " bound (rho=" +
                                   format_double(x_new[k]) + ")");
        }
      }

      const Eigen::VectorXd g_new = fd_gradient(x_new);
      const Eigen::VectorXd s_vec = x_new - x;
      const Eigen::VectorXd y_vec = g_new - g;
      const double sy = s_vec.dot(y_vec);
      if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
        const Eigen::VectorXd By = B * y_vec;
        const double yBy = y_vec.dot(By);
        B += ((sy + yBy) / (sy * sy)) * (s_vec * s_vec.transpose()) -
             (By * s_vec.transpose() + s_vec * By.transpose()) / sy;
      }

      const double delta_v = std::abs(ev_new.v - cur.v);
      x = x_new;
      cur = ev_new;
      g = g_new;
      report.v_trace.push_back(cur.v);
      report.final_delta_v = delta_v;
      report.final_grad_norm = g.lpNorm<Eigen::Infinity>();
      if (delta_v < opts.outer_tol_value && report.final_grad_norm < opts.outer_tol_grad) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream trace;
      trace << "V trace:";
      for (double v : report.v_trace) trace << ' ' << format_double(v);
      throw ConvergenceError("laml: outer iteration did not converge within " +
                                 std::to_string(opts.outer_max_iter) + " iterations",
                             trace.str());
    }
    report.converged = true;
  } else {
    report.converged = true;
    report.outer_iterations = 0;
  }

  // assemble the fit at the optimum
  FitResult fit;
  fit.design = blocks;
  fit.design.clear_rows();
  fit.beta = cur.pirls_result.theta;
  fit.coef_names = blocks.coef_names;
  const CutPoints cuts = n_free_cuts > 0
                             ? CutPoints::from_log_gaps(clamp_rho(x).tail(n_free_cuts))
                             : CutPoints(Eigen::VectorXd::Constant(1, CutPoints::kFirst));
  fit.alpha = cuts.alpha();
  fit.rho = clamp_rho(x).head(n_pen);
  for (const auto& b : blocks.penalties) fit.rho_names.push_back(b.label);
  fit.loglik = cur.pirls_result.loglik;
  fit.penalized_loglik = cur.pirls_result.penalized_loglik;
  fit.laml = cur.v;
  fit.report = std::move(report);
  if (cur.pirls_result.ridge_used)
    fit.report.notices.push_back("ridge stabilisation was applied to the penalized Hessian");

  for (int k = 0; k < n_pen; ++k) {
    if (blocks.penalties[static_cast<std::size_t>(k)].label == "ri(patient)") {
      fit.sigma_b = std::exp(-fit.rho[k] / 2.0);
    }
  }

  // joint (theta, delta) information for covariance and edf
  const LikelihoodState st = loglik(blocks, fit.beta, cuts, d);
  if (!st.finite) throw ConvergenceError("laml: non-finite likelihood at the optimum");
  if (st.guard_triggered)
    fit.report.notices.push_back("probability floor reached while evaluating the likelihood");
  const Eigen::Index q = p + n_free_cuts;
  Eigen::MatrixXd n_unpen = -st.hessian;
  Eigen::MatrixXd n_pen_mat = n_unpen;
  {
    Eigen::MatrixXd s_lambda = Eigen::MatrixXd::Zero(p, p);
    add_penalty_into(s_lambda, blocks, fit.rho);
    n_pen_mat.topLeftCorner(p, p) += s_lambda;
  }
  bool cov_ridge = false;
  const auto llt = robust_llt(n_pen_mat, &cov_ridge, "covariance");
  if (cov_ridge)
    fit.report.notices.push_back("ridge stabilisation was applied to the joint information");
  fit.covariance = llt.solve(Eigen::MatrixXd::Identity(q, q));
  fit.covariance = ((fit.covariance + fit.covariance.transpose()) / 2.0).eval();

  const EdfResult ed = edf(n_pen_mat, n_unpen);
  fit.edf_by_coef = ed.by_coef;
  fit.edf_total = ed.total;
  for (const auto& term : blocks.terms) {
    TermEdf te;
    te.term = term.label;
    te.edf = ed.by_coef.segment(term.offset, term.count).sum();
    fit.edf_terms.push_back(std::move(te));
  }
  if (n_free_cuts > 0)
    fit.edf_terms.push_back({"cutpoints", ed.by_coef.tail(n_free_cuts).sum()});

  return fit;
}

Prediction predict(const FitResult& fit, const Dataset& newdata, PredictMode mode,
                   int ghq_points) {
  std::vector<bool> unknown;
  const Eigen::MatrixXd Xn = fit.design.design_for(newdata, &unknown);
  if (mode == PredictMode::conditional) {
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      if (unknown[i])
        throw ValidationError("conditional prediction for patient '" +
                              newdata.records[i].patient_id +
                              "' absent from the training data");
    }
    if (ghq_points > 0)
      throw ArgumentError("marginal (quadrature) prediction applies to population mode");
  }

  Eigen::VectorXd theta = fit.beta;
  const int ri_off = fit.design.ri_offset();
  if (mode == PredictMode::population && ri_off >= 0) {
    const auto& term = *std::find_if(fit.design.terms.begin(), fit.design.terms.end(),
                                     [](const TermRange& t) {
                                       return t.kind == TermKind::random_intercept;
                                     });
    theta.segment(term.offset, term.count).setZero();
  }

  Prediction out;
  out.eta = Xn * theta;
  const CutPoints cuts{fit.alpha};
  const int R = cuts.n_categories();
  out.probs.resize(Xn.rows(), R);
  if (ghq_points > 0) {
    if (!fit.sigma_b)
      throw ArgumentError("marginal prediction requires a fitted random intercept");
    const GhqRule rule = gauss_hermite_normal(ghq_points);
    for (Eigen::Index i = 0; i < Xn.rows(); ++i) {
      for (int r = 0; r < R; ++r) {
        double acc = 0.0;
        for (int qi = 0; qi < ghq_points; ++qi)
          acc += rule.weights[qi] *
                 category_prob(cuts, out.eta[i] + *fit.sigma_b * rule.nodes[qi], r);
        out.probs(i, r) = acc;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < Xn.rows(); ++i)
      for (int r = 0; r < R; ++r) out.probs(i, r) = category_prob(cuts, out.eta[i], r);
  }
  return out;
}

std::vector<SmoothGrid> smooth_grids(const FitResult& fit, int points) {
  std::vector<SmoothGrid> out;
  std::size_t smooth_idx = 0;
  for (const auto& term : fit.design.terms) {
    if (term.kind != TermKind::smooth) continue;
    const SmoothBasis& b = fit.design.smooths.at(smooth_idx++);
    SmoothGrid g;
    g.term = term.label;
    g.x.setLinSpaced(points, b.x_min, b.x_max);
    const Eigen::MatrixXd cols = b.eval_at(g.x);
    g.fit = cols * fit.beta.segment(term.offset, term.count);
    const Eigen::MatrixXd cov =
        fit.covariance.block(term.offset, term.offset, term.count, term.count);
    g.se.resize(points);
    for (int i = 0; i < points; ++i) {
      const Eigen::VectorXd row = cols.row(i);
      g.se[i] = std::sqrt(std::max(0.0, row.dot(cov * row)));
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace ordgam
