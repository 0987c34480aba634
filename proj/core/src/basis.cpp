#include "ordgam/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "ordgam/errors.hpp"

namespace ordgam {

namespace {

// thin plate radial function for one dimension, second-order penalty;
// d'Ed equals the integrated squared second derivative of the interpolant
double tps_eta(double r) { return r * r * r / 12.0; }

Eigen::VectorXd sorted_unique(const Eigen::VectorXd& x) {
  std::vector<double> v(x.data(), x.data() + x.size());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd radial_columns(const Eigen::VectorXd& knots,
                               const Eigen::MatrixXd& projection,
                               const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const Eigen::Index K = knots.size();
  Eigen::MatrixXd out(n, projection.cols());
  constexpr Eigen::Index chunk = 512;
  Eigen::MatrixXd e(std::min(chunk, n), K);
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index rows = std::min(chunk, n - start);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < K; ++j)
        e(i, j) = tps_eta(std::abs(x[start + i] - knots[j]));
    out.middleRows(start, rows) = e.topRows(rows) * projection;
  }
  return out;
}

struct TprsCore {
  Eigen::VectorXd knots;
  Eigen::MatrixXd projection;   // K x (k-2), U_k Z
  Eigen::MatrixXd penalty_pre;  // (k-1) x (k-1): radial block Z' D Z, zero linear row/col
};

TprsCore tprs_core(const Eigen::VectorXd& x, int k,
                   const std::optional<Eigen::VectorXd>& knots_in,
                   const TprsOptions& opts, const std::string& what) {
  if (k < 3) throw ArgumentError(what + ": basis dimension k must be >= 3");
  const Eigen::VectorXd distinct = sorted_unique(x);
  const Eigen::Index D = distinct.size();
  if (D < k)
    throw ArgumentError(what + ": only " + std::to_string(D) +
                        " distinct covariate values for k=" + std::to_string(k) +
                        "; reduce k");

  TprsCore core;
  if (knots_in) {
    core.knots = sorted_unique(*knots_in);
    if (core.knots.size() < k) throw ArgumentError(what + ": fewer knots than k");
  } else if (D <= opts.max_knots) {
    core.knots = distinct;
  } else {
    // quantile-spaced subset of the distinct values
    const Eigen::Index K = opts.max_knots;
    core.knots.resize(K);
    Eigen::Index prev = -1;
    for (Eigen::Index j = 0; j < K; ++j) {
      auto idx = static_cast<Eigen::Index>(
          std::floor(static_cast<double>(j) * static_cast<double>(D - 1) /
                         static_cast<double>(K - 1) +
                     0.5));
      if (idx <= prev) idx = prev + 1;
      prev = idx;
      core.knots[j] = distinct[idx];
    }
  }

  const Eigen::Index K = core.knots.size();
  Eigen::MatrixXd E(K, K);
  for (Eigen::Index i = 0; i < K; ++i) {
    E(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = tps_eta(core.knots[i] - core.knots[j]);
      E(i, j) = v;
      E(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E);
  if (es.info() != Eigen::Success)
    throw Error(what + ": eigendecomposition of the radial kernel failed");

  // keep the k eigenpairs of largest magnitude (ties broken by index)
  std::vector<Eigen::Index> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(ev[a]) > std::abs(ev[b]);
  });
  Eigen::MatrixXd Uk(K, k);
  Eigen::VectorXd dk(k);
  for (int j = 0; j < k; ++j) {
    Uk.col(j) = es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    dk[j] = ev[order[static_cast<std::size_t>(j)]];
  }

  Eigen::MatrixXd T(K, 2);
  T.col(0).setOnes();
  T.col(1) = core.knots;
  // null space of T' U_k within the truncated coefficient space
  Eigen::MatrixXd Ct = (T.transpose() * Uk).transpose();  // k x 2
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Ct);
  Eigen::MatrixXd Q = qr.householderQ();
  Eigen::MatrixXd Z = Q.rightCols(k - 2);

  core.projection = Uk * Z;
  core.penalty_pre = Eigen::MatrixXd::Zero(k - 1, k - 1);
  core.penalty_pre.topLeftCorner(k - 2, k - 2) = Z.transpose() * dk.asDiagonal() * Z;
  // symmetry can drift at the last bit through the products
  core.penalty_pre = ((core.penalty_pre + core.penalty_pre.transpose()) / 2.0).eval();
  return core;
}

void finish_penalty(SmoothBasis& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.penalty);
  const double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
  const double thresh = max_ev * 1e-10;
  b.penalty_rank = 0;
  b.penalty_logdet = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > thresh) {
      ++b.penalty_rank;
      b.penalty_logdet += std::log(es.eigenvalues()[i]);
    }
  }
}

// center + scale the pre-constraint columns over `rows` (all rows when empty),
// zero out all other rows, attach the transformed penalty
SmoothBasis finalize_block(const TprsCore& core, const Eigen::MatrixXd& pre,
                           const Eigen::VectorXd& x, int k,
                           const std::vector<Eigen::Index>& rows,
                           const std::string& covariate) {
  SmoothBasis b;
  b.covariate = covariate;
  b.k = k;
  b.knots = core.knots;
  b.radial_projection = core.projection;

  const Eigen::Index n = pre.rows();
  const Eigen::Index m = pre.cols();  // k-1
  const bool masked = !rows.empty();
  const double cnt = masked ? static_cast<double>(rows.size()) : static_cast<double>(n);

  b.center.resize(m);
  b.scale.resize(m);
  if (masked) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double s = 0;
      for (auto i : rows) s += pre(i, j);
      b.center[j] = s / cnt;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      double s = 0;
      for (auto i : rows) {
        const double v = pre(i, j) - b.center[j];
        s += v * v;
      }
      b.scale[j] = std::sqrt(s / cnt);
      if (!(b.scale[j] > 0)) b.scale[j] = 1.0;
    }
    b.columns = Eigen::MatrixXd::Zero(n, m);
    for (auto i : rows)
      for (Eigen::Index j = 0; j < m; ++j)
        b.columns(i, j) = (pre(i, j) - b.center[j]) / b.scale[j];
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : rows) {
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    b.x_min = lo;
    b.x_max = hi;
  } else {
    b.center = pre.colwise().mean();
    Eigen::MatrixXd c = pre.rowwise() - b.center.transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
      b.scale[j] = std::sqrt(c.col(j).squaredNorm() / cnt);
      if (!(b.scale[j] > 0)) b.scale[j] = 1.0;
      c.col(j) /= b.scale[j];
    }
    b.columns = std::move(c);
    b.x_min = x.minCoeff();
    b.x_max = x.maxCoeff();
  }

  Eigen::MatrixXd S = core.penalty_pre;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) S(i, j) /= b.scale[i] * b.scale[j];
  // penalty magnitude matched to the block cross-product so that smoothing
  // parameters of different terms live on comparable log scales
  Eigen::MatrixXd XtX(m, m);
  XtX.setZero();
  XtX.selfadjointView<Eigen::Lower>().rankUpdate(b.columns.transpose());
  const double nX = Eigen::MatrixXd(XtX.selfadjointView<Eigen::Lower>()).norm();
  const double nS = S.norm();
  if (nS > 0 && nX > 0) S *= nX / nS;
  b.penalty = std::move(S);
  finish_penalty(b);
  return b;
}

}  // namespace

Eigen::MatrixXd SmoothBasis::eval_at(const Eigen::VectorXd& x) const {
  const Eigen::Index m = center.size();
  Eigen::MatrixXd out(x.size(), m);
  out.leftCols(m - 1) = radial_columns(knots, radial_projection, x);
  out.col(m - 1) = x;
  out.rowwise() -= center.transpose();
  for (Eigen::Index j = 0; j < m; ++j) out.col(j) /= scale[j];
  return out;
}

Eigen::MatrixXd SmoothBasis::constraint_transform() const {
  const Eigen::Index m = center.size();  // k-1
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    t(j, j) = 1.0 / scale[j];
    t(m, j) = -center[j] / scale[j];
  }
  return t;
}

SmoothBasis tprs_basis(const Eigen::VectorXd& x, int k,
                       const std::optional<Eigen::VectorXd>& knots,
                       const TprsOptions& opts) {
  const TprsCore core = tprs_core(x, k, knots, opts, "tprs");
  Eigen::MatrixXd pre(x.size(), k - 1);
  pre.leftCols(k - 2) = radial_columns(core.knots, core.projection, x);
  pre.col(k - 2) = x;
  return finalize_block(core, pre, x, k, {}, "x");
}

std::vector<SmoothBasis> by_factor(const SmoothBasis& pooled, const Eigen::VectorXd& x,
                                   const std::vector<int>& level_index,
                                   const std::vector<std::string>& levels,
                                   const std::string& factor_name) {
  if (levels.size() < 2) throw ArgumentError("by-factor needs at least 2 levels");
  if (static_cast<Eigen::Index>(level_index.size()) != x.size())
    throw ArgumentError("by_factor: row count mismatch");

  TprsCore core;
  core.knots = pooled.knots;
  core.projection = pooled.radial_projection;
  // recover the pre-constraint penalty: projection' E projection on the
  // radial block (exact because the projection columns live in the kernel
  // eigenspace)
  {
    const Eigen::Index K = core.knots.size();
    Eigen::MatrixXd E(K, K);
    for (Eigen::Index i = 0; i < K; ++i) {
      E(i, i) = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double v = tps_eta(core.knots[i] - core.knots[j]);
        E(i, j) = v;
        E(j, i) = v;
      }
    }
    const Eigen::Index m = pooled.center.size();
    core.penalty_pre = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd s =
        core.projection.transpose() * E.selfadjointView<Eigen::Lower>() * core.projection;
    core.penalty_pre.topLeftCorner(m - 1, m - 1) = (s + s.transpose()) / 2.0;
  }

  Eigen::MatrixXd pre(x.size(), pooled.center.size());
  pre.leftCols(pre.cols() - 1) = radial_columns(core.knots, core.projection, x);
  pre.col(pre.cols() - 1) = x;

  std::vector<SmoothBasis> out;
  for (std::size_t lev = 0; lev < levels.size(); ++lev) {
    std::vector<Eigen::Index> rows;
    std::set<double> distinct;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (level_index[static_cast<std::size_t>(i)] == static_cast<int>(lev)) {
        rows.push_back(i);
        distinct.insert(x[i]);
      }
    }
    if (distinct.size() < 3)
      throw ArgumentError("by-smooth level '" + levels[lev] + "' of factor '" +
                          factor_name + "' has fewer than 3 distinct covariate values");
    SmoothBasis b = finalize_block(core, pre, x, pooled.k, rows, pooled.covariate);
    b.by_factor = factor_name;
    b.by_level = levels[lev];
    out.push_back(std::move(b));
  }
  return out;
}

int DesignBlocks::penalty_null_dim() const {
  int rank = 0;
  for (const auto& b : penalties) rank += b.rank;
  return p() - rank;
}

int DesignBlocks::ri_offset() const {
  for (const auto& t : terms)
    if (t.kind == TermKind::random_intercept) return t.offset;
  return -1;
}

DesignBlocks assemble(const ModelSpec& spec, const Dataset& d, const TprsOptions& opts) {
  DesignBlocks blocks;
  blocks.spec = spec;
  blocks.n_categories = d.n_categories;
  const Eigen::Index n = static_cast<Eigen::Index>(d.n());

  {
    std::set<std::string> seen;
    for (const auto& t : spec.linear)
      if (!seen.insert(t).second)
        throw ArgumentError("term '" + t + "' appears twice in the linear part");
    std::set<std::string> smooth_cov;
    for (const auto& s : spec.smooths) {
      if (!smooth_cov.insert(s.covariate).second)
        throw ArgumentError("covariate '" + s.covariate + "' appears in two smooths");
      if (seen.count(s.covariate))
        throw ArgumentError("covariate '" + s.covariate +
                            "' appears both linearly and in a smooth");
    }
  }

  struct LinearPart {
    std::string name;
    bool factor;
    Eigen::VectorXd values;
    FactorColumn fcol;
    int reference = 0;
  };
  std::vector<LinearPart> parts;
  int n_par = 1;  // intercept
  for (const auto& term : spec.linear) {
    LinearPart part;
    part.name = term;
    if (is_factor_term(term)) {
      part.factor = true;
      part.fcol = factor_column(d, term);
      if (auto it = spec.reference.find(term); it != spec.reference.end()) {
        auto pos = std::find(part.fcol.levels.begin(), part.fcol.levels.end(), it->second);
        if (pos == part.fcol.levels.end())
          throw ArgumentError("reference level '" + it->second + "' not found in factor '" +
                              term + "'");
        part.reference = static_cast<int>(pos - part.fcol.levels.begin());
      }
      n_par += static_cast<int>(part.fcol.levels.size()) - 1;
    } else {
      part.factor = false;
      part.values = continuous_column(d, term);
      n_par += 1;
    }
    parts.push_back(std::move(part));
  }

  // smooth blocks (by-smooths expand to one block per level)
  std::vector<SmoothBasis> smooth_blocks;
  for (const auto& s : spec.smooths) {
    const Eigen::VectorXd x = continuous_column(d, s.covariate);
    if (s.by) {
      const FactorColumn f = factor_column(d, *s.by);
      SmoothBasis pooled = tprs_basis(x, s.k, std::nullopt, opts);
      pooled.covariate = s.covariate;
      auto per_level = by_factor(pooled, x, f.index, f.levels, *s.by);
      for (auto& b : per_level) smooth_blocks.push_back(std::move(b));
    } else {
      SmoothBasis b = tprs_basis(x, s.k, std::nullopt, opts);
      b.covariate = s.covariate;
      smooth_blocks.push_back(std::move(b));
    }
  }

  int n_smooth_cols = 0;
  for (const auto& b : smooth_blocks) n_smooth_cols += static_cast<int>(b.columns.cols());

  int n_ri = 0;
  if (spec.random_intercept) {
    if (*spec.random_intercept != "patient")
      throw ArgumentError("random intercepts are grouped by 'patient'; got '" +
                          *spec.random_intercept + "'");
    n_ri = static_cast<int>(d.n_patients());
  }

  const int p = n_par + n_smooth_cols + n_ri;
  blocks.X.resize(n, p);
  blocks.coef_names.reserve(static_cast<std::size_t>(p));
  blocks.n_parametric = n_par;

  int col = 0;
  blocks.X.col(col).setOnes();
  blocks.coef_names.push_back("(Intercept)");
  blocks.terms.push_back({"(Intercept)", TermKind::intercept, col, 1});
  ++col;

  for (const auto& part : parts) {
    if (part.factor) {
      const int L = static_cast<int>(part.fcol.levels.size());
      const int first = col;
      FactorTermInfo info{part.name, part.fcol.levels, part.reference};
      for (int lev = 0; lev < L; ++lev) {
        if (lev == part.reference) continue;
        blocks.X.col(col).setZero();
        for (Eigen::Index i = 0; i < n; ++i)
          if (part.fcol.index[static_cast<std::size_t>(i)] == lev) blocks.X(i, col) = 1.0;
        blocks.coef_names.push_back(part.name + "=" + part.fcol.levels[static_cast<std::size_t>(lev)]);
        ++col;
      }
      blocks.terms.push_back({part.name, TermKind::factor, first, L - 1});
      blocks.factors.push_back(std::move(info));
    } else {
      blocks.X.col(col) = part.values;
      blocks.coef_names.push_back(part.name);
      blocks.terms.push_back({part.name, TermKind::linear, col, 1});
      ++col;
    }
  }

  for (auto& b : smooth_blocks) {
    const int width = static_cast<int>(b.columns.cols());
    std::string label = "s(" + b.covariate + ")";
    if (b.by_level) label += ":" + b.by_factor + "=" + *b.by_level;
    blocks.X.middleCols(col, width) = b.columns;
    for (int j = 0; j < width; ++j)
      blocks.coef_names.push_back(label + "." + std::to_string(j + 1));
    blocks.terms.push_back({label, TermKind::smooth, col, width});
    PenaltyBlock pb;
    pb.label = label;
    pb.offset = col;
    pb.dim = width;
    pb.S = b.penalty;
    pb.rank = b.penalty_rank;
    pb.logdet_plus = b.penalty_logdet;
    blocks.penalties.push_back(std::move(pb));
    b.columns.resize(0, 0);  // the design matrix owns the rows now
    blocks.smooths.push_back(std::move(b));
    col += width;
  }

  if (n_ri > 0) {
    const int first = col;
    blocks.X.middleCols(col, n_ri).setZero();
    for (std::size_t pi = 0; pi < d.n_patients(); ++pi) {
      const auto [lo, hi] = d.patient_ranges[pi];
      for (std::size_t i = lo; i < hi; ++i)
        blocks.X(static_cast<Eigen::Index>(i), first + static_cast<int>(pi)) = 1.0;
      blocks.coef_names.push_back("ri(patient)=" + d.patient_ids[pi]);
    }
    blocks.terms.push_back({"ri(patient)", TermKind::random_intercept, first, n_ri});
    PenaltyBlock pb;
    pb.label = "ri(patient)";
    pb.offset = first;
    pb.dim = n_ri;
    pb.S = Eigen::MatrixXd::Identity(n_ri, n_ri);
    pb.rank = n_ri;
    pb.logdet_plus = 0.0;
    blocks.penalties.push_back(std::move(pb));
    blocks.random_intercept = RandomInterceptInfo{"patient", d.patient_ids};
    col += n_ri;
  }

  return blocks;
}

Eigen::MatrixXd DesignBlocks::design_for(const Dataset& newdata,
                                         std::vector<bool>* unknown_patient) const {
  const Eigen::Index n = static_cast<Eigen::Index>(newdata.n());
  Eigen::MatrixXd Xn = Eigen::MatrixXd::Zero(n, p());
  if (unknown_patient) unknown_patient->assign(newdata.n(), false);

  std::size_t factor_idx = 0;
  std::size_t smooth_idx = 0;
  for (const auto& term : terms) {
    switch (term.kind) {
      case TermKind::intercept:
        Xn.col(term.offset).setOnes();
        break;
      case TermKind::linear:
        Xn.col(term.offset) = continuous_column(newdata, term.label);
        break;
      case TermKind::factor: {
        const FactorTermInfo& info = factors.at(factor_idx++);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& rec = newdata.records[static_cast<std::size_t>(i)];
          const std::string& v = info.name == "site"
                                     ? rec.site
                                     : (info.name == "sex" ? rec.sex : rec.study);
          auto pos = std::find(info.levels.begin(), info.levels.end(), v);
          if (pos == info.levels.end())
            throw ValidationError("unseen level '" + v + "' of factor '" + info.name + "'");
          const int lev = static_cast<int>(pos - info.levels.begin());
          if (lev == info.reference) continue;
          const int c = term.offset + lev - (lev > info.reference ? 1 : 0);
          Xn(i, c) = 1.0;
        }
        break;
      }
      case TermKind::smooth: {
        const SmoothBasis& b = smooths.at(smooth_idx++);
        const Eigen::VectorXd x = continuous_column(newdata, b.covariate);
        if (!b.by_level) {
          Xn.middleCols(term.offset, term.count) = b.eval_at(x);
        } else {
          std::vector<Eigen::Index> rows;
          for (Eigen::Index i = 0; i < n; ++i) {
            const auto& rec = newdata.records[static_cast<std::size_t>(i)];
            const std::string& v = b.by_factor == "site"
                                       ? rec.site
                                       : (b.by_factor == "sex" ? rec.sex : rec.study);
            if (v == *b.by_level) rows.push_back(i);
          }
          if (rows.empty()) break;
          Eigen::VectorXd xs(static_cast<Eigen::Index>(rows.size()));
          for (std::size_t i = 0; i < rows.size(); ++i) xs[static_cast<Eigen::Index>(i)] = x[rows[i]];
          const Eigen::MatrixXd cols = b.eval_at(xs);
          for (std::size_t i = 0; i < rows.size(); ++i)
            Xn.block(rows[i], term.offset, 1, term.count) = cols.row(static_cast<Eigen::Index>(i));
        }
        break;
      }
      case TermKind::random_intercept: {
        const auto& info = *random_intercept;
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& rec = newdata.records[static_cast<std::size_t>(i)];
          auto pos = std::lower_bound(info.levels.begin(), info.levels.end(), rec.patient_id);
          if (pos != info.levels.end() && *pos == rec.patient_id) {
            Xn(i, term.offset + static_cast<int>(pos - info.levels.begin())) = 1.0;
          } else if (unknown_patient) {
            (*unknown_patient)[static_cast<std::size_t>(i)] = true;
          }
        }
        break;
      }
      case TermKind::cutpoints:
        break;
    }
  }
  return Xn;
}

}  // namespace ordgam
