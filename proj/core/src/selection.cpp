#include "ordgam/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "ordgam/errors.hpp"
#include "ordgam/likelihood.hpp"
#include "ordgam/log.hpp"
#include "ordgam/rng.hpp"

namespace ordgam {

std::pair<double, double> aic_bic(const FitResult& fit, std::size_t n) {
  const double aic = -2.0 * fit.loglik + 2.0 * fit.edf_total;
  const double bic = -2.0 * fit.loglik + std::log(static_cast<double>(n)) * fit.edf_total;
  return {aic, bic};
}

std::vector<int> make_patient_folds(std::size_t n_patients, int folds, std::uint64_t seed) {
  if (folds < 2) throw ArgumentError("need at least 2 folds");
  if (static_cast<std::size_t>(folds) > n_patients)
    throw ArgumentError("more folds than patients");
  std::vector<std::size_t> order(n_patients);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::substream(seed, 0x666f6c64 /* "fold" */));
  deterministic_shuffle(order, rng);
  std::vector<int> fold_of(n_patients);
  for (std::size_t t = 0; t < n_patients; ++t)
    fold_of[order[t]] = static_cast<int>(t % static_cast<std::size_t>(folds));
  return fold_of;
}

Eigen::VectorXd rpe_per_category(const std::vector<int>& y, const Eigen::MatrixXd& probs) {
  if (static_cast<Eigen::Index>(y.size()) != probs.rows())
    throw ArgumentError("rpe: row mismatch");
  const int R = static_cast<int>(probs.cols());
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(R);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (int r = 0; r < R; ++r) {
      const double ind = y[static_cast<std::size_t>(i)] == r ? 1.0 : 0.0;
      const double e = ind - probs(i, r);
      sums[r] += e * e;
    }
  }
  return (sums / static_cast<double>(probs.rows())).cwiseSqrt();
}

namespace {

// every factor level used by the spec must appear in each training subset
bool folds_cover_levels(const ModelSpec& spec, const Dataset& d,
                        const std::vector<int>& fold_of, int folds) {
  std::vector<std::string> factor_terms;
  for (const auto& t : spec.linear)
    if (is_factor_term(t)) factor_terms.push_back(t);
  for (const auto& s : spec.smooths)
    if (s.by) factor_terms.push_back(*s.by);
  if (factor_terms.empty()) return true;

  for (int f = 0; f < folds; ++f) {
    for (const auto& term : factor_terms) {
      const FactorColumn col = factor_column(d, term);
      std::vector<bool> seen(col.levels.size(), false);
      for (std::size_t p = 0; p < d.n_patients(); ++p) {
        if (fold_of[p] == f) continue;  // held out
        const auto [lo, hi] = d.patient_ranges[p];
        for (std::size_t i = lo; i < hi; ++i) seen[static_cast<std::size_t>(col.index[i])] = true;
      }
      if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return false;
    }
  }
  return true;
}

struct FoldAccumulator {
  Eigen::VectorXd sq_sums;
  std::size_t rows = 0;
};

}  // namespace

CvResult cv_rmspe(const ModelSpec& spec, const Dataset& d, int folds, std::uint64_t seed,
                  const CvOptions& opts) {
  CvResult result;
  result.folds = folds;
  result.seed_used = seed;
  result.fold_of_patient = make_patient_folds(d.n_patients(), folds, seed);
  if (!folds_cover_levels(spec, d, result.fold_of_patient, folds)) {
    log::warn("cv: a training fold lost a factor level; reshuffling with seed+1");
    result.seed_used = seed + 1;
    result.fold_of_patient = make_patient_folds(d.n_patients(), folds, result.seed_used);
    if (!folds_cover_levels(spec, d, result.fold_of_patient, folds))
      throw ValidationError("cv: training folds miss factor levels even after reseeding; "
                            "use fewer folds");
  }

  const int R = d.n_categories;
  std::vector<FoldAccumulator> acc(static_cast<std::size_t>(folds));
  std::vector<std::string> errors(static_cast<std::size_t>(folds));

  auto run_fold = [&](int f) {
    try {
      std::vector<bool> train_keep(d.n_patients()), test_keep(d.n_patients());
      for (std::size_t p = 0; p < d.n_patients(); ++p) {
        const bool held_out = result.fold_of_patient[p] == f;
        train_keep[p] = !held_out;
        test_keep[p] = held_out;
      }
      const Dataset train = d.subset_patients(train_keep);
      const Dataset test = d.subset_patients(test_keep);
      const DesignBlocks blocks = assemble(spec, train, opts.tprs);
      const FitResult fit = laml(blocks, train, opts.fit);
      const Prediction pred =
          predict(fit, test, PredictMode::population, opts.ghq_points);
      FoldAccumulator& a = acc[static_cast<std::size_t>(f)];
      a.sq_sums = Eigen::VectorXd::Zero(R);
      a.rows = test.n();
      for (std::size_t i = 0; i < test.n(); ++i) {
        for (int r = 0; r < R; ++r) {
          const double ind = test.records[i].score == r ? 1.0 : 0.0;
          const double e = ind - pred.probs(static_cast<Eigen::Index>(i), r);
          a.sq_sums[r] += e * e;
        }
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(f)] = e.what();
    }
  };

  const int workers = std::max(1, std::min(opts.threads, folds));
  if (workers == 1) {
    for (int f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int f = next.fetch_add(1); f < folds; f = next.fetch_add(1)) run_fold(f);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (int f = 0; f < folds; ++f)
    if (!errors[static_cast<std::size_t>(f)].empty())
      throw ConvergenceError("cv: fold " + std::to_string(f) + " failed: " +
                             errors[static_cast<std::size_t>(f)]);

  // deterministic ordered reduction over folds
  Eigen::VectorXd total = Eigen::VectorXd::Zero(R);
  std::size_t rows = 0;
  for (int f = 0; f < folds; ++f) {
    total += acc[static_cast<std::size_t>(f)].sq_sums;
    rows += acc[static_cast<std::size_t>(f)].rows;
  }
  result.rpe = (total / static_cast<double>(rows)).cwiseSqrt();
  return result;
}

OddsRatioTable odds_ratios(const FitResult& fit, const std::string& term) {
  const FactorTermInfo* info = nullptr;
  const TermRange* range = nullptr;
  for (const auto& f : fit.design.factors)
    if (f.name == term) info = &f;
  for (const auto& t : fit.design.terms)
    if (t.label == term && t.kind == TermKind::factor) range = &t;
  if (!info || !range)
    throw ArgumentError("'" + term + "' is not a fitted factor term");
  if (fit.covariance.rows() < fit.beta.size())
    throw ArgumentError("fit carries no covariance; refit or load with covariance");

  OddsRatioTable table;
  table.term = term;
  const int L = static_cast<int>(info->levels.size());
  for (int lev = 0; lev < L; ++lev) {
    OddsRatioRow row;
    row.level = info->levels[static_cast<std::size_t>(lev)];
    if (lev == info->reference) {
      row.reference = true;
    } else {
      const int c = range->offset + lev - (lev > info->reference ? 1 : 0);
      row.log_or = fit.beta[c];
      row.se = std::sqrt(std::max(0.0, fit.covariance(c, c)));
      row.odds_ratio = std::exp(row.log_or);
      row.ci_low = std::exp(row.log_or - 1.96 * row.se);
      row.ci_high = std::exp(row.log_or + 1.96 * row.se);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

PoDiagnostic po_diagnostic(const ModelSpec& spec, const Dataset& d,
                           const std::string& term, const CvOptions& opts) {
  if (d.n_categories < 3)
    throw ArgumentError("proportional-odds diagnostic needs at least 3 categories");
  PoDiagnostic out;
  {
    const DesignBlocks blocks = assemble(spec, d, opts.tprs);
    const FitResult fit = laml(blocks, d, opts.fit);
    out.proportional = odds_ratios(fit, term);
  }
  for (int r = 0; r <= d.n_categories - 2; ++r) {
    out.r_values.push_back(r);
    const Dataset binary = collapse_binary(d, r);
    try {
      const DesignBlocks blocks = assemble(spec, binary, opts.tprs);
      const FitResult fit = laml(blocks, binary, opts.fit);
      out.binary.push_back(odds_ratios(fit, term));
      out.binary_converged.push_back(true);
    } catch (const ConvergenceError& e) {
      log::warn("po_diagnostic: binary fit at r=" + std::to_string(r) +
                " did not converge: " + e.what());
      OddsRatioTable empty;
      empty.term = term;
      out.binary.push_back(std::move(empty));
      out.binary_converged.push_back(false);
    }
  }
  return out;
}

Eigen::VectorXd quantile_residuals(const FitResult& fit, const Dataset& d,
                                   std::uint64_t seed) {
  const Prediction pred = predict(fit, d, PredictMode::conditional);
  const CutPoints cuts{fit.alpha};
  Rng rng(Rng::substream(seed, 0x72657369 /* "resi" */));
  Eigen::VectorXd out(static_cast<Eigen::Index>(d.n()));
  for (std::size_t i = 0; i < d.n(); ++i) {
    const int y = d.records[i].score;
    const double eta = pred.eta[static_cast<Eigen::Index>(i)];
    const double lo = y == 0 ? 0.0 : cumulative_prob(cuts, eta, y - 1);
    const double hi = cumulative_prob(cuts, eta, y);
    double u = lo + rng.uniform() * (hi - lo);
    u = std::min(1.0 - 1e-15, std::max(1e-15, u));
    out[static_cast<Eigen::Index>(i)] = logistic_quantile(u);
  }
  return out;
}

SelectionReport compare_models(const std::vector<ModelSpec>& specs, const Dataset& d,
                               int folds, std::uint64_t seed, const CvOptions& opts) {
  SelectionReport report;
  report.seed = seed;
  report.folds = folds;
  for (const auto& spec : specs) {
    ModelComparisonRow row;
    row.label = spec.label;
    row.n = d.n();
    const DesignBlocks blocks = assemble(spec, d, opts.tprs);
    const FitResult fit = laml(blocks, d, opts.fit);
    row.edf = fit.edf_total;
    std::tie(row.aic, row.bic) = aic_bic(fit, d.n());
    row.rpe = cv_rmspe(spec, d, folds, seed, opts).rpe;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ordgam
