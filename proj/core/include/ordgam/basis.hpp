#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ordgam/data.hpp"
#include "ordgam/model_spec.hpp"

namespace ordgam {

// Univariate thin plate regression spline block after absorbing the
// sum-to-zero constraint: k-1 design columns whose penalty has rank k-2 and
// a one-dimensional null space (the linear trend). Columns are centered and
// RMS-scaled; the penalty is rescaled to the magnitude of the block's
// cross-product so log smoothing parameters live on a comparable scale
// across terms.
struct SmoothBasis {
  std::string covariate;
  int k = 0;
  std::string by_factor;                  // empty when not a by-smooth
  std::optional<std::string> by_level;

  Eigen::MatrixXd columns;                // n x (k-1), masked rows zero for by-smooths
  Eigen::MatrixXd penalty;                // (k-1) x (k-1), symmetric PSD
  int penalty_rank = 0;
  double penalty_logdet = 0.0;            // log pseudo-determinant

  // construction data, needed to evaluate the basis at new covariate values
  Eigen::VectorXd knots;
  Eigen::MatrixXd radial_projection;      // K x (k-2)
  Eigen::VectorXd center;                 // length k-1
  Eigen::VectorXd scale;                  // length k-1
  double x_min = 0.0, x_max = 0.0;

  // rows of the constrained basis at arbitrary covariate values (no by-mask)
  Eigen::MatrixXd eval_at(const Eigen::VectorXd& x) const;
  // maps constrained coefficients back to the k pre-constraint coordinates
  // [radial..., linear, constant]
  Eigen::MatrixXd constraint_transform() const;
};

struct RandomInterceptInfo {
  std::string factor;  // grouping column, e.g. "patient"
  std::vector<std::string> levels;
};

struct FactorTermInfo {
  std::string name;
  std::vector<std::string> levels;
  int reference = 0;
};

enum class TermKind { intercept, linear, factor, smooth, random_intercept, cutpoints };

struct TermRange {
  std::string label;
  TermKind kind;
  int offset = 0;
  int count = 0;
};

struct PenaltyBlock {
  std::string label;
  int offset = 0;  // first coefficient of the penalized range
  int dim = 0;
  Eigen::MatrixXd S;
  int rank = 0;
  double logdet_plus = 0.0;
};

// Assembled model: design matrix, penalties, and everything required to
// rebuild design rows for new data.
struct DesignBlocks {
  ModelSpec spec;
  int n_categories = 2;
  Eigen::MatrixXd X;
  std::vector<std::string> coef_names;
  std::vector<TermRange> terms;
  std::vector<FactorTermInfo> factors;
  std::vector<SmoothBasis> smooths;       // by-smooths expanded per level
  std::optional<RandomInterceptInfo> random_intercept;
  std::vector<PenaltyBlock> penalties;
  int n_parametric = 0;

  int p() const { return static_cast<int>(X.cols()); }
  // dimension of the total-penalty null space (unpenalized coefficients)
  int penalty_null_dim() const;
  int ri_offset() const;  // -1 when no random intercept

  // Rebuild design rows for new data using the stored transforms. Unknown
  // factor levels are an error; patients absent from the training data get
  // an all-zero random-intercept row (the caller decides whether that is
  // acceptable).
  Eigen::MatrixXd design_for(const Dataset& newdata,
                             std::vector<bool>* unknown_patient = nullptr) const;
  // drop the stored rows to shrink serialized fits; transforms are kept
  void clear_rows() { X.resize(0, 0); }
};

struct TprsOptions {
  int max_knots = 2000;  // above this many distinct values, knots sit at quantiles
};

SmoothBasis tprs_basis(const Eigen::VectorXd& x, int k,
                       const std::optional<Eigen::VectorXd>& knots = std::nullopt,
                       const TprsOptions& opts = {});

// One smooth per factor level: level rows keep the pooled basis (re-centered
// and re-scaled within the level), other rows are zero. Each block carries
// its own smoothing parameter.
std::vector<SmoothBasis> by_factor(const SmoothBasis& pooled, const Eigen::VectorXd& x,
                                   const std::vector<int>& level_index,
                                   const std::vector<std::string>& levels,
                                   const std::string& factor_name);

DesignBlocks assemble(const ModelSpec& spec, const Dataset& d, const TprsOptions& opts = {});

}  // namespace ordgam
