#pragma once

#include <Eigen/Core>

namespace ordgam {

// Gauss-Hermite rule recast for E[g(Z)], Z ~ N(0,1): weights sum to one.
struct GhqRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GhqRule gauss_hermite_normal(int points);

}  // namespace ordgam
