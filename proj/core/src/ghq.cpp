#include "ordgam/ghq.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "ordgam/errors.hpp"

namespace ordgam {

GhqRule gauss_hermite_normal(int points) {
  if (points < 1) throw ArgumentError("quadrature needs at least 1 point");
  // Golub-Welsch on the Hermite Jacobi matrix
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(points, points);
  for (int i = 1; i < points; ++i) {
    const double b = std::sqrt(i / 2.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GhqRule rule;
  rule.nodes = es.eigenvalues() * std::sqrt(2.0);  // scaled for the N(0,1) measure
  rule.weights.resize(points);
  for (int q = 0; q < points; ++q) {
    const double v = es.eigenvectors()(0, q);
    rule.weights[q] = v * v;
  }
  return rule;
}

}  // namespace ordgam
