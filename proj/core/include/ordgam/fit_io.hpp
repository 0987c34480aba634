#pragma once

#include <string>

#include "ordgam/fit.hpp"

namespace ordgam {

// Self-contained JSON form of a fit: estimates, uncertainty, and the design
// transforms needed to predict for new data. The design rows themselves are
// not stored.
std::string fit_to_json(const FitResult& fit, bool include_covariance = false);
FitResult fit_from_json(const std::string& text);
FitResult fit_from_json_file(const std::string& path);

}  // namespace ordgam
