#pragma once

#include <string>
#include <vector>

namespace ordgam {

// Linear-quadratic parameters with accelerated repopulation. Defaults are
// the acute-mucosa values: alpha/beta = 10 Gy, alpha = 0.3 / Gy, onset of
// accelerated repopulation 7 days, doubling time 2.5 days.
struct BedParams {
  double alpha_beta = 10.0;   // Gy
  double alpha = 0.3;         // 1/Gy
  double onset_days = 7.0;    // T_k
  double doubling_days = 2.5; // T_p

  void validate() const;
};

struct Fraction {
  int day = 0;      // days since first fraction's day origin
  double dose = 0;  // Gy
};

struct BedSchedule {
  std::vector<Fraction> fractions;  // days non-decreasing, doses positive

  void validate() const;
  static BedSchedule from_csv(const std::string& path);
};

struct BedPoint {
  int fraction = 0;  // 1-based
  int day = 0;
  double cumdose = 0;
  double bed = 0;
};

// BED after fraction `upto` (1-based):
//   sum_k d_k (1 + d_k / (alpha/beta)) - max(0, T - T_k) ln2 / (alpha T_p)
// where the elapsed time T counts days from the first fraction's day through
// the current fraction's day inclusive (a one-fraction schedule has T = 1).
// The repopulation term can push BED negative; the value is returned as-is
// with a warning.
double bed_at(const BedSchedule& s, std::size_t upto, const BedParams& p = {});

std::vector<BedPoint> bed_series(const BedSchedule& s, const BedParams& p = {});

}  // namespace ordgam
