#include "ordgam/bed.hpp"

#include <cmath>

#include "ordgam/csv.hpp"
#include "ordgam/errors.hpp"
#include "ordgam/log.hpp"

namespace ordgam {

void BedParams::validate() const {
  if (!(alpha_beta > 0)) throw ArgumentError("alpha/beta must be > 0");
  if (!(alpha > 0)) throw ArgumentError("alpha must be > 0");
  if (onset_days < 0) throw ArgumentError("repopulation onset must be >= 0");
  if (!(doubling_days > 0)) throw ArgumentError("doubling time must be > 0");
}

void BedSchedule::validate() const {
  if (fractions.empty()) throw ArgumentError("schedule has no fractions");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i].day < 0)
      throw ArgumentError("fraction " + std::to_string(i + 1) + ": negative day");
    if (!(fractions[i].dose > 0))
      throw ArgumentError("fraction " + std::to_string(i + 1) + ": dose must be > 0");
    if (i > 0 && fractions[i].day < fractions[i - 1].day)
      throw ArgumentError("fraction days must be non-decreasing");
  }
}

BedSchedule BedSchedule::from_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int c_day = t.column("day");
  const int c_dose = t.column("dose");
  if (c_day < 0 || c_dose < 0)
    throw SchemaError("schedule CSV needs columns 'day' and 'dose'");
  BedSchedule s;
  for (const auto& row : t.rows) {
    Fraction f;
    f.day = std::stoi(row[c_day]);
    f.dose = std::stod(row[c_dose]);
    s.fractions.push_back(f);
  }
  s.validate();
  return s;
}

double bed_at(const BedSchedule& s, std::size_t upto, const BedParams& p) {
  s.validate();
  p.validate();
  if (upto < 1 || upto > s.fractions.size())
    throw ArgumentError("fraction index " + std::to_string(upto) + " outside 1.." +
                        std::to_string(s.fractions.size()));
  double lq = 0.0;
  for (std::size_t k = 0; k < upto; ++k) {
    const double d = s.fractions[k].dose;
    lq += d * (1.0 + d / p.alpha_beta);
  }
  const double elapsed = s.fractions[upto - 1].day - s.fractions[0].day + 1.0;
  const double repop =
      std::max(0.0, elapsed - p.onset_days) * std::log(2.0) / (p.alpha * p.doubling_days);
  const double bed = lq - repop;
  if (bed < 0)
    log::warn("BED is negative (" + format_double(bed) +
              " Gy): repopulation dominates the delivered dose");
  return bed;
}

std::vector<BedPoint> bed_series(const BedSchedule& s, const BedParams& p) {
  s.validate();
  std::vector<BedPoint> out;
  out.reserve(s.fractions.size());
  double cum = 0.0;
  for (std::size_t k = 1; k <= s.fractions.size(); ++k) {
    cum += s.fractions[k - 1].dose;
    BedPoint pt;
    pt.fraction = static_cast<int>(k);
    pt.day = s.fractions[k - 1].day;
    pt.cumdose = cum;
    pt.bed = bed_at(s, k, p);
    out.push_back(pt);
  }
  return out;
}

}  // namespace ordgam
