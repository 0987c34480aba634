#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ordgam {

// One (patient, evaluation, site) row of a longitudinal ordinal study.
struct ObservationRecord {
  std::string patient_id;
  int eval_index = 0;  // 1-based within patient
  std::string site;
  int score = 0;  // ordinal category in 0..R-1
  double cumdose = 0.0;       // cumulative tumour dose, Gy
  double perc = 100.0;        // median site dose as % of cumdose
  double cumdos_site = 0.0;   // cumdose * perc / 100, Gy
  double age = 0.0;
  std::string sex;
  std::string study;
  std::optional<double> volume;  // carried through, never modeled
  std::optional<int> day;
};

struct Dataset {
  std::vector<ObservationRecord> records;
  int n_categories = 2;
  std::vector<std::string> site_levels;
  std::vector<std::string> sex_levels;
  std::vector<std::string> study_levels;
  // patients in sorted record order; patient_ranges[i] is the half-open
  // record range of patient_ids[i]
  std::vector<std::string> patient_ids;
  std::vector<std::pair<std::size_t, std::size_t>> patient_ranges;

  std::size_t n() const { return records.size(); }
  std::size_t n_patients() const { return patient_ids.size(); }
  int site_index(const std::string& label) const;     // -1 if unknown
  int patient_index(const std::string& id) const;     // -1 if unknown

  std::vector<long> score_counts() const;
  // keep patients whose index is flagged true; levels and R are preserved
  Dataset subset_patients(const std::vector<bool>& keep) const;
};

// Maps logical column names (patient, eval, site, score, cumdose, perc,
// cumdos_site, age, sex, study, volume, day) to CSV headers. Unmapped names
// default to the logical name itself.
struct CsvSchema {
  std::map<std::string, std::string> columns;
  std::optional<int> n_categories;
  std::vector<std::string> site_levels;  // declared level order; empty = appearance order

  std::string header_for(const std::string& logical) const;
  static CsvSchema from_json_file(const std::string& path);
  static CsvSchema from_json(const std::string& text);
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped_missing_score = 0;
  std::vector<std::string> warnings;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {},
                 LoadReport* report = nullptr);
Dataset dataset_from_table(const struct CsvTable& table, const CsvSchema& schema = {},
                           LoadReport* report = nullptr);
void save_csv(const Dataset& d, const std::string& path);
std::string dataset_to_csv(const Dataset& d);

// Rebuild level lists, sort records, index patients, and validate invariants.
// All Dataset producers funnel through this.
Dataset finalize_dataset(std::vector<ObservationRecord> records,
                         std::optional<int> n_categories,
                         const std::vector<std::string>& declared_site_levels = {},
                         LoadReport* report = nullptr);

// Binary collapse at cut point r: new score = 0 if old <= r else 1.
Dataset collapse_binary(const Dataset& d, int r);
// Map all scores >= from onto from, reducing R accordingly.
Dataset merge_top_categories(const Dataset& d, int from);

// Model-term accessors. `volume` is deliberately not available as a term.
Eigen::VectorXd continuous_column(const Dataset& d, const std::string& name);
struct FactorColumn {
  std::vector<int> index;           // per record, index into levels
  std::vector<std::string> levels;
};
FactorColumn factor_column(const Dataset& d, const std::string& name);
bool is_continuous_term(const std::string& name);
bool is_factor_term(const std::string& name);

}  // namespace ordgam
