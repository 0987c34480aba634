#include "ordgam/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ordgam/csv.hpp"
#include "ordgam/errors.hpp"
#include "ordgam/log.hpp"

namespace ordgam {

namespace {

const char* kLogicalColumns[] = {"patient", "eval", "site", "score",
                                 "cumdose", "perc", "cumdos_site", "age",
                                 "sex", "study", "volume", "day"};

double parse_double(const std::string& s, const char* what, std::size_t row) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(std::string("row ") + std::to_string(row) + ": cannot parse " +
                          what + " value '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const char* what, std::size_t row) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(std::string("row ") + std::to_string(row) + ": cannot parse " +
                          what + " value '" + s + "'");
  return v;
}

std::vector<std::string> appearance_levels(const std::vector<ObservationRecord>& recs,
                                           std::string ObservationRecord::*field) {
  std::vector<std::string> levels;
  for (const auto& r : recs) {
    const std::string& v = r.*field;
    if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
  }
  return levels;
}

}  // namespace

int Dataset::site_index(const std::string& label) const {
  for (std::size_t i = 0; i < site_levels.size(); ++i)
    if (site_levels[i] == label) return static_cast<int>(i);
  return -1;
}

int Dataset::patient_index(const std::string& id) const {
  auto it = std::lower_bound(patient_ids.begin(), patient_ids.end(), id);
  if (it != patient_ids.end() && *it == id)
    return static_cast<int>(it - patient_ids.begin());
  return -1;
}

std::vector<long> Dataset::score_counts() const {
  std::vector<long> counts(static_cast<std::size_t>(n_categories), 0);
  for (const auto& r : records) counts[static_cast<std::size_t>(r.score)]++;
  return counts;
}

Dataset Dataset::subset_patients(const std::vector<bool>& keep) const {
  if (keep.size() != patient_ids.size())
    throw ArgumentError("subset_patients: flag vector size mismatch");
  Dataset out;
  out.n_categories = n_categories;
  out.site_levels = site_levels;
  out.sex_levels = sex_levels;
  out.study_levels = study_levels;
  for (std::size_t p = 0; p < patient_ids.size(); ++p) {
    if (!keep[p]) continue;
    const auto [lo, hi] = patient_ranges[p];
    out.records.insert(out.records.end(), records.begin() + lo, records.begin() + hi);
    out.patient_ids.push_back(patient_ids[p]);
  }
  // records stay sorted; rebuild ranges
  out.patient_ranges.clear();
  std::size_t start = 0;
  for (const auto& id : out.patient_ids) {
    std::size_t end = start;
    while (end < out.records.size() && out.records[end].patient_id == id) ++end;
    out.patient_ranges.emplace_back(start, end);
    start = end;
  }
  return out;
}

std::string CsvSchema::header_for(const std::string& logical) const {
  auto it = columns.find(logical);
  return it == columns.end() ? logical : it->second;
}

CsvSchema CsvSchema::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema JSON: ") + e.what());
  }
  CsvSchema s;
  if (j.contains("columns")) {
    for (auto& [k, v] : j.at("columns").items()) {
      bool known = false;
      for (const char* name : kLogicalColumns)
        if (k == name) known = true;
      if (!known) throw SchemaError("schema maps unknown logical column '" + k + "'");
      s.columns[k] = v.get<std::string>();
    }
  }
  if (j.contains("n_categories")) {
    s.n_categories = j.at("n_categories").get<int>();
    if (*s.n_categories < 2) throw SchemaError("n_categories must be >= 2");
  }
  if (j.contains("site_levels"))
    s.site_levels = j.at("site_levels").get<std::vector<std::string>>();
  return s;
}

CsvSchema CsvSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Dataset finalize_dataset(std::vector<ObservationRecord> records,
                         std::optional<int> n_categories,
                         const std::vector<std::string>& declared_site_levels,
                         LoadReport* report) {
  if (records.empty()) throw ValidationError("dataset has no records");

  Dataset d;
  d.site_levels = declared_site_levels.empty()
                      ? appearance_levels(records, &ObservationRecord::site)
                      : declared_site_levels;
  d.sex_levels = appearance_levels(records, &ObservationRecord::sex);
  d.study_levels = appearance_levels(records, &ObservationRecord::study);

  int max_score = 0;
  for (const auto& r : records) max_score = std::max(max_score, r.score);
  d.n_categories = n_categories.value_or(max_score + 1);
  if (d.n_categories < 2) d.n_categories = 2;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (d.site_index(r.site) < 0 && !declared_site_levels.empty())
      throw ValidationError("row " + std::to_string(i + 1) + ": site '" + r.site +
                            "' is not a declared level");
    if (r.score < 0 || r.score >= d.n_categories)
      throw ValidationError("row " + std::to_string(i + 1) + ": score " +
                            std::to_string(r.score) + " outside 0.." +
                            std::to_string(d.n_categories - 1));
    if (r.eval_index < 1)
      throw ValidationError("row " + std::to_string(i + 1) + ": eval index must be >= 1");
    if (r.cumdose < 0 || r.cumdos_site < 0)
      throw ValidationError("row " + std::to_string(i + 1) + ": negative dose");
    if (!(r.perc > 0.0) || r.perc > 200.0)
      throw ValidationError("row " + std::to_string(i + 1) + ": perc " +
                            format_double(r.perc) + " outside (0, 200]");
    // consistency of the derived site dose when all three are present
    const double expected = r.cumdose * r.perc / 100.0;
    if (expected > 0 &&
        std::abs(r.cumdos_site - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
      throw ValidationError("row " + std::to_string(i + 1) +
                            ": cumdos_site inconsistent with cumdose * perc / 100");
  }

  Dataset tmp = d;  // for site_index during sort
  std::stable_sort(records.begin(), records.end(),
                   [&tmp](const ObservationRecord& a, const ObservationRecord& b) {
                     return std::make_tuple(std::cref(a.patient_id), a.eval_index,
                                            tmp.site_index(a.site)) <
                            std::make_tuple(std::cref(b.patient_id), b.eval_index,
                                            tmp.site_index(b.site));
                   });

  // duplicates, cumdose monotonicity, perc constancy
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& a = records[i - 1];
    const auto& b = records[i];
    if (a.patient_id == b.patient_id && a.eval_index == b.eval_index && a.site == b.site)
      throw ValidationError("duplicate record for patient '" + a.patient_id + "', eval " +
                            std::to_string(a.eval_index) + ", site '" + a.site + "'");
  }
  {
    std::map<std::pair<std::string, std::string>, double> perc_seen;
    std::map<std::string, std::pair<int, double>> last_dose;  // patient -> (eval, cumdose)
    for (const auto& r : records) {
      auto& ld = last_dose[r.patient_id];
      if (ld.first != 0 && r.eval_index > ld.first && r.cumdose < ld.second - 1e-9)
        throw ValidationError("patient '" + r.patient_id +
                              "': cumdose decreases at eval " + std::to_string(r.eval_index));
      if (r.eval_index >= ld.first) ld = {r.eval_index, r.cumdose};
      auto key = std::make_pair(r.patient_id, r.site);
      auto it = perc_seen.find(key);
      if (it == perc_seen.end()) {
        perc_seen.emplace(key, r.perc);
      } else if (std::abs(it->second - r.perc) > 1e-9) {
        const std::string msg = "patient '" + r.patient_id + "', site '" + r.site +
                                "': perc varies over time (" + format_double(it->second) +
                                " vs " + format_double(r.perc) + ")";
        log::warn(msg);
        if (report) report->warnings.push_back(msg);
        it->second = r.perc;
      }
    }
  }

  d.records = std::move(records);
  std::size_t start = 0;
  while (start < d.records.size()) {
    std::size_t end = start;
    while (end < d.records.size() &&
           d.records[end].patient_id == d.records[start].patient_id)
      ++end;
    d.patient_ids.push_back(d.records[start].patient_id);
    d.patient_ranges.emplace_back(start, end);
    start = end;
  }
  return d;
}

Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema,
                           LoadReport* report) {
  auto col = [&](const std::string& logical) { return table.column(schema.header_for(logical)); };

  const int c_patient = col("patient");
  const int c_eval = col("eval");
  const int c_site = col("site");
  const int c_score = col("score");
  const int c_cumdose = col("cumdose");
  const int c_perc = col("perc");
  const int c_cumdos_site = col("cumdos_site");
  const int c_age = col("age");
  const int c_sex = col("sex");
  const int c_study = col("study");
  const int c_volume = col("volume");
  const int c_day = col("day");

  const std::pair<int, const char*> required[] = {
      {c_patient, "patient"}, {c_eval, "eval"}, {c_site, "site"}, {c_score, "score"}};
  for (const auto& [idx, name] : required) {
    if (idx < 0)
      throw SchemaError(std::string("missing required column '") + name + "' (header '" +
                        schema.header_for(name) + "')");
  }
  if (c_cumdos_site < 0 && (c_cumdose < 0 || c_perc < 0))
    throw SchemaError("need either column 'cumdos_site' or both 'cumdose' and 'perc'");

  std::vector<ObservationRecord> recs;
  recs.reserve(table.rows.size());
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;  // header is line 1
    ObservationRecord r;
    r.patient_id = row[c_patient];
    if (r.patient_id.empty())
      throw ValidationError("row " + std::to_string(line) + ": empty patient id");
    r.eval_index = parse_int(row[c_eval], "eval", line);
    r.site = row[c_site];
    if (row[c_score].empty()) {
      ++dropped;
      continue;
    }
    r.score = parse_int(row[c_score], "score", line);
    if (schema.n_categories && (r.score < 0 || r.score >= *schema.n_categories))
      throw ValidationError("row " + std::to_string(line) + ": score " +
                            std::to_string(r.score) + " outside 0.." +
                            std::to_string(*schema.n_categories - 1));
    if (c_cumdose >= 0) r.cumdose = parse_double(row[c_cumdose], "cumdose", line);
    if (c_perc >= 0) r.perc = parse_double(row[c_perc], "perc", line);
    if (c_cumdos_site >= 0 && !row[c_cumdos_site].empty()) {
      r.cumdos_site = parse_double(row[c_cumdos_site], "cumdos_site", line);
      if (c_cumdose < 0) r.cumdose = r.cumdos_site / (r.perc / 100.0);
    } else {
      r.cumdos_site = r.cumdose * r.perc / 100.0;
    }
    if (c_age >= 0 && !row[c_age].empty()) r.age = parse_double(row[c_age], "age", line);
    if (c_sex >= 0) r.sex = row[c_sex];
    if (c_study >= 0) r.study = row[c_study];
    if (c_volume >= 0 && !row[c_volume].empty())
      r.volume = parse_double(row[c_volume], "volume", line);
    if (c_day >= 0 && !row[c_day].empty()) r.day = parse_int(row[c_day], "day", line);
    recs.push_back(std::move(r));
  }
  if (dropped > 0)
    log::info("dropped " + std::to_string(dropped) + " rows with missing score");
  if (report) {
    report->rows_read = table.rows.size();
    report->rows_dropped_missing_score = dropped;
  }
  return finalize_dataset(std::move(recs), schema.n_categories, schema.site_levels, report);
}

Dataset load_csv(const std::string& path, const CsvSchema& schema, LoadReport* report) {
  return dataset_from_table(read_csv(path), schema, report);
}

std::string dataset_to_csv(const Dataset& d) {
  std::ostringstream out;
  out << "patient,eval,site,score,cumdose,perc,cumdos_site,age,sex,study,volume,day\n";
  for (const auto& r : d.records) {
    out << csv_escape(r.patient_id) << ',' << r.eval_index << ',' << csv_escape(r.site)
        << ',' << r.score << ',' << format_double(r.cumdose) << ','
        << format_double(r.perc) << ',' << format_double(r.cumdos_site) << ','
        << format_double(r.age) << ',' << csv_escape(r.sex) << ',' << csv_escape(r.study)
        << ',' << (r.volume ? format_double(*r.volume) : std::string()) << ','
        << (r.day ? std::to_string(*r.day) : std::string()) << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open output CSV: " + path);
  out << dataset_to_csv(d);
}

Dataset collapse_binary(const Dataset& d, int r) {
  if (r < 0 || r > d.n_categories - 2)
    throw ArgumentError("collapse_binary: cut point " + std::to_string(r) +
                        " outside 0.." + std::to_string(d.n_categories - 2));
  Dataset out = d;
  out.n_categories = 2;
  for (auto& rec : out.records) rec.score = rec.score <= r ? 0 : 1;
  return out;
}

Dataset merge_top_categories(const Dataset& d, int from) {
  if (from < 1 || from > d.n_categories - 1)
    throw ArgumentError("merge_top_categories: from=" + std::to_string(from) +
                        " outside 1.." + std::to_string(d.n_categories - 1));
  Dataset out = d;
  out.n_categories = from + 1;
  for (auto& rec : out.records) rec.score = std::min(rec.score, from);
  return out;
}

bool is_continuous_term(const std::string& name) {
  return name == "age" || name == "cumdose" || name == "perc" ||
         name == "cumdos_site" || name == "day" || name == "eval";
}

bool is_factor_term(const std::string& name) {
  return name == "site" || name == "sex" || name == "study";
}

Eigen::VectorXd continuous_column(const Dataset& d, const std::string& name) {
  if (!is_continuous_term(name)) {
    if (name == "volume")
      throw ArgumentError("'volume' is carried through but not available as a model term");
    throw ArgumentError("unknown continuous column '" + name + "'");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(d.n()));
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& r = d.records[i];
    if (name == "age") v[i] = r.age;
    else if (name == "cumdose") v[i] = r.cumdose;
    else if (name == "perc") v[i] = r.perc;
    else if (name == "cumdos_site") v[i] = r.cumdos_site;
    else if (name == "eval") v[i] = r.eval_index;
    else {  // day
      if (!r.day)
        throw ValidationError("column 'day' requested but missing at record " +
                              std::to_string(i + 1));
      v[i] = *r.day;
    }
  }
  return v;
}

FactorColumn factor_column(const Dataset& d, const std::string& name) {
  if (!is_factor_term(name)) throw ArgumentError("unknown factor column '" + name + "'");
  FactorColumn f;
  if (name == "site") f.levels = d.site_levels;
  else if (name == "sex") f.levels = d.sex_levels;
  else f.levels = d.study_levels;
  if (f.levels.size() < 2)
    throw ArgumentError("factor '" + name + "' has fewer than 2 levels");
  f.index.resize(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& r = d.records[i];
    const std::string& v = name == "site" ? r.site : (name == "sex" ? r.sex : r.study);
    auto it = std::find(f.levels.begin(), f.levels.end(), v);
    if (it == f.levels.end())
      throw ValidationError("record " + std::to_string(i + 1) + ": level '" + v +
                            "' not in declared levels of '" + name + "'");
    f.index[i] = static_cast<int>(it - f.levels.begin());
  }
  return f;
}

}  // namespace ordgam
