#include "ordgam/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ordgam/errors.hpp"
#include "ordgam/rng.hpp"

namespace ordgam {

namespace {

using json = nlohmann::ordered_json;

Eigen::VectorXd vec_from(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json vec_to(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

void SimConfig::validate() const {
  if (patients < 1) throw ArgumentError("sim: need at least one patient");
  if (sites.empty()) throw ArgumentError("sim: need at least one site");
  if (n_categories < 2) throw ArgumentError("sim: need at least two categories");
  if (cutpoints.size() != n_categories - 1)
    throw ArgumentError("sim: need R-1 cutpoints");
  if (cutpoints[0] != -1.0) throw ArgumentError("sim: first cutpoint must be -1");
  for (Eigen::Index r = 1; r < cutpoints.size(); ++r)
    if (!(cutpoints[r] > cutpoints[r - 1]))
      throw ArgumentError("sim: cutpoints must increase");
  if (sigma_b < 0) throw ArgumentError("sim: sigma_b must be >= 0");
  if (!(fraction_gy > 0)) throw ArgumentError("sim: fraction size must be > 0");
  if (total_dose_max < total_dose_min) throw ArgumentError("sim: dose range inverted");
  if (eval_offsets.empty()) throw ArgumentError("sim: need evaluation days");
  if (smooth_x.size() != smooth_f.size()) throw ArgumentError("sim: smooth grid mismatch");
  for (const auto& s : sites)
    if (!perc_by_site.count(s))
      throw ArgumentError("sim: no percentage range for site '" + s + "'");
  if (sex_levels.size() < 2 || study_levels.size() < 2)
    throw ArgumentError("sim: sex and study need two levels");
}

double SimConfig::smooth_value(double x) const {
  const Eigen::Index m = smooth_x.size();
  if (m == 0) return 0.0;
  if (x <= smooth_x[0]) return smooth_f[0];
  if (x >= smooth_x[m - 1]) return smooth_f[m - 1];
  Eigen::Index hi = 1;
  while (smooth_x[hi] < x) ++hi;
  const double t = (x - smooth_x[hi - 1]) / (smooth_x[hi] - smooth_x[hi - 1]);
  return (1.0 - t) * smooth_f[hi - 1] + t * smooth_f[hi];
}

double SimConfig::linear_predictor_part(const ObservationRecord& r) const {
  double eta = intercept;
  for (const auto& [name, coef] : beta_continuous) {
    double x = 0;
    if (name == "age") x = r.age;
    else if (name == "cumdose") x = r.cumdose;
    else if (name == "perc") x = r.perc;
    else if (name == "cumdos_site") x = r.cumdos_site;
    else throw ArgumentError("sim: unknown continuous term '" + name + "'");
    eta += coef * x;
  }
  for (const auto& [name, levels] : beta_factor) {
    const std::string* v = nullptr;
    if (name == "site") v = &r.site;
    else if (name == "sex") v = &r.sex;
    else if (name == "study") v = &r.study;
    else throw ArgumentError("sim: unknown factor term '" + name + "'");
    if (auto it = levels.find(*v); it != levels.end()) eta += it->second;
  }
  return eta;
}

Dataset simulate(const SimConfig& cfg, SimTruth* truth) {
  cfg.validate();
  std::vector<ObservationRecord> records;
  std::vector<double> b_draws(static_cast<std::size_t>(cfg.patients));
  std::vector<double> etas;

  const int digits = cfg.patients > 9999 ? 6 : 4;
  for (int pi = 0; pi < cfg.patients; ++pi) {
    Rng rng(Rng::substream(cfg.seed, static_cast<std::uint64_t>(pi)));
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "p%0*d", digits, pi);
    const std::string patient_id(idbuf);

    const int n_fractions = static_cast<int>(
        std::lround(rng.uniform(cfg.total_dose_min, cfg.total_dose_max) / cfg.fraction_gy));
    const bool has_break =
        cfg.break_probability > 0.0 && rng.bernoulli(cfg.break_probability);
    const double age = rng.uniform(cfg.age_range.first, cfg.age_range.second);
    const std::string sex =
        cfg.sex_levels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.sex_levels.size()) - 1))];
    const std::string study =
        cfg.study_levels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.study_levels.size()) - 1))];
    const double b = cfg.sigma_b * rng.normal();
    b_draws[static_cast<std::size_t>(pi)] = b;

    std::vector<double> perc(cfg.sites.size());
    for (std::size_t l = 0; l < cfg.sites.size(); ++l) {
      const auto& range = cfg.perc_by_site.at(cfg.sites[l]);
      perc[l] = rng.uniform(range.first, range.second);
    }

    // weekday fractions, optionally interrupted by one pause
    std::vector<int> fraction_days;
    int day = 0;
    while (static_cast<int>(fraction_days.size()) < n_fractions) {
      if (day % 7 < 5) {
        fraction_days.push_back(day);
        if (has_break && static_cast<int>(fraction_days.size()) == cfg.break_after_fraction)
          day += cfg.break_length_days;
      }
      ++day;
    }
    const int last_day = fraction_days.back();

    std::vector<int> eval_days;
    for (int t = cfg.first_eval_day; t <= last_day + cfg.followup_days; ++t) {
      for (int off : cfg.eval_offsets)
        if (t % 7 == off) eval_days.push_back(t);
    }
    if (eval_days.empty()) eval_days.push_back(last_day);

    for (std::size_t j = 0; j < eval_days.size(); ++j) {
      const int t = eval_days[j];
      double cum = 0;
      for (int fd : fraction_days)
        if (fd <= t) cum += cfg.fraction_gy;
      for (std::size_t l = 0; l < cfg.sites.size(); ++l) {
        ObservationRecord r;
        r.patient_id = patient_id;
        r.eval_index = static_cast<int>(j) + 1;
        r.site = cfg.sites[l];
        r.cumdose = cum;
        r.perc = perc[l];
        r.cumdos_site = cum * perc[l] / 100.0;
        r.age = age;
        r.sex = sex;
        r.study = study;
        r.day = t;
        const double eta = cfg.linear_predictor_part(r) +
                           cfg.smooth_value(r.cumdos_site) + b;
        const double u = eta + rng.logistic();
        int y = 0;
        for (Eigen::Index c = 0; c < cfg.cutpoints.size(); ++c)
          if (u > cfg.cutpoints[c]) ++y;
        r.score = y;
        records.push_back(std::move(r));
        etas.push_back(eta);
      }
    }
  }

  // zero-padded patient ids in generation order and declared site order make
  // the finalize sort a no-op, so `etas` stays aligned with the records
  Dataset d = finalize_dataset(std::move(records), cfg.n_categories, cfg.sites);
  if (truth) {
    truth->b = std::move(b_draws);
    truth->eta = Eigen::Map<Eigen::VectorXd>(etas.data(), static_cast<Eigen::Index>(etas.size()));
    truth->config = cfg;
  }
  return d;
}

SimConfig paper_like_config() {
  SimConfig cfg;
  cfg.patients = 75;
  cfg.sites = {"hard", "soft", "tongue", "floor", "upper", "lower", "cheek_l", "cheek_r"};
  cfg.n_categories = 4;
  cfg.cutpoints = Eigen::Vector3d(-1.0, 0.6, 2.2);
  cfg.sigma_b = 1.0;
  cfg.seed = 20260809;
  cfg.fraction_gy = 2.0;
  cfg.total_dose_min = 60.0;
  cfg.total_dose_max = 70.0;
  cfg.perc_by_site = {{"hard", {25, 60}},   {"soft", {70, 130}},
                      {"tongue", {70, 120}}, {"floor", {60, 120}},
                      {"upper", {15, 55}},   {"lower", {15, 55}},
                      {"cheek_l", {45, 95}}, {"cheek_r", {45, 95}}};
  cfg.intercept = -0.5;
  cfg.beta_factor["study"] = {{"trial", 0.5}};
  cfg.beta_factor["site"] = {{"soft", 0.2},    {"tongue", -0.3}, {"floor", -0.8},
                             {"upper", -1.3},  {"lower", -1.2},  {"cheek_l", -0.5},
                             {"cheek_r", -0.45}};
  cfg.smooth_x.setLinSpaced(19, 0.0, 90.0);
  cfg.smooth_f.resize(19);
  for (Eigen::Index i = 0; i < 19; ++i)
    cfg.smooth_f[i] = 2.4 * (1.0 - std::exp(-cfg.smooth_x[i] / 14.0));
  return cfg;
}

SimConfig SimConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("sim config JSON: ") + e.what());
  }
  SimConfig cfg = paper_like_config();
  if (j.contains("patients")) cfg.patients = j.at("patients").get<int>();
  if (j.contains("sites")) cfg.sites = j.at("sites").get<std::vector<std::string>>();
  if (j.contains("n_categories")) cfg.n_categories = j.at("n_categories").get<int>();
  if (j.contains("cutpoints")) cfg.cutpoints = vec_from(j.at("cutpoints"));
  if (j.contains("sigma_b")) cfg.sigma_b = j.at("sigma_b").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("fraction_gy")) cfg.fraction_gy = j.at("fraction_gy").get<double>();
  if (j.contains("total_dose_min")) cfg.total_dose_min = j.at("total_dose_min").get<double>();
  if (j.contains("total_dose_max")) cfg.total_dose_max = j.at("total_dose_max").get<double>();
  if (j.contains("break_probability"))
    cfg.break_probability = j.at("break_probability").get<double>();
  if (j.contains("break_after_fraction"))
    cfg.break_after_fraction = j.at("break_after_fraction").get<int>();
  if (j.contains("break_length_days"))
    cfg.break_length_days = j.at("break_length_days").get<int>();
  if (j.contains("eval_offsets")) cfg.eval_offsets = j.at("eval_offsets").get<std::vector<int>>();
  if (j.contains("first_eval_day")) cfg.first_eval_day = j.at("first_eval_day").get<int>();
  if (j.contains("followup_days")) cfg.followup_days = j.at("followup_days").get<int>();
  if (j.contains("perc_by_site")) {
    cfg.perc_by_site.clear();
    for (auto& [site, range] : j.at("perc_by_site").items())
      cfg.perc_by_site[site] = {range[0].get<double>(), range[1].get<double>()};
  }
  if (j.contains("age_range"))
    cfg.age_range = {j.at("age_range")[0].get<double>(), j.at("age_range")[1].get<double>()};
  if (j.contains("sex_levels")) cfg.sex_levels = j.at("sex_levels").get<std::vector<std::string>>();
  if (j.contains("study_levels"))
    cfg.study_levels = j.at("study_levels").get<std::vector<std::string>>();
  if (j.contains("intercept")) cfg.intercept = j.at("intercept").get<double>();
  if (j.contains("beta")) {
    cfg.beta_continuous.clear();
    cfg.beta_factor.clear();
    for (auto& [term, val] : j.at("beta").items()) {
      if (val.is_number()) {
        cfg.beta_continuous[term] = val.get<double>();
      } else {
        for (auto& [level, coef] : val.items())
          cfg.beta_factor[term][level] = coef.get<double>();
      }
    }
  }
  if (j.contains("smooth")) {
    cfg.smooth_x = vec_from(j.at("smooth").at("x"));
    cfg.smooth_f = vec_from(j.at("smooth").at("f"));
    if (j.at("smooth").contains("covariate"))
      cfg.smooth_covariate = j.at("smooth").at("covariate").get<std::string>();
  }
  cfg.validate();
  return cfg;
}

SimConfig SimConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open sim config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string SimConfig::to_json() const {
  json j;
  j["patients"] = patients;
  j["sites"] = sites;
  j["n_categories"] = n_categories;
  j["cutpoints"] = vec_to(cutpoints);
  j["sigma_b"] = sigma_b;
  j["seed"] = seed;
  j["fraction_gy"] = fraction_gy;
  j["total_dose_min"] = total_dose_min;
  j["total_dose_max"] = total_dose_max;
  j["break_probability"] = break_probability;
  j["break_after_fraction"] = break_after_fraction;
  j["break_length_days"] = break_length_days;
  j["eval_offsets"] = eval_offsets;
  j["first_eval_day"] = first_eval_day;
  j["followup_days"] = followup_days;
  j["perc_by_site"] = json::object();
  for (const auto& [site, range] : perc_by_site)
    j["perc_by_site"][site] = {range.first, range.second};
  j["age_range"] = {age_range.first, age_range.second};
  j["sex_levels"] = sex_levels;
  j["study_levels"] = study_levels;
  j["intercept"] = intercept;
  j["beta"] = json::object();
  for (const auto& [term, coef] : beta_continuous) j["beta"][term] = coef;
  for (const auto& [term, levels] : beta_factor) {
    json lv = json::object();
    for (const auto& [level, coef] : levels) lv[level] = coef;
    j["beta"][term] = std::move(lv);
  }
  j["smooth"] = {{"x", vec_to(smooth_x)}, {"f", vec_to(smooth_f)},
                 {"covariate", smooth_covariate}};
  return j.dump(2);
}

std::string truth_to_json(const SimTruth& truth, const Dataset& d) {
  json j;
  j["config"] = json::parse(truth.config.to_json());
  j["b"] = json::object();
  for (std::size_t i = 0; i < d.patient_ids.size(); ++i)
    j["b"][d.patient_ids[i]] = truth.b[i];
  j["eta"] = vec_to(truth.eta);
  return j.dump(2);
}

}  // namespace ordgam
