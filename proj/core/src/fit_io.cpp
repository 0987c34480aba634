#include "ordgam/fit_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ordgam/errors.hpp"
#include "ordgam/model_spec.hpp"

namespace ordgam {

namespace {

using json = nlohmann::ordered_json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

Eigen::MatrixXd mat_from_json(const json& a) {
  const auto rows = a.size();
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const auto cols = a[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
  return m;
}

const char* kind_name(TermKind k) {
  switch (k) {
    case TermKind::intercept: return "intercept";
    case TermKind::linear: return "linear";
    case TermKind::factor: return "factor";
    case TermKind::smooth: return "smooth";
    case TermKind::random_intercept: return "random_intercept";
    default: return "cutpoints";
  }
}

TermKind kind_from_name(const std::string& s) {
  if (s == "intercept") return TermKind::intercept;
  if (s == "linear") return TermKind::linear;
  if (s == "factor") return TermKind::factor;
  if (s == "smooth") return TermKind::smooth;
  if (s == "random_intercept") return TermKind::random_intercept;
  return TermKind::cutpoints;
}

}  // namespace

std::string fit_to_json(const FitResult& fit, bool include_covariance) {
  json j;
  j["format"] = "ordgam-fit";
  j["coefficients"] = json::object();
  for (std::size_t i = 0; i < fit.coef_names.size(); ++i)
    j["coefficients"][fit.coef_names[i]] = fit.beta[static_cast<Eigen::Index>(i)];
  j["cutpoints"] = vec_to_json(fit.alpha);
  j["rho"] = json::object();
  for (std::size_t i = 0; i < fit.rho_names.size(); ++i)
    j["rho"][fit.rho_names[i]] = fit.rho[static_cast<Eigen::Index>(i)];
  if (fit.sigma_b) j["sigma_b"] = *fit.sigma_b;
  else j["sigma_b"] = nullptr;
  j["loglik"] = fit.loglik;
  j["penalized_loglik"] = fit.penalized_loglik;
  j["laml"] = fit.laml;
  j["edf"] = json::object();
  j["edf"]["total"] = fit.edf_total;
  j["edf"]["by_term"] = json::array();
  for (const auto& t : fit.edf_terms)
    j["edf"]["by_term"].push_back({{"term", t.term}, {"edf", t.edf}});
  j["edf"]["by_coef"] = vec_to_json(fit.edf_by_coef);
  j["n_categories"] = fit.design.n_categories;
  j["convergence"] = {{"converged", fit.report.converged},
                      {"outer_iterations", fit.report.outer_iterations},
                      {"inner_iterations", fit.report.inner_iterations},
                      {"final_grad_norm", fit.report.final_grad_norm},
                      {"final_delta_v", fit.report.final_delta_v},
                      {"notices", fit.report.notices}};
  if (include_covariance) j["covariance"] = mat_to_json(fit.covariance);

  json model;
  model["spec"] = json::parse(fit.design.spec.to_json());
  model["n_parametric"] = fit.design.n_parametric;
  model["terms"] = json::array();
  for (const auto& t : fit.design.terms)
    model["terms"].push_back({{"label", t.label},
                              {"kind", kind_name(t.kind)},
                              {"offset", t.offset},
                              {"count", t.count}});
  model["factors"] = json::array();
  for (const auto& f : fit.design.factors)
    model["factors"].push_back(
        {{"name", f.name}, {"levels", f.levels}, {"reference", f.reference}});
  model["smooths"] = json::array();
  for (const auto& s : fit.design.smooths) {
    json sm;
    sm["covariate"] = s.covariate;
    sm["k"] = s.k;
    if (s.by_level) {
      sm["by_factor"] = s.by_factor;
      sm["by_level"] = *s.by_level;
    }
    sm["knots"] = vec_to_json(s.knots);
    sm["radial_projection"] = mat_to_json(s.radial_projection);
    sm["center"] = vec_to_json(s.center);
    sm["scale"] = vec_to_json(s.scale);
    sm["x_min"] = s.x_min;
    sm["x_max"] = s.x_max;
    sm["penalty"] = mat_to_json(s.penalty);
    sm["penalty_rank"] = s.penalty_rank;
    sm["penalty_logdet"] = s.penalty_logdet;
    model["smooths"].push_back(std::move(sm));
  }
  model["penalties"] = json::array();
  for (const auto& b : fit.design.penalties) {
    json pb;
    pb["label"] = b.label;
    pb["offset"] = b.offset;
    pb["dim"] = b.dim;
    pb["rank"] = b.rank;
    pb["logdet_plus"] = b.logdet_plus;
    pb["identity"] = b.label == "ri(patient)";
    if (b.label != "ri(patient)") pb["S"] = mat_to_json(b.S);
    model["penalties"].push_back(std::move(pb));
  }
  if (fit.design.random_intercept) {
    model["random_intercept"] = {{"factor", fit.design.random_intercept->factor},
                                 {"levels", fit.design.random_intercept->levels}};
  }
  model["coef_names"] = fit.coef_names;
  j["model"] = std::move(model);
  return j.dump(2);
}

FitResult fit_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("fit JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != "ordgam-fit")
    throw SchemaError("not an ordgam fit file");

  FitResult fit;
  const json& model = j.at("model");
  fit.design.spec = ModelSpec::from_json(model.at("spec").dump());
  fit.design.n_categories = j.at("n_categories").get<int>();
  fit.design.n_parametric = model.at("n_parametric").get<int>();
  for (const auto& t : model.at("terms"))
    fit.design.terms.push_back({t.at("label").get<std::string>(),
                                kind_from_name(t.at("kind").get<std::string>()),
                                t.at("offset").get<int>(), t.at("count").get<int>()});
  for (const auto& f : model.at("factors"))
    fit.design.factors.push_back({f.at("name").get<std::string>(),
                                  f.at("levels").get<std::vector<std::string>>(),
                                  f.at("reference").get<int>()});
  for (const auto& sm : model.at("smooths")) {
    SmoothBasis s;
    s.covariate = sm.at("covariate").get<std::string>();
    s.k = sm.at("k").get<int>();
    if (sm.contains("by_factor")) {
      s.by_factor = sm.at("by_factor").get<std::string>();
      s.by_level = sm.at("by_level").get<std::string>();
    }
    s.knots = vec_from_json(sm.at("knots"));
    s.radial_projection = mat_from_json(sm.at("radial_projection"));
    s.center = vec_from_json(sm.at("center"));
    s.scale = vec_from_json(sm.at("scale"));
    s.x_min = sm.at("x_min").get<double>();
    s.x_max = sm.at("x_max").get<double>();
    s.penalty = mat_from_json(sm.at("penalty"));
    s.penalty_rank = sm.at("penalty_rank").get<int>();
    s.penalty_logdet = sm.at("penalty_logdet").get<double>();
    fit.design.smooths.push_back(std::move(s));
  }
  for (const auto& pb : model.at("penalties")) {
    PenaltyBlock b;
    b.label = pb.at("label").get<std::string>();
    b.offset = pb.at("offset").get<int>();
    b.dim = pb.at("dim").get<int>();
    b.rank = pb.at("rank").get<int>();
    b.logdet_plus = pb.at("logdet_plus").get<double>();
    if (pb.at("identity").get<bool>())
      b.S = Eigen::MatrixXd::Identity(b.dim, b.dim);
    else
      b.S = mat_from_json(pb.at("S"));
    fit.design.penalties.push_back(std::move(b));
  }
  if (model.contains("random_intercept")) {
    RandomInterceptInfo info;
    info.factor = model.at("random_intercept").at("factor").get<std::string>();
    info.levels = model.at("random_intercept").at("levels").get<std::vector<std::string>>();
    fit.design.random_intercept = std::move(info);
  }
  fit.coef_names = model.at("coef_names").get<std::vector<std::string>>();
  fit.design.coef_names = fit.coef_names;

  fit.beta.resize(static_cast<Eigen::Index>(fit.coef_names.size()));
  for (std::size_t i = 0; i < fit.coef_names.size(); ++i)
    fit.beta[static_cast<Eigen::Index>(i)] =
        j.at("coefficients").at(fit.coef_names[i]).get<double>();
  fit.alpha = vec_from_json(j.at("cutpoints"));
  fit.rho.resize(static_cast<Eigen::Index>(fit.design.penalties.size()));
  for (std::size_t i = 0; i < fit.design.penalties.size(); ++i) {
    fit.rho_names.push_back(fit.design.penalties[i].label);
    fit.rho[static_cast<Eigen::Index>(i)] =
        j.at("rho").at(fit.design.penalties[i].label).get<double>();
  }
  if (!j.at("sigma_b").is_null()) fit.sigma_b = j.at("sigma_b").get<double>();
  fit.loglik = j.at("loglik").get<double>();
  fit.penalized_loglik = j.at("penalized_loglik").get<double>();
  fit.laml = j.at("laml").get<double>();
  fit.edf_total = j.at("edf").at("total").get<double>();
  fit.edf_by_coef = vec_from_json(j.at("edf").at("by_coef"));
  for (const auto& t : j.at("edf").at("by_term"))
    fit.edf_terms.push_back({t.at("term").get<std::string>(), t.at("edf").get<double>()});
  const json& conv = j.at("convergence");
  fit.report.converged = conv.at("converged").get<bool>();
  fit.report.outer_iterations = conv.at("outer_iterations").get<int>();
  fit.report.inner_iterations = conv.at("inner_iterations").get<long>();
  fit.report.final_grad_norm = conv.at("final_grad_norm").get<double>();
  fit.report.final_delta_v = conv.at("final_delta_v").get<double>();
  fit.report.notices = conv.at("notices").get<std::vector<std::string>>();
  if (j.contains("covariance")) fit.covariance = mat_from_json(j.at("covariance"));

  // design matrix dimensions are implied by the coefficient count
  fit.design.X.resize(0, static_cast<Eigen::Index>(fit.coef_names.size()));
  return fit;
}

FitResult fit_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open fit file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fit_from_json(ss.str());
}

}  // namespace ordgam
