#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "ordgam/data.hpp"
#include "ordgam/simulate.hpp"

namespace test_util {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ordgam_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// small, fast synthetic dataset for solver tests
inline ordgam::SimConfig small_config(std::uint64_t seed, int patients = 12, int sites = 3,
                                      int categories = 3) {
  ordgam::SimConfig cfg = ordgam::paper_like_config();
  cfg.patients = patients;
  cfg.seed = seed;
  cfg.n_categories = categories;
  cfg.cutpoints.resize(categories - 1);
  for (int r = 0; r < categories - 1; ++r) cfg.cutpoints[r] = -1.0 + 1.3 * r;
  cfg.sites.resize(static_cast<std::size_t>(sites));
  std::map<std::string, std::pair<double, double>> perc;
  for (const auto& s : cfg.sites) perc[s] = cfg.perc_by_site.at(s);
  cfg.perc_by_site = std::move(perc);
  std::map<std::string, double> site_beta;
  for (std::size_t l = 1; l < cfg.sites.size(); ++l)
    site_beta[cfg.sites[l]] = cfg.beta_factor["site"].count(cfg.sites[l])
                                  ? cfg.beta_factor["site"][cfg.sites[l]]
                                  : 0.0;
  cfg.beta_factor["site"] = std::move(site_beta);
  return cfg;
}

}  // namespace test_util
