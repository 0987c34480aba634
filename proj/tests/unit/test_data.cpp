#include "ordgam/data.hpp"

#include <gtest/gtest.h>

#include "ordgam/errors.hpp"
#include "ordgam/rng.hpp"
#include "ordgam/simulate.hpp"
#include "test_util.hpp"

using namespace ordgam;

namespace {

ObservationRecord rec(const std::string& pid, int eval, const std::string& site, int score,
                      double cumdose = 10.0, double perc = 100.0) {
  ObservationRecord r;
  r.patient_id = pid;
  r.eval_index = eval;
  r.site = site;
  r.score = score;
  r.cumdose = cumdose;
  r.perc = perc;
  r.cumdos_site = cumdose * perc / 100.0;
  r.sex = "f";
  r.study = "obs";
  r.age = 60;
  return r;
}

// dataset with prescribed score counts, one patient per record
Dataset dataset_with_counts(const std::vector<long>& counts) {
  std::vector<ObservationRecord> records;
  int pid = 0;
  for (std::size_t s = 0; s < counts.size(); ++s)
    for (long i = 0; i < counts[s]; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "q%06d", pid++);
      records.push_back(rec(buf, 1, "hard", static_cast<int>(s)));
    }
  return finalize_dataset(std::move(records), static_cast<int>(counts.size()));
}

}  // namespace

TEST(Data, LoadCsvDerivesSiteDose) {
  const auto dir = test_util::temp_dir("data_derive");
  test_util::write_file(dir / "d.csv",
                        "patient,eval,site,score,cumdose,perc\n"
                        "a,1,hard,0,30,50\n"
                        "a,1,soft,1,30,80\n"
                        "a,2,hard,1,34,50\n"
                        "a,2,soft,2,34,80\n");
  const Dataset d = load_csv((dir / "d.csv").string());
  ASSERT_EQ(d.n(), 4u);
  EXPECT_DOUBLE_EQ(d.records[0].cumdos_site, 15.0);
  EXPECT_DOUBLE_EQ(d.records[1].cumdos_site, 24.0);
  EXPECT_EQ(d.n_categories, 3);
}

TEST(Data, ScoreOutsideRangeNamesRow) {
  const auto dir = test_util::temp_dir("data_range");
  test_util::write_file(dir / "d.csv",
                        "patient,eval,site,score,cumdose,perc\n"
                        "a,1,hard,0,30,50\n"
                        "a,1,soft,7,30,80\n");
  CsvSchema schema;
  schema.n_categories = 5;
  try {
    load_csv((dir / "d.csv").string(), schema);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

TEST(Data, MissingColumnNamesColumn) {
  const auto dir = test_util::temp_dir("data_missing");
  test_util::write_file(dir / "d.csv", "patient,eval,score\na,1,0\n");
  try {
    load_csv((dir / "d.csv").string());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("site"), std::string::npos);
  }
}

TEST(Data, SchemaMapsArbitraryHeaders) {
  const auto dir = test_util::temp_dir("data_schema");
  test_util::write_file(dir / "d.csv",
                        "ID,visit,location,tox,dose_total,dose_pct\n"
                        "a,1,hard,2,30,50\n");
  const CsvSchema schema = CsvSchema::from_json(R"({
    "columns": {"patient": "ID", "eval": "visit", "site": "location",
                "score": "tox", "cumdose": "dose_total", "perc": "dose_pct"}
  })");
  const Dataset d = load_csv((dir / "d.csv").string(), schema);
  ASSERT_EQ(d.n(), 1u);
  EXPECT_DOUBLE_EQ(d.records[0].cumdos_site, 15.0);
}

TEST(Data, NonMonotoneCumdoseNamesPatient) {
  std::vector<ObservationRecord> records{rec("a", 1, "hard", 0, 30), rec("a", 2, "hard", 0, 20)};
  try {
    finalize_dataset(std::move(records), 3);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
}

TEST(Data, DuplicateRowIsHardError) {
  std::vector<ObservationRecord> records{rec("a", 1, "hard", 0), rec("a", 1, "hard", 1)};
  EXPECT_THROW(finalize_dataset(std::move(records), 3), ValidationError);
}

TEST(Data, MissingScoreRowsAreDroppedWithCount) {
  const auto dir = test_util::temp_dir("data_drop");
  test_util::write_file(dir / "d.csv",
                        "patient,eval,site,score,cumdose,perc\n"
                        "a,1,hard,0,30,50\n"
                        "a,1,soft,,30,80\n"
                        "a,2,hard,1,34,50\n");
  LoadReport report;
  const Dataset d = load_csv((dir / "d.csv").string(), {}, &report);
  EXPECT_EQ(d.n(), 2u);
  EXPECT_EQ(report.rows_dropped_missing_score, 1u);
}

TEST(Data, VaryingPercWarnsButLoads) {
  const auto dir = test_util::temp_dir("data_perc");
  test_util::write_file(dir / "d.csv",
                        "patient,eval,site,score,cumdose,perc,cumdos_site\n"
                        "a,1,hard,0,30,50,15\n"
                        "a,2,hard,1,34,60,20.4\n");
  LoadReport report;
  const Dataset d = load_csv((dir / "d.csv").string(), {}, &report);
  EXPECT_EQ(d.n(), 2u);
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("perc varies"), std::string::npos);
}

TEST(Data, PaperShapedSimulatedFileRoundTrips) {
  SimConfig cfg = paper_like_config();
  cfg.patients = 75;
  const Dataset d = simulate(cfg);
  // 75 patients x 8 sites x ~12 evaluations
  EXPECT_GE(d.n(), 7000u);
  EXPECT_LE(d.n(), 7600u);
  EXPECT_EQ(d.n_patients(), 75u);

  const auto dir = test_util::temp_dir("data_roundtrip");
  save_csv(d, (dir / "d.csv").string());
  const Dataset d2 = load_csv((dir / "d.csv").string(),
                              [] {
                                CsvSchema s;
                                s.n_categories = 4;
                                return s;
                              }());
  ASSERT_EQ(d2.n(), d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    EXPECT_EQ(d2.records[i].patient_id, d.records[i].patient_id);
    EXPECT_EQ(d2.records[i].score, d.records[i].score);
    EXPECT_EQ(d2.records[i].cumdose, d.records[i].cumdose);
    EXPECT_EQ(d2.records[i].perc, d.records[i].perc);
    EXPECT_EQ(d2.records[i].cumdos_site, d.records[i].cumdos_site);
    EXPECT_EQ(d2.records[i].age, d.records[i].age);
  }
}

TEST(Data, CollapseCountsMatchPublishedTable) {
  const Dataset d = dataset_with_counts({3641, 1616, 1433, 639, 10});
  {
    const Dataset c = collapse_binary(d, 1);
    const auto counts = c.score_counts();
    ASSERT_EQ(counts.size(), 2u);
    EXPECT_EQ(counts[0], 5257);
    EXPECT_EQ(counts[1], 2082);
    EXPECT_EQ(c.n(), d.n());
  }
  {
    const Dataset c = collapse_binary(d, 0);
    EXPECT_EQ(c.score_counts()[0], 3641);
    EXPECT_EQ(c.score_counts()[1], 3698);
  }
  {
    const Dataset m = merge_top_categories(d, 3);
    EXPECT_EQ(m.n_categories, 4);
    EXPECT_EQ(m.score_counts()[3], 649);
    EXPECT_EQ(m.n(), d.n());
  }
}

TEST(Data, CollapseDegenerateAndMergeIdentity) {
  const Dataset d = dataset_with_counts({5, 5, 5, 0});
  const Dataset c = collapse_binary(d, 2);  // r = R-2, empty top class
  EXPECT_EQ(c.score_counts()[1], 0);

  const Dataset m = merge_top_categories(d, 3);  // merge last into itself
  EXPECT_EQ(m.n_categories, 4);
  for (std::size_t i = 0; i < d.n(); ++i)
    EXPECT_EQ(m.records[i].score, d.records[i].score);

  const Dataset d2 = dataset_with_counts({5, 5, 5});
  const Dataset m2 = merge_top_categories(d2, 1);
  EXPECT_EQ(m2.n_categories, 2);
  EXPECT_EQ(m2.score_counts()[0], 5);
  EXPECT_EQ(m2.score_counts()[1], 10);
}

TEST(Data, CollapseAndMergeArgumentChecks) {
  const Dataset d = dataset_with_counts({5, 5, 5});
  EXPECT_THROW(collapse_binary(d, -1), ArgumentError);
  EXPECT_THROW(collapse_binary(d, 2), ArgumentError);
  EXPECT_THROW(merge_top_categories(d, 0), ArgumentError);
  EXPECT_THROW(merge_top_categories(d, 3), ArgumentError);
}

// exhaustive collapse identity on random score distributions
TEST(Data, CollapseClassZeroCountsAreCumulativeSums) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const int R = 3 + static_cast<int>(rng.uniform_int(0, 2));
    std::vector<long> counts(static_cast<std::size_t>(R));
    for (auto& c : counts) c = rng.uniform_int(1, 40);
    const Dataset d = dataset_with_counts(counts);
    long cum = 0;
    for (int r = 0; r <= R - 2; ++r) {
      cum += counts[static_cast<std::size_t>(r)];
      const Dataset c = collapse_binary(d, r);
      EXPECT_EQ(c.score_counts()[0], cum) << "seed " << seed << " r " << r;
      EXPECT_EQ(c.n(), d.n());
    }
  }
}

TEST(Data, SubsetPatientsKeepsLevelsAndRanges) {
  SimConfig cfg = test_util::small_config(3, 10, 3);
  const Dataset d = simulate(cfg);
  std::vector<bool> keep(d.n_patients(), false);
  keep[0] = keep[3] = keep[7] = true;
  const Dataset s = d.subset_patients(keep);
  EXPECT_EQ(s.n_patients(), 3u);
  EXPECT_EQ(s.site_levels, d.site_levels);
  EXPECT_EQ(s.n_categories, d.n_categories);
  std::size_t total = 0;
  for (const auto& [lo, hi] : s.patient_ranges) total += hi - lo;
  EXPECT_EQ(total, s.n());
}

TEST(Data, VolumeIsCarriedButNotModelable) {
  std::vector<ObservationRecord> records{rec("a", 1, "hard", 0)};
  records[0].volume = 12.5;
  const Dataset d = finalize_dataset(std::move(records), 2);
  EXPECT_TRUE(d.records[0].volume.has_value());
  EXPECT_THROW(continuous_column(d, "volume"), ArgumentError);
}
