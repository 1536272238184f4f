#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rfim/explab.hpp"

using rfim::ConfigError;
using rfim::ExperimentConfig;
using rfim::FieldModel;
using rfim::Json;

namespace {

ExperimentConfig ground_config() {
  ExperimentConfig c;
  c.beta = std::nullopt;
  c.sides = {4, 8};
  c.reps = 200;
  c.seed = 11;
  c.workers = 1;
  c.bootstrap = 50;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rfimlab_test_" + name);
}

}  // namespace

TEST(Config, ParsesFullDocument) {
  const Json j = Json::parse(R"({
    "field": {"kind": "uniform", "a": -1, "b": 2},
    "beta": 0.5, "bc": "both", "d": 2, "sides": [4, 6], "k": [1, 2],
    "reps": 150, "seed": 99, "workers": 2,
    "output": {"csv": "a.csv", "json": "a.json"},
    "stein": {"reps": 120, "max_side": 4, "estimate_T": false}
  })");
  const auto c = rfim::config_from_json(j);
  EXPECT_EQ(c.model.kind(), FieldModel::Kind::uniform);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_EQ(c.bcs.size(), 2u);
  EXPECT_EQ(c.sides, (std::vector<int>{4, 6}));
  EXPECT_EQ(c.ks, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.reps, 150u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.csv_path, "a.csv");
  EXPECT_TRUE(c.stein.enabled);
  EXPECT_FALSE(c.stein.estimate_t);
  EXPECT_EQ(c.stein.reps, 120u);
  // Round trip through JSON.
  const auto back = rfim::config_from_json(rfim::config_to_json(c));
  EXPECT_EQ(rfim::config_to_json(back), rfim::config_to_json(c));
}

TEST(Config, InfiniteBeta) {
  const auto c = rfim::config_from_json(Json::parse(R"({"beta": "inf", "sides": [8, 16]})"));
  EXPECT_TRUE(c.ground());
}

TEST(Config, ValidationErrors) {
  auto bad = [](const char* text) { return rfim::config_from_json(Json::parse(text)); };
  EXPECT_THROW(bad(R"({"beta": "inf", "sides": [8, 16], "reps": 99})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": "inf", "sides": [16, 8]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": "inf", "sides": [8, 8]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": "inf", "sides": [65]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1, "sides": [21]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1, "d": 3, "sides": [3]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": -1, "sides": [4]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": "hot", "sides": [4]})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1, "sides": []})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1, "sides": [4], "bc": "up"})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1, "sides": [4], "field": {"kind": "cauchy"}})"), ConfigError);
  EXPECT_THROW(bad(R"({"beta": 1, "sides": [4], "field": {"kind": "gaussian", "stddev": 0}})"), ConfigError);
  EXPECT_NO_THROW(bad(R"({"beta": "inf", "sides": [64]})"));
  EXPECT_NO_THROW(bad(R"({"beta": 1, "sides": [20]})"));
  EXPECT_THROW(rfim::load_config("/nonexistent/run.json"), std::runtime_error);
}

TEST(Config, BoundaryRatioDecreasesAlongSchedule) {
  auto c = ground_config();
  c.sides = {1, 2, 3, 5, 8, 13};
  for (std::size_t d = 1; d <= 3; ++d) {
    c.d = d;
    if (d == 3) c.sides = {2, 4, 8, 16};
    EXPECT_NO_THROW(rfim::validate(c));
  }
}

TEST(RegionSpec, Forms) {
  EXPECT_EQ(rfim::parse_region_spec("box:2:3").size(), 9u);
  EXPECT_EQ(rfim::parse_region_spec("box:5").size(), 25u);
  EXPECT_EQ(rfim::parse_region_spec("box:3:2").dim(), 3u);
  EXPECT_EQ(rfim::parse_region_spec(R"({"box": {"d": 1, "side": 7}})").size(), 7u);
  const auto explicit_sites = rfim::parse_region_spec("[[0,0],[0,1],[1,0]]");
  EXPECT_EQ(explicit_sites.size(), 3u);
  EXPECT_FALSE(explicit_sites.extent().has_value());
  const auto path = temp_path("region.json");
  {
    std::ofstream out(path);
    out << R"({"sites": [[0], [1], [2]]})";
  }
  EXPECT_EQ(rfim::parse_region_spec("@" + path.string()).size(), 3u);
  EXPECT_THROW(rfim::parse_region_spec("box:x"), ConfigError);
  EXPECT_THROW(rfim::parse_region_spec("{not json"), ConfigError);
}

TEST(EnergySamples, DeterministicAndWorkerIndependent) {
  auto c = ground_config();
  c.sides = {8};
  c.reps = 2000;
  const auto a = rfim::run_energy_samples(c);
  const auto b = rfim::run_energy_samples(c);
  c.workers = 3;
  const auto d = rfim::run_energy_samples(c);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].energy.size(), 2000u);
  EXPECT_EQ(a[0].energy, b[0].energy);
  EXPECT_EQ(a[0].energy, d[0].energy);
  EXPECT_EQ(a[0].seeds, d[0].seeds);
}

TEST(EnergySamples, SingleSiteClosedForm) {
  ExperimentConfig c;
  c.beta = 1.0;
  c.sides = {1};
  c.reps = 100;
  c.workers = 1;
  const auto s = rfim::run_energy_samples(c);
  for (std::size_t r = 0; r < s[0].energy.size(); ++r) {
    const auto f = rfim::sample_field(c.model, rfim::LatticeRegion::cube(2, 1), rfim::CounterRng(s[0].seeds[r]));
    EXPECT_NEAR(s[0].energy[r], -std::log(2.0 * std::cosh(4.0 + f.phi[0])), 1e-12);
  }
}

TEST(EnergySamples, NearZeroFieldGroundEnergy) {
  auto c = ground_config();
  c.model = FieldModel::uniform(-1e-9, 1e-9);
  c.sides = {6};
  c.reps = 100;
  const auto s = rfim::run_energy_samples(c);
  const auto region = rfim::LatticeRegion::cube(2, 6);
  const double bonds = static_cast<double>(region.bonds().size() + region.boundary_bond_count());
  for (double e : s[0].energy) EXPECT_NEAR(e, -bonds, 1e-6);
}

TEST(Export, CsvRoundTrip) {
  auto c = ground_config();
  const auto sets = rfim::run_energy_samples(c);
  const auto path = temp_path("samples.csv");
  rfim::write_samples_csv(sets, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "region_side,n_sites,seed,energy");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) rows += !line.empty();
  EXPECT_EQ(rows, c.sides.size() * c.reps);
  const auto back = rfim::read_samples_csv(path.string());
  ASSERT_EQ(back.size(), sets.size());
  for (std::size_t q = 0; q < sets.size(); ++q) {
    EXPECT_EQ(back[q].side, sets[q].side);
    EXPECT_EQ(back[q].n_sites, sets[q].n_sites);
    EXPECT_EQ(back[q].seeds, sets[q].seeds);
    EXPECT_EQ(back[q].energy, sets[q].energy);
  }
  EXPECT_THROW(rfim::write_samples_csv(sets, "/nonexistent/dir/x.csv"), std::runtime_error);
  EXPECT_THROW(rfim::read_samples_csv("/nonexistent/x.csv"), std::runtime_error);
}

TEST(Export, CsvSeedReproducesRow) {
  auto c = ground_config();
  c.sides = {5};
  c.reps = 100;
  const auto s = rfim::run_energy_samples(c);
  const auto region = rfim::LatticeRegion::cube(2, 5);
  const auto f = rfim::sample_field(c.model, region, rfim::CounterRng(s[0].seeds[17]));
  EXPECT_EQ(rfim::ground_state_mincut(region, rfim::BoundaryCondition::plus(), f.phi).energy, s[0].energy[17]);
}

TEST(Campaign, GroundStateSmall) {
  auto c = ground_config();
  c.stein.enabled = true;
  c.stein.reps = 100;
  c.stein.max_side = 4;
  c.stein.a_k_reps = 100;
  c.ks = {0, 1};
  const auto rec = rfim::run_clt_campaign(c);
  ASSERT_EQ(rec.regions.size(), 2u);
  EXPECT_TRUE(rec.all_passed());
  EXPECT_EQ(rec.regions[0].stein.size(), 2u);
  EXPECT_TRUE(rec.regions[1].stein.empty());
  for (const auto& r : rec.regions) {
    EXPECT_GT(r.variance_per_site.value, 0.0);
    EXPECT_GT(r.variance_per_site.std_error, 0.0);
    EXPECT_GT(r.distances.d_wasserstein_se, 0.0);
    EXPECT_TRUE(r.distances.report.kkw_satisfied);
  }
  for (const auto& s : rec.regions[0].stein) {
    EXPECT_EQ(s.mode, "ground");
    EXPECT_TRUE(s.estimate_T.has_value());
    EXPECT_TRUE(s.estimate_S.has_value());
    EXPECT_EQ(s.bound_tv, s.terms[0] + s.terms[1]);
  }
  EXPECT_EQ(rec.a_k.size(), 2u);
  EXPECT_EQ(rec.cauchy_gaps.size(), 1u);
}

TEST(Campaign, FiniteBetaJsonRoundTrip) {
  ExperimentConfig c;
  c.beta = 0.8;
  c.sides = {3, 4};
  c.reps = 150;
  c.workers = 2;
  c.bootstrap = 20;
  c.ks = {1};
  c.stein.enabled = true;
  c.stein.reps = 100;
  c.stein.max_side = 3;
  c.stein.a_k_reps = 50;
  c.json_path = temp_path("record.json").string();
  c.csv_path = temp_path("record.csv").string();
  const auto rec = rfim::run_clt_campaign(c);
  EXPECT_TRUE(rec.all_passed());
  rfim::export_record(rec);
  const Json j = rfim::read_json(c.json_path);
  const auto back = rfim::record_from_json(j);
  EXPECT_EQ(rfim::record_json(back).dump(), rfim::record_json(rec).dump());
  EXPECT_EQ(back.regions[0].variance.value, rec.regions[0].variance.value);
  EXPECT_EQ(back.regions[0].stein[0].bound_wasserstein, rec.regions[0].stein[0].bound_wasserstein);
  // Every Monte Carlo quantity has a stderr field.
  for (const auto& r : j.at("regions")) {
    for (const char* key : {"mean", "variance", "variance_per_site"}) EXPECT_TRUE(r.at(key).contains("stderr"));
    EXPECT_TRUE(r.contains("d_wasserstein_stderr"));
    for (const auto& s : r.at("stein")) {
      EXPECT_TRUE(s.at("estimate_T").contains("stderr"));
      EXPECT_TRUE(s.at("estimate_S").contains("stderr"));
    }
  }
  for (const auto& a : j.at("a_k")) EXPECT_TRUE(a.at("a_k").contains("stderr"));
}

TEST(Campaign, PlusMinusSymmetry) {
  auto c = ground_config();
  c.bcs = rfim::parse_bcs("both");
  c.sides = {6};
  c.reps = 1000;
  const auto rec = rfim::run_clt_campaign(c);
  ASSERT_EQ(rec.regions.size(), 2u);
  EXPECT_EQ(rec.regions[0].bc, "plus");
  EXPECT_EQ(rec.regions[1].bc, "minus");
  bool found = false;
  for (const auto& chk : rec.checks) {
    if (chk.name == "plus_minus_symmetry") {
      found = true;
      EXPECT_TRUE(chk.passed) << chk.detail;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(rfim::csv_path_for("out/run.csv", "minus", 2), "out/run.minus.csv");
  EXPECT_EQ(rfim::csv_path_for("out/run.csv", "minus", 1), "out/run.csv");
}
