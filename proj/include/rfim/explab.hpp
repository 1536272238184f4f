#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rfim/errors.hpp"
#include "rfim/field_models.hpp"
#include "rfim/gibbs.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"
#include "rfim/metrics.hpp"
#include "rfim/rng.hpp"
#include "rfim/stats.hpp"
#include "rfim/stein.hpp"

namespace rfim {

using Json = nlohmann::json;

/// Thrown for invalid experiment configurations and failed hypothesis guards.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t ground_site_cap = 4096;  // 64 x 64
inline constexpr int transfer_width_cap = 20;

struct SteinOptions {
  bool enabled = false;
  std::size_t reps = 400;           // replications for moment profiles and S, T
  int max_side = 16;                // skip Stein reports above this side
  bool estimate_t = true;
  bool estimate_s = true;
  std::size_t quad_points = 16;
  std::size_t a_k_reps = 2000;      // replications per a_k entry; 0 disables
};

struct ExperimentConfig {
  FieldModel model = FieldModel::gaussian(0.0, 1.0);
  std::optional<double> beta;  // nullopt: beta = infinity
  std::vector<BoundaryCondition::Kind> bcs{BoundaryCondition::Kind::plus};
  std::size_t d = 2;
  std::vector<int> sides;
  std::vector<int> ks{1, 2, 3};
  std::size_t reps = 2000;
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0: RFIMLAB_WORKERS or hardware concurrency
  std::size_t bootstrap = 200;
  std::string csv_path;
  std::string json_path;
  SteinOptions stein;

  [[nodiscard]] bool ground() const noexcept { return !beta.has_value(); }
};

inline std::string bc_name(BoundaryCondition::Kind k) {
  return k == BoundaryCondition::Kind::minus ? "minus" : "plus";
}

inline BoundaryCondition make_bc(BoundaryCondition::Kind k) {
  return k == BoundaryCondition::Kind::minus ? BoundaryCondition::minus() : BoundaryCondition::plus();
}

// RFIMLAB_WORKERS wins over the configured count.
inline unsigned resolve_workers(unsigned configured) {
  if (std::getenv("RFIMLAB_WORKERS") || configured == 0) return default_workers();
  return configured;
}

inline LatticeRegion campaign_region(std::size_t d, int side) { return LatticeRegion::cube(d, side); }

/// Checks the schedule and solver ceilings; throws ConfigError with the reason.
inline void validate(const ExperimentConfig& c) {
  if (c.d < 1) throw ConfigError("dimension must be >= 1");
  if (c.sides.empty()) throw ConfigError("region schedule is empty");
  if (c.reps < 100) throw ConfigError("replications must be >= 100 for distance estimation");
  if (c.bcs.empty()) throw ConfigError("no boundary condition selected");
  if (c.beta && !(*c.beta > 0.0 && std::isfinite(*c.beta))) {
    throw ConfigError("beta must be positive and finite, or \"inf\"");
  }
  for (int k : c.ks) {
    if (k < 0) throw ConfigError("k schedule entries must be >= 0");
  }
  if (c.stein.enabled && c.stein.reps < 100) throw ConfigError("stein.reps must be >= 100");
  if (c.stein.quad_points < 8) throw ConfigError("stein.quad_points must be >= 8");
  double last_ratio = std::numeric_limits<double>::infinity();
  int last_side = 0;
  for (int side : c.sides) {
    if (side < 1) throw ConfigError("region sides must be >= 1");
    if (side <= last_side) throw ConfigError("region sides must be strictly increasing");
    last_side = side;
    const double n = std::pow(static_cast<double>(side), static_cast<double>(c.d));
    if (c.ground()) {
      if (n > static_cast<double>(ground_site_cap)) {
        throw ConfigError("side " + std::to_string(side) + " exceeds the ground-state ceiling of " +
                          std::to_string(ground_site_cap) + " sites");
      }
    } else if (c.d <= 2) {
      if (c.d == 2 && side > transfer_width_cap) {
        throw ConfigError("side " + std::to_string(side) + " exceeds the transfer-matrix width cap " +
                          std::to_string(transfer_width_cap));
      }
    } else if (n > 24.0) {
      throw ConfigError("finite-beta regions in d >= 3 are limited to 24 sites (enumeration)");
    }
    const LatticeRegion region = campaign_region(c.d, side);
    const double ratio = static_cast<double>(region.boundary().size()) / static_cast<double>(region.size());
    if (!(ratio < last_ratio)) {
      throw ConfigError("hypothesis guard: |boundary|/|region| is not strictly decreasing at side " +
                        std::to_string(side));
    }
    last_ratio = ratio;
  }
}

// ---------------------------------------------------------------------------
// Config JSON

inline FieldModel parse_field_model(const Json& j) {
  const std::string kind = j.value("kind", "gaussian");
  if (kind == "gaussian") return FieldModel::gaussian(j.value("mean", 0.0), j.value("stddev", 1.0));
  if (kind == "uniform") return FieldModel::uniform(j.at("a").get<double>(), j.at("b").get<double>());
  throw ConfigError("unknown field kind '" + kind + "'");
}

inline Json field_model_json(const FieldModel& m) {
  if (m.kind() == FieldModel::Kind::gaussian) {
    return {{"kind", "gaussian"}, {"mean", m.first()}, {"stddev", m.second()}};
  }
  return {{"kind", "uniform"}, {"a", m.first()}, {"b", m.second()}};
}

inline std::optional<double> parse_beta(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::nullopt;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ConfigError("beta must be a number or \"inf\", got '" + s + "'");
    }
  }
  if (!j.is_number()) throw ConfigError("beta must be a number or \"inf\"");
  return j.get<double>();
}

inline std::vector<BoundaryCondition::Kind> parse_bcs(const std::string& s) {
  if (s == "plus") return {BoundaryCondition::Kind::plus};
  if (s == "minus") return {BoundaryCondition::Kind::minus};
  if (s == "both") return {BoundaryCondition::Kind::plus, BoundaryCondition::Kind::minus};
  throw ConfigError("bc must be plus, minus or both, got '" + s + "'");
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("field")) c.model = parse_field_model(j.at("field"));
    c.beta = j.contains("beta") ? parse_beta(j.at("beta")) : std::nullopt;
    if (j.contains("bc")) c.bcs = parse_bcs(j.at("bc").get<std::string>());
    c.d = j.value("d", std::size_t{2});
    c.sides = j.at("sides").get<std::vector<int>>();
    if (j.contains("k")) c.ks = j.at("k").get<std::vector<int>>();
    c.reps = j.value("reps", c.reps);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", 0u);
    c.bootstrap = j.value("bootstrap", c.bootstrap);
    if (j.contains("output")) {
      const Json& o = j.at("output");
      c.csv_path = o.value("csv", "");
      c.json_path = o.value("json", "");
    }
    if (j.contains("stein")) {
      const Json& s = j.at("stein");
      c.stein.enabled = s.value("enabled", true);
      c.stein.reps = s.value("reps", c.stein.reps);
      c.stein.max_side = s.value("max_side", c.stein.max_side);
      c.stein.estimate_t = s.value("estimate_T", c.stein.estimate_t);
      c.stein.estimate_s = s.value("estimate_S", c.stein.estimate_s);
      c.stein.quad_points = s.value("quad_points", c.stein.quad_points);
      c.stein.a_k_reps = s.value("a_k_reps", c.stein.a_k_reps);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json bc = c.bcs.size() == 2 ? Json("both") : Json(bc_name(c.bcs.front()));
  Json j = {{"field", field_model_json(c.model)},
            {"beta", c.beta ? Json(*c.beta) : Json("inf")},
            {"bc", bc},
            {"d", c.d},
            {"sides", c.sides},
            {"k", c.ks},
            {"reps", c.reps},
            {"seed", c.seed},
            {"bootstrap", c.bootstrap}};
  j["stein"] = {{"enabled", c.stein.enabled},   {"reps", c.stein.reps},
                {"max_side", c.stein.max_side}, {"estimate_T", c.stein.estimate_t},
                {"estimate_S", c.stein.estimate_s}, {"quad_points", c.stein.quad_points},
                {"a_k_reps", c.stein.a_k_reps}};
  return j;
}

// ---------------------------------------------------------------------------
// Region specs for the command line

inline LatticeRegion region_from_json(const Json& j) {
  if (j.is_object() && j.contains("box")) {
    const Json& b = j.at("box");
    return LatticeRegion::cube(b.value("d", std::size_t{2}), b.at("side").get<int>());
  }
  const Json& list = j.is_object() ? j.at("sites") : j;
  std::vector<Site> sites;
  for (const auto& s : list) sites.emplace_back(s.get<std::vector<int>>());
  return LatticeRegion::from_sites(std::move(sites));
}

/// "box:d:side", "box:side" (d = 2), inline JSON, or "@path" to a JSON file.
inline LatticeRegion parse_region_spec(const std::string& spec) {
  if (spec.rfind("box:", 0) == 0) {
    std::vector<int> parts;
    std::stringstream ss(spec.substr(4));
    std::string tok;
    while (std::getline(ss, tok, ':')) {
      try {
        parts.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("bad region spec '" + spec + "'");
      }
    }
    if (parts.size() == 1) return LatticeRegion::cube(2, parts[0]);
    if (parts.size() == 2 && parts[0] >= 1) return LatticeRegion::cube(static_cast<std::size_t>(parts[0]), parts[1]);
    throw ConfigError("bad region spec '" + spec + "' (expected box:d:side)");
  }
  Json j;
  try {
    if (!spec.empty() && spec[0] == '@') {
      std::ifstream in(spec.substr(1));
      if (!in) throw std::runtime_error("cannot open region file '" + spec.substr(1) + "'");
      in >> j;
    } else {
      j = Json::parse(spec);
    }
    return region_from_json(j);
  } catch (const Json::exception& e) {
    throw ConfigError("bad region spec '" + spec + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Energy samples

/// Seed of one replication; `sample_field(model, region, CounterRng(seed))`
/// reproduces its field.
inline std::uint64_t replication_seed(std::uint64_t master, int side, std::size_t rep) {
  return CounterRng(master).split(static_cast<std::uint64_t>(side)).split(rep).key();
}

/// F (finite beta) or G (beta = infinity) for one field realization.
inline double region_energy(const LatticeRegion& region, const BoundaryCondition& bc, const FieldModel& model,
                            std::optional<double> beta, std::uint64_t seed) {
  const FieldRealization f = sample_field(model, region, CounterRng(seed));
  if (beta) return free_energy(region, bc, f.phi, *beta);
  return ground_state_mincut(region, bc, f.phi).energy;
}

struct SampleSet {
  std::string bc;
  int side = 0;
  std::size_t n_sites = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> energy;
};

/// Raw energy samples for every (boundary condition, side).
inline std::vector<SampleSet> run_energy_samples(const ExperimentConfig& c) {
  validate(c);
  const unsigned workers = resolve_workers(c.workers);
  std::vector<SampleSet> out;
  for (auto kind : c.bcs) {
    const BoundaryCondition bc = make_bc(kind);
    for (int side : c.sides) {
      const LatticeRegion region = campaign_region(c.d, side);
      SampleSet s;
      s.bc = bc_name(kind);
      s.side = side;
      s.n_sites = region.size();
      s.seeds.resize(c.reps);
      for (std::size_t r = 0; r < c.reps; ++r) s.seeds[r] = replication_seed(c.seed, side, r);
      s.energy = parallel_map<double>(c.reps, workers, [&](std::size_t r) {
        return region_energy(region, bc, c.model, c.beta, s.seeds[r]);
      });
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campaign records

struct DistanceSummary {
  DistanceReport report;
  double d_wasserstein_se = 0.0;  // bootstrap
  double d_kolmogorov_se = 0.0;
};

struct RegionSummary {
  std::string bc;
  int side = 0;
  std::size_t n_sites = 0;
  double boundary_ratio = 0.0;
  Estimate mean;
  Estimate variance;
  Estimate variance_per_site;
  DistanceSummary distances;
  std::vector<SteinReport> stein;
};

struct AkEntry {
  int k = 0;
  Estimate a_k;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ExperimentRecord {
  ExperimentConfig config;
  std::vector<SampleSet> samples;
  std::vector<RegionSummary> regions;
  std::vector<AkEntry> a_k;
  std::vector<Estimate> cauchy_gaps;  // |a_k - a_{k+1}| for consecutive schedule entries
  std::vector<CheckResult> checks;

  [[nodiscard]] bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
};

/// Distances with bootstrap standard errors; resample b uses stream b of `rng`.
inline DistanceSummary distance_summary(std::span<const double> samples, std::size_t bootstrap,
                                        const CounterRng& rng) {
  DistanceSummary s;
  s.report = distance_report(samples);
  if (bootstrap < 2) return s;
  std::vector<double> dw(bootstrap), dk(bootstrap), resample(samples.size());
  for (std::size_t b = 0; b < bootstrap; ++b) {
    CounterRng r = rng.split(b);
    for (double& x : resample) x = samples[r.below(samples.size())];
    try {
      dw[b] = wasserstein_to_normal(resample);
      dk[b] = kolmogorov_to_normal(resample, Standardize::yes);
    } catch (const std::invalid_argument&) {  // degenerate resample
      dw[b] = s.report.d_wasserstein;
      dk[b] = s.report.d_kolmogorov;
    }
  }
  s.d_wasserstein_se = std::sqrt(sample_variance(dw));
  s.d_kolmogorov_se = std::sqrt(sample_variance(dk));
  return s;
}

namespace detail {

inline std::vector<NeighborhoodSystem> neighborhoods(const LatticeRegion& region, const std::vector<int>& ks) {
  std::vector<NeighborhoodSystem> out;
  for (int k : ks) out.push_back(NeighborhoodSystem::build(region, k));
  return out;
}

// Stein reports for one region, one per k.
inline std::vector<SteinReport> stein_reports(const ExperimentConfig& c, const LatticeRegion& region,
                                              const BoundaryCondition& bc, double sigma2, const CounterRng& rng,
                                              unsigned workers) {
  const auto systems = neighborhoods(region, c.ks);
  std::vector<SteinReport> out;
  if (c.beta) {
    const double beta = *c.beta;
    const auto samples =
        sample_finite_approximations(region, bc, c.model, beta, systems, rng.split(0), c.stein.reps, workers);
    std::optional<Estimate> t;
    if (c.stein.estimate_t) {
      auto f = [&](const std::vector<double>& z) {
        return free_energy(region, bc, realize(c.model, z).phi, beta);
      };
      t = estimate_T(f, region.size(), [](CounterRng r) { return r.normal(); }, rng.split(1), c.stein.reps,
                     workers);
    }
    for (std::size_t q = 0; q < systems.size(); ++q) {
      SteinReport rep = bound_normcomb(samples.profile(q), systems[q], sigma2);
      rep.estimate_T = t;
      if (c.stein.estimate_s) {
        rep.estimate_S =
            estimate_S_finite(region, bc, c.model, systems[q], beta, rng.split(2 + q), c.stein.reps, true, workers)
                .total;
      }
      out.push_back(std::move(rep));
    }
  } else {
    require_gaussian(realize(c.model, std::vector<double>{0.0}), "ground-state Stein report");
    const auto samples = sample_ground_approximations(region, bc, c.model, systems, rng.split(0), c.stein.reps,
                                                      workers);
    std::optional<Estimate> t;
    if (c.stein.estimate_t) {
      auto f = [&](const std::vector<double>& z) {
        return ground_state_mincut(region, bc, realize(c.model, z).phi).energy;
      };
      t = estimate_T(f, region.size(), [](CounterRng r) { return r.normal(); }, rng.split(1), c.stein.reps,
                     workers);
    }
    for (std::size_t q = 0; q < systems.size(); ++q) {
      SteinReport rep = bound_normcont(samples.profile(q), systems[q], sigma2);
      rep.estimate_T = t;
      if (c.stein.estimate_s) {
        rep.estimate_S = estimate_S_continuous(ground_local_approximant(c.model, systems[q]), region.size(),
                                               rng.split(2 + q), c.stein.reps, c.stein.quad_points, workers);
      }
      out.push_back(std::move(rep));
    }
  }
  return out;
}

}  // namespace detail

/// a_k: the per-site value E(S_0) of the statistic S at the centre of a box
/// of radius k. Finite beta uses resampling with the subset law; beta =
/// infinity uses Gaussian interpolation of the local ground-spin approximant.
inline Estimate estimate_a_k(int k, const ExperimentConfig& c, const CounterRng& rng, std::size_t reps,
                             unsigned workers) {
  if (c.beta) return estimate_S0_finite(k, c.d, c.model, *c.beta, rng, reps, workers);
  const Site origin(std::vector<int>(c.d, 0));
  const LatticeRegion box = LatticeRegion::box(origin, k);
  const SubRegion whole = local_box(box, *box.index_of(origin), k);
  auto g = [&](std::span<const double> z) {
    std::vector<double> out(z.size(), 0.0);
    out[whole.center] = local_g_ground(whole, realize(c.model, z));
    return out;
  };
  return estimate_S_continuous(g, box.size(), rng, reps, c.stein.quad_points, workers);
}

/// Full campaign: samples, per-region variance and distances, Stein reports,
/// a_k sequence and the invariant checks that decide the exit status.
inline ExperimentRecord run_clt_campaign(const ExperimentConfig& c) {
  validate(c);
  const unsigned workers = resolve_workers(c.workers);
  ExperimentRecord rec;
  rec.config = c;
  rec.samples = run_energy_samples(c);
  const CounterRng master(c.seed);
  const CounterRng boot = master.split(0x626f6f74);    // bootstrap
  const CounterRng stein_rng = master.split(0x7374656e);
  bool kkw_all = true;
  bool variance_positive = true;
  for (const SampleSet& s : rec.samples) {
    RegionSummary r;
    r.bc = s.bc;
    r.side = s.side;
    r.n_sites = s.n_sites;
    const LatticeRegion region = campaign_region(c.d, s.side);
    r.boundary_ratio = static_cast<double>(region.boundary().size()) / static_cast<double>(region.size());
    r.mean = mean_estimate(s.energy);
    r.variance = variance_estimate(s.energy);
    const double n = static_cast<double>(s.n_sites);
    r.variance_per_site = {r.variance.value / n, r.variance.std_error / n};
    if (!(r.variance.value > 0.0)) {
      variance_positive = false;
      rec.regions.push_back(std::move(r));
      continue;
    }
    r.distances = distance_summary(s.energy, c.bootstrap, boot.split(static_cast<std::uint64_t>(s.side)));
    kkw_all = kkw_all && r.distances.report.kkw_satisfied;
    if (c.stein.enabled && s.side <= c.stein.max_side) {
      const BoundaryCondition bc = s.bc == "minus" ? BoundaryCondition::minus() : BoundaryCondition::plus();
      r.stein = detail::stein_reports(c, region, bc, r.variance.value,
                                      stein_rng.split(static_cast<std::uint64_t>(s.side)), workers);
    }
    rec.regions.push_back(std::move(r));
  }
  if (c.stein.enabled && c.stein.a_k_reps >= 2) {
    const CounterRng ak_rng = master.split(0x615f6b);
    for (int k : c.ks) {
      rec.a_k.push_back({k, estimate_a_k(k, c, ak_rng.split(static_cast<std::uint64_t>(k)), c.stein.a_k_reps,
                                         workers)});
    }
    for (std::size_t q = 0; q + 1 < rec.a_k.size(); ++q) {
      const Estimate& a = rec.a_k[q].a_k;
      const Estimate& b = rec.a_k[q + 1].a_k;
      rec.cauchy_gaps.push_back({std::abs(a.value - b.value), std::hypot(a.std_error, b.std_error)});
    }
  }

  rec.checks.push_back({"hypothesis_guard", true, "|boundary|/|region| strictly decreasing"});
  rec.checks.push_back({"variance_positive", variance_positive, "sample variance > 0 on every region"});
  rec.checks.push_back({"kkw", kkw_all, "d_K <= 2 sqrt(d_W) on every region"});
  bool finite_stein = true;
  for (const auto& r : rec.regions) {
    for (const auto& rep : r.stein) {
      for (double t : rep.terms) finite_stein = finite_stein && std::isfinite(t) && t >= 0.0;
    }
  }
  rec.checks.push_back({"stein_terms", finite_stein, "every bound term finite and nonnegative"});
  if (c.bcs.size() == 2 && c.model.kind() == FieldModel::Kind::gaussian && c.model.first() == 0.0) {
    bool agree = true;
    std::string detail;
    const std::size_t half = rec.regions.size() / 2;
    for (std::size_t q = 0; q < half; ++q) {
      const auto& p = rec.regions[q].variance_per_site;
      const auto& m = rec.regions[q + half].variance_per_site;
      const double gap = std::abs(p.value - m.value);
      const double tol = 3.0 * std::hypot(p.std_error, m.std_error);
      if (gap > tol) {
        agree = false;
        detail += "side " + std::to_string(rec.regions[q].side) + " ";
      }
    }
    rec.checks.push_back({"plus_minus_symmetry", agree,
                          agree ? "plus/minus variance per site agree within 3 stderr" : "disagree at " + detail});
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Export / import

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// For several boundary conditions the CSV path gets a ".plus" / ".minus" infix.
inline std::string csv_path_for(const std::string& path, const std::string& bc, std::size_t bc_count) {
  if (bc_count < 2) return path;
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + "." + bc + p.extension().string())).string();
}

inline void write_samples_csv(const std::vector<SampleSet>& sets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "region_side,n_sites,seed,energy\n";
  for (const auto& s : sets) {
    for (std::size_t r = 0; r < s.energy.size(); ++r) {
      out << s.side << ',' << s.n_sites << ',' << s.seeds[r] << ',' << format_double(s.energy[r]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<SampleSet> read_samples_csv(const std::string& path, const std::string& bc = "plus") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
  std::vector<SampleSet> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') ||
        !std::getline(ss, d)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 columns");
    }
    try {
      const int side = std::stoi(a);
      if (out.empty() || out.back().side != side) {
        out.push_back({bc, side, static_cast<std::size_t>(std::stoull(b)), {}, {}});
      }
      out.back().seeds.push_back(std::stoull(c));
      out.back().energy.push_back(std::strtod(d.c_str(), nullptr));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return out;
}

inline Json estimate_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.std_error}}; }

inline Estimate estimate_from_json(const Json& j) {
  auto num = [](const Json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  return {num(j.at("value")), num(j.at("stderr"))};
}

inline Json distance_json(const DistanceReport& r) {
  return {{"n_samples", r.n_samples},         {"sample_mean", r.sample_mean},
          {"sample_variance", r.sample_variance}, {"d_wasserstein", r.d_wasserstein},
          {"d_kolmogorov", r.d_kolmogorov},   {"kkw_satisfied", r.kkw_satisfied}};
}

inline Json stein_json(const SteinReport& r) {
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json j = {{"mode", r.mode},
            {"n_sites", r.n_sites},
            {"k", r.k},
            {"variance_estimate", r.variance_estimate},
            {"variance_gap_bound", r.variance_gap_bound},
            {"terms", {r.terms[0], r.terms[1], r.terms[2]}},
            {"bound_wasserstein", num(r.bound_wasserstein)},
            {"bound_tv", num(r.bound_tv)},
            {"bound_kolmogorov", num(r.bound_kolmogorov)}};
  j["estimate_T"] = r.estimate_T ? estimate_json(*r.estimate_T) : Json(nullptr);
  j["estimate_S"] = r.estimate_S ? estimate_json(*r.estimate_S) : Json(nullptr);
  return j;
}

inline SteinReport stein_from_json(const Json& j) {
  auto num = [](const Json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  SteinReport r;
  r.mode = j.at("mode").get<std::string>();
  r.n_sites = j.at("n_sites").get<std::size_t>();
  r.k = j.at("k").get<int>();
  r.variance_estimate = j.at("variance_estimate").get<double>();
  r.variance_gap_bound = j.at("variance_gap_bound").get<double>();
  for (std::size_t t = 0; t < 3; ++t) r.terms[t] = j.at("terms").at(t).get<double>();
  r.bound_wasserstein = num(j.at("bound_wasserstein"));
  r.bound_tv = num(j.at("bound_tv"));
  r.bound_kolmogorov = num(j.at("bound_kolmogorov"));
  if (!j.at("estimate_T").is_null()) r.estimate_T = estimate_from_json(j.at("estimate_T"));
  if (!j.at("estimate_S").is_null()) r.estimate_S = estimate_from_json(j.at("estimate_S"));
  return r;
}

/// Aggregate JSON; every Monte Carlo quantity carries its standard error.
inline Json record_json(const ExperimentRecord& rec) {
  Json regions = Json::array();
  for (const auto& r : rec.regions) {
    Json stein = Json::array();
    for (const auto& s : r.stein) stein.push_back(stein_json(s));
    regions.push_back({{"bc", r.bc},
                       {"side", r.side},
                       {"n_sites", r.n_sites},
                       {"boundary_ratio", r.boundary_ratio},
                       {"mean", estimate_json(r.mean)},
                       {"variance", estimate_json(r.variance)},
                       {"variance_per_site", estimate_json(r.variance_per_site)},
                       {"distances", distance_json(r.distances.report)},
                       {"d_wasserstein_stderr", r.distances.d_wasserstein_se},
                       {"d_kolmogorov_stderr", r.distances.d_kolmogorov_se},
                       {"stein", stein}});
  }
  Json ak = Json::array();
  for (const auto& a : rec.a_k) ak.push_back({{"k", a.k}, {"a_k", estimate_json(a.a_k)}});
  Json gaps = Json::array();
  for (const auto& g : rec.cauchy_gaps) gaps.push_back(estimate_json(g));
  Json checks = Json::array();
  for (const auto& c : rec.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"config", config_to_json(rec.config)},
          {"regions", regions},
          {"a_k", ak},
          {"cauchy_gaps", gaps},
          {"checks", checks},
          {"passed", rec.all_passed()}};
}

/// Rebuilds the aggregate part of a record (samples are not stored in JSON).
inline ExperimentRecord record_from_json(const Json& j) {
  ExperimentRecord rec;
  rec.config = config_from_json(j.at("config"));
  for (const auto& r : j.at("regions")) {
    RegionSummary s;
    s.bc = r.at("bc").get<std::string>();
    s.side = r.at("side").get<int>();
    s.n_sites = r.at("n_sites").get<std::size_t>();
    s.boundary_ratio = r.at("boundary_ratio").get<double>();
    s.mean = estimate_from_json(r.at("mean"));
    s.variance = estimate_from_json(r.at("variance"));
    s.variance_per_site = estimate_from_json(r.at("variance_per_site"));
    const Json& d = r.at("distances");
    s.distances.report = {d.at("n_samples").get<std::size_t>(), d.at("sample_mean").get<double>(),
                          d.at("sample_variance").get<double>(), d.at("d_wasserstein").get<double>(),
                          d.at("d_kolmogorov").get<double>(), d.at("kkw_satisfied").get<bool>()};
    s.distances.d_wasserstein_se = r.at("d_wasserstein_stderr").get<double>();
    s.distances.d_kolmogorov_se = r.at("d_kolmogorov_stderr").get<double>();
    for (const auto& st : r.at("stein")) s.stein.push_back(stein_from_json(st));
    rec.regions.push_back(std::move(s));
  }
  for (const auto& a : j.at("a_k")) rec.a_k.push_back({a.at("k").get<int>(), estimate_from_json(a.at("a_k"))});
  for (const auto& g : j.at("cauchy_gaps")) rec.cauchy_gaps.push_back(estimate_from_json(g));
  for (const auto& c : j.at("checks")) {
    rec.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(), c.at("detail").get<std::string>()});
  }
  return rec;
}

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw std::runtime_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Writes the CSV samples and the JSON aggregate to the configured paths.
inline void export_record(const ExperimentRecord& rec) {
  const auto& c = rec.config;
  if (!c.csv_path.empty()) {
    for (auto kind : c.bcs) {
      std::vector<SampleSet> sets;
      for (const auto& s : rec.samples) {
        if (s.bc == bc_name(kind)) sets.push_back(s);
      }
      write_samples_csv(sets, csv_path_for(c.csv_path, bc_name(kind), c.bcs.size()));
    }
  }
  if (!c.json_path.empty()) write_json(record_json(rec), c.json_path);
}

}  // namespace rfim
