// rfimlab: command-line front end for the rfim library.

#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rfim/explab.hpp"
#include "rfim/rfim.hpp"

namespace {

using rfim::Json;

// "gaussian:mean:sd" or "uniform:a:b".
rfim::FieldModel parse_field(const std::string& spec) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t pos; (pos = spec.find(':', start)) != std::string::npos; start = pos + 1) {
    parts.push_back(spec.substr(start, pos - start));
  }
  parts.push_back(spec.substr(start));
  if (parts.size() == 1 && parts[0] == "gaussian") return rfim::FieldModel::gaussian(0.0, 1.0);
  if (parts.size() != 3) throw rfim::ConfigError("bad field spec '" + spec + "'");
  const double a = std::stod(parts[1]);
  const double b = std::stod(parts[2]);
  if (parts[0] == "gaussian") return rfim::FieldModel::gaussian(a, b);
  if (parts[0] == "uniform") return rfim::FieldModel::uniform(a, b);
  throw rfim::ConfigError("unknown field kind '" + parts[0] + "'");
}

std::optional<double> parse_beta_arg(const std::string& s) {
  const auto beta = rfim::parse_beta(Json(s));
  if (beta && !(*beta > 0.0 && std::isfinite(*beta))) throw rfim::ConfigError("beta must be > 0");
  return beta;
}

Json spins_json(const rfim::SpinConfig& s) {
  Json a = Json::array();
  for (auto v : s) a.push_back(static_cast<int>(v));
  return a;
}

void print(const Json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random field Ising model laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  auto* clt = app.add_subcommand("clt", "Run a CLT campaign from a JSON config");
  clt->add_option("--config", config_path, "Campaign config (JSON)")->required();

  std::string region_spec = "box:2:4";
  std::string bc_arg = "plus";
  std::string beta_arg = "1";
  std::string field_arg = "gaussian:0:1";
  std::uint64_t seed = 1;

  auto* fe = app.add_subcommand("free-energy", "Free energy and magnetizations of one realization");
  fe->add_option("--region", region_spec, "box:d:side, inline JSON, or @file.json");
  fe->add_option("--bc", bc_arg, "plus or minus");
  fe->add_option("--beta", beta_arg, "Inverse temperature (> 0)");
  fe->add_option("--seed", seed, "Field seed");
  fe->add_option("--field", field_arg, "gaussian:mean:sd or uniform:a:b");

  auto* gs = app.add_subcommand("ground-state", "Ground state of one realization");
  gs->add_option("--region", region_spec, "box:d:side, inline JSON, or @file.json");
  gs->add_option("--bc", bc_arg, "plus or minus");
  gs->add_option("--seed", seed, "Field seed");
  gs->add_option("--field", field_arg, "gaussian:mean:sd or uniform:a:b");

  std::string mode = "finite";
  std::vector<int> ks{1};
  std::size_t reps = 1000;
  int side = 6;
  std::size_t dim = 2;
  auto* sb = app.add_subcommand("stein-bound", "Computed normal-approximation bound on a box");
  sb->add_option("--mode", mode, "finite or ground")->check(CLI::IsMember({"finite", "ground"}));
  sb->add_option("--k", ks, "Neighbourhood radius (repeatable)");
  sb->add_option("--beta", beta_arg, "Inverse temperature for --mode finite");
  sb->add_option("--reps", reps, "Replications (>= 100)");
  sb->add_option("--side", side, "Box side");
  sb->add_option("--d", dim, "Dimension");
  sb->add_option("--bc", bc_arg, "plus or minus");
  sb->add_option("--seed", seed, "Master seed");
  sb->add_option("--field", field_arg, "gaussian:mean:sd or uniform:a:b");

  std::string input;
  std::string column = "energy";
  std::optional<int> only_side;
  auto* me = app.add_subcommand("metrics", "Distances of standardized samples to N(0, 1)");
  me->add_option("--input", input, "CSV with a header row")->required();
  me->add_option("--column", column, "Column to read");
  me->add_option("--side", only_side, "Only rows with this region_side");

  CLI11_PARSE(app, argc, argv);

  try {
    if (clt->parsed()) {
      const rfim::ExperimentConfig cfg = rfim::load_config(config_path);
      const rfim::ExperimentRecord rec = rfim::run_clt_campaign(cfg);
      rfim::export_record(rec);
      print(rfim::record_json(rec));
      return rec.all_passed() ? 0 : 1;
    }
    if (fe->parsed()) {
      const auto region = rfim::parse_region_spec(region_spec);
      const auto bc = rfim::BoundaryCondition::parse(bc_arg);
      const auto beta = parse_beta_arg(beta_arg);
      if (!beta) throw rfim::ConfigError("free-energy needs a finite beta; use ground-state for beta = inf");
      const auto f = rfim::sample_field(parse_field(field_arg), region, rfim::CounterRng(seed));
      const auto sol = rfim::solve(region, bc, f.phi, *beta);
      print({{"F", sol.free_energy}, {"logZ", sol.log_partition}, {"beta", *beta},
             {"magnetization", sol.magnetization}, {"phi", f.phi}});
      return 0;
    }
    if (gs->parsed()) {
      const auto region = rfim::parse_region_spec(region_spec);
      const auto bc = rfim::BoundaryCondition::parse(bc_arg);
      const auto f = rfim::sample_field(parse_field(field_arg), region, rfim::CounterRng(seed));
      const auto g = rfim::ground_state_with_gradient(region, bc, f);
      print({{"G", g.energy}, {"sigma_hat", spins_json(g.sigma_hat)}, {"gradient", g.gradient}, {"phi", f.phi}});
      return 0;
    }
    if (sb->parsed()) {
      rfim::ExperimentConfig cfg;
      cfg.model = parse_field(field_arg);
      cfg.beta = mode == "ground" ? std::nullopt : parse_beta_arg(beta_arg);
      if (mode == "finite" && !cfg.beta) throw rfim::ConfigError("--mode finite needs a finite beta");
      cfg.bcs = rfim::parse_bcs(bc_arg);
      cfg.d = dim;
      cfg.sides = {side};
      cfg.ks = ks;
      cfg.reps = reps;
      cfg.seed = seed;
      cfg.stein.enabled = true;
      cfg.stein.reps = reps;
      cfg.stein.max_side = side;
      cfg.stein.a_k_reps = 0;
      const auto rec = rfim::run_clt_campaign(cfg);
      Json reports = Json::array();
      for (const auto& r : rec.regions) {
        for (const auto& s : r.stein) {
          Json j = rfim::stein_json(s);
          j["bc"] = r.bc;
          j["variance_estimate_stderr"] = r.variance.std_error;
          j["measured_d_wasserstein"] = r.distances.report.d_wasserstein;
          j["measured_d_wasserstein_stderr"] = r.distances.d_wasserstein_se;
          reports.push_back(j);
        }
      }
      print(reports);
      return rec.all_passed() ? 0 : 1;
    }
    if (me->parsed()) {
      std::ifstream in(input);
      if (!in) throw std::runtime_error("cannot open '" + input + "'");
      std::string line;
      std::getline(in, line);
      std::vector<std::string> header;
      {
        std::stringstream ss(line);
        for (std::string h; std::getline(ss, h, ',');) header.push_back(h);
      }
      auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
          if (header[i] == name) return i;
        }
        return std::nullopt;
      };
      const auto col = find(column);
      if (!col) throw std::runtime_error("column '" + column + "' not found in '" + input + "'");
      const auto side_col = find("region_side");
      if (only_side && !side_col) throw std::runtime_error("--side given but no region_side column");
      std::vector<double> xs;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (cells.size() <= *col) throw std::runtime_error("short row in '" + input + "'");
        if (only_side && std::stoi(cells.at(*side_col)) != *only_side) continue;
        xs.push_back(std::stod(cells[*col]));
      }
      const auto r = rfim::distance_report(xs);
      print(rfim::distance_json(r));
      return r.kkw_satisfied ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "rfimlab: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
