// toruswkb: command-line driver for the weak KAM / semiclassical toolkit.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "toruswkb/io.hpp"
#include "toruswkb/pipeline.hpp"

using namespace toruswkb;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

void say(const Common& c, const std::string& line) {
  if (!c.quiet) std::cout << line << '\n';
}

struct Prepared {
  TorusGrid grid;
  Potential V;
  WeakKamSolution S;
  GridMeasure density;
};

Prepared prepare(const ExperimentConfig& cfg) {
  if (cfg.dim != 1 && cfg.weak_kam_points != cfg.quantum_points)
    throw DimensionError("two-dimensional runs need weak_kam_points == quantum_points");
  Prepared p;
  const TorusGrid gw = make_grid(cfg.dim, cfg.weak_kam_points);
  const Potential Vw = cfg.potential.build(gw);
  const WeakKamSolution S = solve_configured(cfg, Vw);
  p.grid = make_grid(cfg.dim, cfg.quantum_points);
  p.V = cfg.potential.build(p.grid);
  p.S = transfer_solution(S, p.grid, p.V);
  WkbConfig w;
  w.mask_margin = cfg.mask_margin;
  w.mollifier_bandwidth = cfg.mollifier_bandwidth;
  w.amplitude_floor = cfg.amplitude_floor;
  p.density = prepare_initial_density(initial_density(cfg, p.grid), p.S, w).density;
  return p;
}

int cmd_weakkam(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const TorusGrid g = make_grid(cfg.dim, cfg.weak_kam_points);
  const Potential V = cfg.potential.build(g);
  const WeakKamSolution S = solve_configured(cfg, V);
  const fs::path dir = out_dir(cfg);
  {
    auto os = open_out(dir / "weakkam_values.csv");
    write_field_csv(os, S.values, "S");
  }
  {
    auto os = open_out(dir / "weakkam_gradient.csv");
    write_field_csv(os, S.gradient);
  }
  {
    ScalarField mask(g);
    for (std::size_t i = 0; i < g.size(); ++i) mask.values[i] = S.diff_mask[i];
    auto os = open_out(dir / "weakkam_mask.csv");
    write_field_csv(os, mask, "mask");
  }
  nlohmann::json summary = {{"c0", S.c0},
                            {"residual", S.residual},
                            {"iterations", S.iterations},
                            {"final_change", S.final_change},
                            {"drift_per_step", S.drift_per_step},
                            {"fixed_point_defect", fixed_point_defect(S, cfg.weak_kam, V)}};
  if (auto e = closed_form_gradient_error(S, cfg.potential, cfg.mass, 3)) summary["gradient_error"] = *e;
  auto os = open_out(dir / "weakkam_summary.json");
  os << summary.dump(2) << '\n';
  say(c, summary.dump());
  return 0;
}

int cmd_flow(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const Prepared p = prepare(cfg);
  const ParticleMeasure sigma = grid_to_particles(p.density, cfg.particles, cfg.seed);
  const PhaseParticleMeasure om0 = lift_graph(sigma, p.S);
  const fs::path dir = out_dir(cfg);
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    const PhaseParticleMeasure om = pushforward_flow(om0, cfg.times[k], cfg.flow_step, p.V, cfg.mass);
    auto os = open_out(dir / ("flow_t" + std::to_string(k) + ".csv"));
    write_phase_particles_csv(os, om);
    const GraphDistance gd = graph_distance(om, p.S);
    say(c, "t=" + fmt(cfg.times[k]) + " graph_distance=" + fmt(gd.distance) + " exit_mass=" + fmt(gd.exit_mass));
  }
  return 0;
}

int cmd_schrod(const Common& c, double hbar) {
  const ExperimentConfig cfg = load(c);
  const Prepared p = prepare(cfg);
  WaveFunction psi0 = wkb_from_density(p.density, p.S, hbar);
  psi0.mass = cfg.mass;
  const auto snaps = propagate_snapshots(psi0, cfg.times, cfg.schrodinger_dt, p.V);
  const fs::path dir = out_dir(cfg);
  const double e0 = energy(psi0, p.V);
  double norm_drift = 0.0, energy_drift = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    auto os = open_out(dir / ("schrod_t" + std::to_string(k) + ".csv"));
    write_grid_measure_csv(os, position_density(snaps[k]));
    const double n = snaps[k].norm(), e = energy(snaps[k], p.V);
    norm_drift = std::max(norm_drift, std::abs(n - 1.0));
    energy_drift = std::max(energy_drift, std::abs(e - e0));
    rows.push_back({{"t", cfg.times[k]}, {"norm", n}, {"energy", e}});
    say(c, "t=" + fmt(cfg.times[k]) + " norm=" + fmt(n) + " energy=" + fmt(e));
  }
  const nlohmann::json report = {{"hbar", hbar},
                                 {"dt", cfg.schrodinger_dt},
                                 {"norm_drift", norm_drift},
                                 {"energy_drift", energy_drift},
                                 {"snapshots", rows}};
  auto os = open_out(dir / "schrod_report.json");
  os << report.dump(2) << '\n';
  return 0;
}

int cmd_wigner(const Common& c, double hbar) {
  const ExperimentConfig cfg = load(c);
  if (cfg.dim != 1) throw DimensionError("wigner subcommand writes 1D marginals only");
  const Prepared p = prepare(cfg);
  WaveFunction psi0 = wkb_from_density(p.density, p.S, hbar);
  psi0.mass = cfg.mass;
  const auto snaps = propagate_snapshots(psi0, cfg.times, cfg.schrodinger_dt, p.V);
  const auto battery = standard_battery(cfg.dim, 3, battery_radius(p.V, cfg.mass));
  double pmax = 0.0;
  for (std::size_t i = 0; i < p.grid.size(); ++i)
    if (p.density.density[i] > 0.0) pmax = std::max(pmax, std::abs(p.S.gradient.values[i][0]));
  const fs::path dir = out_dir(cfg);
  auto pos = open_out(dir / "wigner_pairings.csv");
  pos << "t,symbol,pairing\n";
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const HusimiField H = husimi(snaps[k], pmax + 1.5 + 6.0 * std::sqrt(hbar));
    auto os = open_out(dir / ("husimi_marginal_t" + std::to_string(k) + ".csv"));
    write_grid_measure_csv(os, husimi_position_marginal(H));
    for (const auto& b : battery) pos << fmt(cfg.times[k]) << ',' << b.id << ',' << fmt(pairing(snaps[k], b)) << '\n';
    say(c, "t=" + fmt(cfg.times[k]) + " husimi_mass=" + fmt(H.mass()));
  }
  return 0;
}

int cmd_measure(const Common& c, const std::string& a, const std::string& b) {
  if (!a.empty() && !b.empty()) {
    const double w = w1_circle(read_particles(a), read_particles(b));
    std::cout << fmt(w) << '\n';
    return 0;
  }
  const ExperimentConfig cfg = load(c);
  const Prepared p = prepare(cfg);
  const fs::path dir = out_dir(cfg);
  auto os = open_out(dir / "sigma0_particles.csv");
  write_particles_csv(os, grid_to_particles(p.density, cfg.particles, cfg.seed));
  auto og = open_out(dir / "sigma0_density.csv");
  write_grid_measure_csv(og, p.density);
  say(c, "wrote " + (dir / "sigma0_particles.csv").string());
  return 0;
}

int cmd_ot(const Common& c, const std::string& a, const std::string& b, double t) {
  if (a.empty() || b.empty()) throw InvalidArgument("ot needs --source and --target measure files");
  const ExperimentConfig cfg = load(c);
  const ParticleMeasure mu = read_particles(a), nu = read_particles(b);
  const TorusGrid gw = make_grid(cfg.dim, cfg.weak_kam_points);
  const Potential V = cfg.potential.build(gw);
  const CostMatrix C = cost_matrix(mu.points, nu.points, t, cfg.transport.path_nodes, V, cfg.mass,
                                   cfg.transport.winding_range);
  const TransportPlan plan = kantorovich(mu, nu, C);
  const WeakKamSolution S = solve_configured(cfg, V);
  DisplacementConfig dc;
  dc.step = cfg.flow_step;
  dc.path_nodes = cfg.transport.path_nodes;
  dc.winding_range = cfg.transport.winding_range;
  const DisplacementReport d = displacement_check(mu, S, t, V, cfg.mass, dc);
  const fs::path dir = out_dir(cfg);
  {
    auto os = open_out(dir / "ot_cost.csv");
    write_matrix_csv(os, C.values);
  }
  {
    auto os = open_out(dir / "ot_plan.csv");
    write_matrix_csv(os, plan.weights);
  }
  nlohmann::json j = {{"t", t},
                      {"plan_cost", plan.cost},
                      {"plan_exact", plan.exact},
                      {"atoms", d.atoms},
                      {"flow_action", d.flow_action},
                      {"graph_cost", d.graph_cost},
                      {"optimal_cost", d.optimal_cost},
                      {"gap_flow", d.gap_flow},
                      {"gap_graph", d.gap_graph},
                      {"rel_gap_flow", d.rel_gap_flow},
                      {"rel_gap_graph", d.rel_gap_graph},
                      {"exit_samples", d.exit_samples}};
  auto os = open_out(dir / "ot_displacement.json");
  os << j.dump(2) << '\n';
  say(c, j.dump());
  return 0;
}

int cmd_verify(const Common& c, int which) {
  const ExperimentConfig cfg = load(c);
  ProgressLog log;
  if (!c.quiet) log = [](const std::string& s) { std::cerr << s << '\n'; };
  const VerificationReport rep = which == 1 ? run_theorem1(cfg, log) : run_theorem2(cfg, log);
  const std::string hash = emit_artifacts(rep, cfg, cfg.output_dir);
  for (const auto& cr : rep.criteria) {
    if (!cr.enabled) continue;
    std::string line = std::string(cr.passed ? "PASS" : "FAIL") + " criterion " + std::to_string(cr.id) + " (" +
                       cr.title + ")";
    for (const auto& m : cr.metrics) line += " " + m.name + "=" + fmt(m.value);
    say(c, line);
  }
  if (!rep.failure.empty()) std::cerr << "error: " << rep.failure << '\n';
  say(c, "manifest " + hash);
  return rep.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak KAM solutions, semiclassical WKB propagation and transport on the flat torus"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", common.config, "JSON configuration file")->check(CLI::ExistingFile);
    s->add_option("--out", common.out, "output directory");
    s->add_option("--seed", common.seed, "sampling seed");
    s->add_flag("--quiet", common.quiet, "suppress progress output");
  };
  double hbar = 1.0 / 32;
  double t = 1.0;
  std::string src, tgt;

  auto* weakkam = app.add_subcommand("weakkam", "solve for the weak KAM solution and its gradient");
  auto* flowc = app.add_subcommand("flow", "lift the initial density to the graph and flow it");
  auto* schrod = app.add_subcommand("schrod", "propagate WKB initial data");
  auto* wigner = app.add_subcommand("wigner", "Husimi marginals and symbol pairings");
  auto* measure = app.add_subcommand("measure", "sample the initial density, or W1 between two measures");
  auto* ot = app.add_subcommand("ot", "cost matrix, optimal plan and displacement check");
  auto* thm1 = app.add_subcommand("verify-thm1", "run the Theorem 1 verification pipeline");
  auto* thm2 = app.add_subcommand("verify-thm2", "run the Theorem 2 cross-solver pipeline");
  for (auto* s : {weakkam, flowc, schrod, wigner, measure, ot, thm1, thm2}) add_common(s);
  for (auto* s : {schrod, wigner}) s->add_option("--hbar", hbar, "semiclassical parameter")->check(CLI::PositiveNumber);
  for (auto* s : {measure, ot}) {
    s->add_option("--source", src, "first measure (.csv or .json)");
    s->add_option("--target", tgt, "second measure (.csv or .json)");
  }
  ot->add_option("--t", t, "transport time")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*weakkam) return cmd_weakkam(common);
    if (*flowc) return cmd_flow(common);
    if (*schrod) return cmd_schrod(common, hbar);
    if (*wigner) return cmd_wigner(common, hbar);
    if (*measure) return cmd_measure(common, src, tgt);
    if (*ot) return cmd_ot(common, src, tgt, t);
    if (*thm1) return cmd_verify(common, 1);
    if (*thm2) return cmd_verify(common, 2);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
