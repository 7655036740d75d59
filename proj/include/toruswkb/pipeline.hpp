#pragma once

// Experiment orchestration: the Theorem 1 pipeline (weak KAM solution, WKB
// data, classical and quantum tracks, transport optimality) and the Theorem 2
// cross-solver study, with their verification report.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "toruswkb/hamiltonian.hpp"
#include "toruswkb/measures.hpp"
#include "toruswkb/schrodinger.hpp"
#include "toruswkb/transport.hpp"
#include "toruswkb/weak_kam.hpp"
#include "toruswkb/wigner.hpp"

namespace toruswkb {

struct PotentialSpec {
  /// "zero", "cosine" or "two-mode".
  std::string name = "cosine";
  double amplitude = 1.0;
  std::array<double, 2> amplitudes{1.0, 0.0};
  std::array<double, 2> phases{0.0, 0.0};

  Potential build(const TorusGrid& grid) const;
};

struct Sigma0Spec {
  /// Centre and support radius of the C-infinity bump.
  Point center{kPi, 0.0};
  double radius = 0.5;
  /// Optional CSV density file (columns x[,y],density) on the quantum grid.
  std::string file;
};

struct ResidualSpec {
  int time_samples = 64;
  int particles = 4096;
  int max_mode = 3;
  double momentum_cutoff = 0.0;  // 0: battery radius + 1
};

struct TransportSpec {
  int atoms = 48;
  int path_nodes = 64;
  int winding_range = 1;
  int convexity_samples = 32;
  int convexity_targets = 128;
  std::vector<double> convexity_times{0.5, 1.0};
};

struct Theorem2Spec {
  std::vector<int> levels{256, 512, 1024};
  /// Particles per grid node at every level.
  int particles_per_node = 4;
  double cfl = 0.5;
};

struct ExperimentConfig {
  int dim = 1;
  double mass = 1.0;
  PotentialSpec potential;
  /// Grid of the Lax-Oleinik solve.
  int weak_kam_points = 4096;
  /// Grid of the wave functions.
  int quantum_points = 4096;
  /// Grid of the reference classical density and the c-convexity check.
  int classical_points = 1024;
  /// Lax-Oleinik settings; the step is longer than the library default.
  LaxOleinikConfig weak_kam = [] {
    LaxOleinikConfig c;
    c.dt = 0.1;
    return c;
  }();
  Sigma0Spec sigma0;
  /// Nodes of the quantum grid trimmed around the cut locus.
  int mask_margin = 24;
  double mollifier_bandwidth = 0.02;
  double amplitude_floor = 0.0;
  std::vector<double> hbars{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
  double schrodinger_dt = 1e-3;
  double flow_step = 1e-3;
  int particles = 4096;
  /// hbar at which the energy drift is measured.
  double energy_hbar = 1.0 / 32;
  ResidualSpec residuals;
  TransportSpec transport;
  Theorem2Spec theorem2;
  std::uint64_t seed = 20240601;
  std::string output_dir = "out";

  void validate() const;
};

struct Metric {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  /// "<=", ">=" or "info".
  std::string relation = "<=";
  bool passed = true;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool enabled = true;
  bool passed = false;
  std::vector<Metric> metrics;
  std::string note;
};

/// Long-format table; every reported number lives in one of these.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

std::string fmt(double v);

struct VerificationReport {
  std::string pipeline;
  std::vector<CriterionResult> criteria;
  std::vector<Table> tables;
  std::vector<std::string> stages;
  std::vector<std::string> notes;
  /// Set when a stage threw; the report then holds the stages completed.
  std::string failure;

  bool all_passed() const;
  CriterionResult* find(int id);
  const CriterionResult* find(int id) const;
  Table& table(const std::string& name, const std::vector<std::string>& columns);
};

/// Progress sink; receives one line per finished stage.
using ProgressLog = std::function<void(const std::string&)>;

VerificationReport run_theorem1(const ExperimentConfig& cfg, const ProgressLog& log = {});
VerificationReport run_theorem2(const ExperimentConfig& cfg, const ProgressLog& log = {});

/// Writes manifest.json and one CSV per table into dir (created when
/// missing). Returns the manifest hash.
std::string emit_artifacts(const VerificationReport& report, const ExperimentConfig& cfg,
                           const std::filesystem::path& dir);

// --- shared building blocks (also used by the CLI) --------------------------

/// Bump density of the config on the given grid (unit mass).
GridMeasure initial_density(const ExperimentConfig& cfg, const TorusGrid& grid);

/// Weak KAM solve on the configured grid.
WeakKamSolution solve_configured(const ExperimentConfig& cfg, const Potential& V);

/// Injects a solution onto a coarser grid whose size divides the fine one.
/// A coarse node is in the mask when the fine nodes of its two neighbouring
/// fine cells are.
WeakKamSolution restrict_solution(const WeakKamSolution& S, const TorusGrid& coarse, const Potential& V);

/// Brings a solution onto `grid` by refinement, restriction or identity.
WeakKamSolution transfer_solution(const WeakKamSolution& S, const TorusGrid& grid, const Potential& V);

/// sup over mask nodes away from the cut locus of ||grad S| - |p_exact(x)||
/// for the closed-form cosine / zero cases; nullopt otherwise.
std::optional<double> closed_form_gradient_error(const WeakKamSolution& S, const PotentialSpec& spec,
                                                 double mass, int band_nodes);

}  // namespace toruswkb
