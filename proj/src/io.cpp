#include "toruswkb/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>

namespace toruswkb {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) throw InvalidArgument("unknown configuration key '" + where + it.key() + "'");
  }
}

template <class T>
void get_to(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw InvalidArgument("configuration key '" + where + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  check_keys(j,
             {"dim", "mass", "potential", "weak_kam_points", "quantum_points", "classical_points",
              "weak_kam", "sigma0", "mask_margin", "mollifier_bandwidth", "amplitude_floor", "hbars",
              "times", "schrodinger_dt", "flow_step", "particles", "energy_hbar", "residuals",
              "transport", "theorem2", "seed", "output_dir"},
             "");
  get_to(j, "dim", c.dim, "");
  get_to(j, "mass", c.mass, "");
  if (j.contains("potential")) {
    const json& p = j.at("potential");
    check_keys(p, {"name", "amplitude", "amplitudes", "phases"}, "potential.");
    get_to(p, "name", c.potential.name, "potential.");
    get_to(p, "amplitude", c.potential.amplitude, "potential.");
    get_to(p, "amplitudes", c.potential.amplitudes, "potential.");
    get_to(p, "phases", c.potential.phases, "potential.");
  }
  get_to(j, "weak_kam_points", c.weak_kam_points, "");
  get_to(j, "quantum_points", c.quantum_points, "");
  get_to(j, "classical_points", c.classical_points, "");
  if (j.contains("weak_kam")) {
    const json& w = j.at("weak_kam");
    check_keys(w, {"dt", "max_iters", "tol", "winding_range", "tau"}, "weak_kam.");
    get_to(w, "dt", c.weak_kam.dt, "weak_kam.");
    get_to(w, "max_iters", c.weak_kam.max_iters, "weak_kam.");
    get_to(w, "tol", c.weak_kam.tol, "weak_kam.");
    get_to(w, "winding_range", c.weak_kam.winding_range, "weak_kam.");
    if (w.contains("tau") && !w.at("tau").is_null()) {
      double tau = 0.0;
      get_to(w, "tau", tau, "weak_kam.");
      c.weak_kam.tau = tau;
    }
  }
  if (j.contains("sigma0")) {
    const json& s = j.at("sigma0");
    check_keys(s, {"center", "radius", "file"}, "sigma0.");
    if (s.contains("center")) {
      std::vector<double> ctr;
      get_to(s, "center", ctr, "sigma0.");
      if (ctr.empty() || ctr.size() > 2) throw InvalidArgument("sigma0.center must have 1 or 2 entries");
      c.sigma0.center = {ctr[0], ctr.size() > 1 ? ctr[1] : 0.0};
    }
    get_to(s, "radius", c.sigma0.radius, "sigma0.");
    get_to(s, "file", c.sigma0.file, "sigma0.");
  }
  get_to(j, "mask_margin", c.mask_margin, "");
  get_to(j, "mollifier_bandwidth", c.mollifier_bandwidth, "");
  get_to(j, "amplitude_floor", c.amplitude_floor, "");
  get_to(j, "hbars", c.hbars, "");
  get_to(j, "times", c.times, "");
  get_to(j, "schrodinger_dt", c.schrodinger_dt, "");
  get_to(j, "flow_step", c.flow_step, "");
  get_to(j, "particles", c.particles, "");
  get_to(j, "energy_hbar", c.energy_hbar, "");
  if (j.contains("residuals")) {
    const json& r = j.at("residuals");
    check_keys(r, {"time_samples", "particles", "max_mode", "momentum_cutoff"}, "residuals.");
    get_to(r, "time_samples", c.residuals.time_samples, "residuals.");
    get_to(r, "particles", c.residuals.particles, "residuals.");
    get_to(r, "max_mode", c.residuals.max_mode, "residuals.");
    get_to(r, "momentum_cutoff", c.residuals.momentum_cutoff, "residuals.");
  }
  if (j.contains("transport")) {
    const json& t = j.at("transport");
    check_keys(t,
               {"atoms", "path_nodes", "winding_range", "convexity_samples", "convexity_targets",
                "convexity_times"},
               "transport.");
    get_to(t, "atoms", c.transport.atoms, "transport.");
    get_to(t, "path_nodes", c.transport.path_nodes, "transport.");
    get_to(t, "winding_range", c.transport.winding_range, "transport.");
    get_to(t, "convexity_samples", c.transport.convexity_samples, "transport.");
    get_to(t, "convexity_targets", c.transport.convexity_targets, "transport.");
    get_to(t, "convexity_times", c.transport.convexity_times, "transport.");
  }
  if (j.contains("theorem2")) {
    const json& t = j.at("theorem2");
    check_keys(t, {"levels", "particles_per_node", "cfl"}, "theorem2.");
    get_to(t, "levels", c.theorem2.levels, "theorem2.");
    get_to(t, "particles_per_node", c.theorem2.particles_per_node, "theorem2.");
    get_to(t, "cfl", c.theorem2.cfl, "theorem2.");
  }
  get_to(j, "seed", c.seed, "");
  get_to(j, "output_dir", c.output_dir, "");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open configuration file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed configuration " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["mass"] = c.mass;
  j["potential"] = {{"name", c.potential.name},
                    {"amplitude", c.potential.amplitude},
                    {"amplitudes", c.potential.amplitudes},
                    {"phases", c.potential.phases}};
  j["weak_kam_points"] = c.weak_kam_points;
  j["quantum_points"] = c.quantum_points;
  j["classical_points"] = c.classical_points;
  j["weak_kam"] = {{"dt", c.weak_kam.dt},
                   {"max_iters", c.weak_kam.max_iters},
                   {"tol", c.weak_kam.tol},
                   {"winding_range", c.weak_kam.winding_range},
                   {"tau", c.weak_kam.tau ? json(*c.weak_kam.tau) : json(nullptr)}};
  j["sigma0"] = {{"center", std::vector<double>(c.sigma0.center.begin(), c.sigma0.center.begin() + c.dim)},
                 {"radius", c.sigma0.radius},
                 {"file", c.sigma0.file}};
  j["mask_margin"] = c.mask_margin;
  j["mollifier_bandwidth"] = c.mollifier_bandwidth;
  j["amplitude_floor"] = c.amplitude_floor;
  j["hbars"] = c.hbars;
  j["times"] = c.times;
  j["schrodinger_dt"] = c.schrodinger_dt;
  j["flow_step"] = c.flow_step;
  j["particles"] = c.particles;
  j["energy_hbar"] = c.energy_hbar;
  j["residuals"] = {{"time_samples", c.residuals.time_samples},
                    {"particles", c.residuals.particles},
                    {"max_mode", c.residuals.max_mode},
                    {"momentum_cutoff", c.residuals.momentum_cutoff}};
  j["transport"] = {{"atoms", c.transport.atoms},
                    {"path_nodes", c.transport.path_nodes},
                    {"winding_range", c.transport.winding_range},
                    {"convexity_samples", c.transport.convexity_samples},
                    {"convexity_targets", c.transport.convexity_targets},
                    {"convexity_times", c.transport.convexity_times}};
  j["theorem2"] = {{"levels", c.theorem2.levels},
                   {"particles_per_node", c.theorem2.particles_per_node},
                   {"cfl", c.theorem2.cfl}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_particles_csv(std::ostream& os, const ParticleMeasure& mu) {
  os << (mu.dim == 2 ? "x,y,w\n" : "x,w\n");
  for (std::size_t i = 0; i < mu.size(); ++i) {
    os << fmt(mu.points[i][0]) << ',';
    if (mu.dim == 2) os << fmt(mu.points[i][1]) << ',';
    os << fmt(mu.weights[i]) << '\n';
  }
}

void write_phase_particles_csv(std::ostream& os, const PhaseParticleMeasure& omega) {
  os << (omega.dim == 2 ? "x,y,px,py,w\n" : "x,p,w\n");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const PhasePoint& z = omega.points[i];
    if (omega.dim == 2)
      os << fmt(z.x[0]) << ',' << fmt(z.x[1]) << ',' << fmt(z.p[0]) << ',' << fmt(z.p[1]) << ',';
    else
      os << fmt(z.x[0]) << ',' << fmt(z.p[0]) << ',';
    os << fmt(omega.weights[i]) << '\n';
  }
}

void write_grid_measure_csv(std::ostream& os, const GridMeasure& mu) {
  write_field_csv(os, ScalarField(mu.grid, mu.density), "density");
}

void write_matrix_csv(std::ostream& os, const DenseMatrix& m) {
  os << "i,j,value\n";
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) os << i << ',' << j << ',' << fmt(m(i, j)) << '\n';
}

json particles_to_json(const ParticleMeasure& mu) {
  json pts = json::array();
  for (const Point& p : mu.points)
    pts.push_back(mu.dim == 2 ? json::array({p[0], p[1]}) : json::array({p[0]}));
  return {{"dim", mu.dim}, {"points", pts}, {"weights", mu.weights}};
}

ParticleMeasure particles_from_json(const json& j) {
  check_keys(j, {"dim", "points", "weights"}, "measure.");
  ParticleMeasure mu;
  try {
    mu.dim = j.at("dim").get<int>();
    for (const auto& p : j.at("points")) {
      const auto v = p.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != mu.dim) throw DimensionError("point of wrong dimension in measure");
      mu.points.push_back({v[0], mu.dim == 2 ? v[1] : 0.0});
    }
    mu.weights = j.at("weights").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed measure: ") + e.what());
  }
  mu.validate();
  return mu;
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, std::size_t& columns,
                                                  std::vector<std::string>* header = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path.string() + " is empty");
  columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (header) {
    header->clear();
    std::stringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) header->push_back(name);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument(path.string() + ": non-numeric cell '" + cell + "'");
      }
    }
    if (row.size() != columns) throw InvalidArgument(path.string() + ": ragged row");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ParticleMeasure read_particles(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw InvalidArgument("malformed measure " + path.string() + ": " + e.what());
    }
    return particles_from_json(j);
  }
  // columns by name; momentum columns of phase particles are dropped
  std::size_t cols = 0;
  std::vector<std::string> header;
  const auto rows = read_numeric_csv(path, cols, &header);
  const auto column = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const std::size_t ix = column("x"), iy = column("y"), iw = column("w");
  if (ix == cols || iw == cols) throw InvalidArgument(path.string() + ": expected columns x[,y][,p...],w");
  ParticleMeasure mu;
  mu.dim = iy == cols ? 1 : 2;
  for (const auto& r : rows) {
    mu.points.push_back({r[ix], mu.dim == 2 ? r[iy] : 0.0});
    mu.weights.push_back(r[iw]);
  }
  mu.validate();
  return mu;
}

GridMeasure read_grid_measure_csv(const std::filesystem::path& path) {
  std::size_t cols = 0;
  const auto rows = read_numeric_csv(path, cols);
  if (cols != 2 && cols != 3) throw InvalidArgument(path.string() + ": expected columns x[,y],density");
  const int dim = static_cast<int>(cols) - 1;
  const double side = dim == 1 ? static_cast<double>(rows.size()) : std::sqrt(static_cast<double>(rows.size()));
  const int n = static_cast<int>(std::lround(side));
  if (dim == 2 && static_cast<std::size_t>(n) * n != rows.size())
    throw InvalidArgument(path.string() + ": row count is not a square");
  GridMeasure mu{make_grid(dim, n), {}};
  for (const auto& r : rows) mu.density.push_back(r.back());
  mu.validate();
  return mu;
}

}  // namespace toruswkb
