#pragma once

// JSON configuration and CSV / JSON serialization of measures and fields.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "toruswkb/measures.hpp"
#include "toruswkb/pipeline.hpp"

namespace toruswkb {

/// Parses a configuration object. Missing keys keep their defaults; unknown
/// keys raise InvalidArgument naming the offending path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

// CSV layouts: x[,y],w for particles; x[,y],p[,py],w for phase particles;
// x[,y],density for grid measures. One header line.
void write_particles_csv(std::ostream& os, const ParticleMeasure& mu);
void write_phase_particles_csv(std::ostream& os, const PhaseParticleMeasure& omega);
void write_grid_measure_csv(std::ostream& os, const GridMeasure& mu);
void write_matrix_csv(std::ostream& os, const DenseMatrix& m);

nlohmann::json particles_to_json(const ParticleMeasure& mu);
ParticleMeasure particles_from_json(const nlohmann::json& j);

/// Reads a particle measure from .csv or .json; the dimension is inferred.
ParticleMeasure read_particles(const std::filesystem::path& path);

/// Reads a grid density written by write_grid_measure_csv; the grid is
/// inferred from the row count and column count.
GridMeasure read_grid_measure_csv(const std::filesystem::path& path);

}  // namespace toruswkb
