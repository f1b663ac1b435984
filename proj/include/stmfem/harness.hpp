#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stmfem/mesh.hpp"
#include "stmfem/spaces.hpp"
#include "stmfem/timeloop.hpp"

namespace stmfem {

struct ExperimentConfig {
  int r = 2;
  int p = 2;
  int level_min = 0;
  int level_max = 4;
  int n_base = 10;  // intervals at level 0; level l uses n_base * 2^l
  double final_time = 1.0;
  double omega = 10.0 * std::numbers::pi;
  double distortion = 0.0;
  std::uint64_t seed = 20240611;
  SolverKind solver = SolverKind::Direct;
  std::string out_dir = ".";
  bool parallel_levels = false;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
  /// One "key=value" line per field, in a fixed order, doubles at full precision.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), without out_dir and parallel_levels (they do
  /// not change results).
  std::uint64_t hash() const;
};

/// Sets one field from its textual value. Keys match the CLI flag names
/// with '-' replaced by '_': r, p, levels, level_min, level_max, n_base,
/// final_time, omega, distortion, seed, solver, out, parallel_levels.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Reads "key = value" lines; blank lines and '#' comments are skipped.
/// Settings are applied on top of `base`.
ExperimentConfig load_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// "A..B" or a single level "A".
std::pair<int, int> parse_levels(const std::string& text);

/// Failure inside the level sweep, tagged with the level and pipeline stage.
class HarnessError : public std::runtime_error {
 public:
  HarnessError(int level, std::string stage, const std::string& what);
  int level() const { return level_; }
  const std::string& stage() const { return stage_; }

 private:
  int level_;
  std::string stage_;
};

struct LevelRow {
  int level = 0;
  int intervals = 0;
  double tau = 0.0;
  int cells = 0;
  double h = 0.0;
  int ndof = 0;  // spatial DoFs per temporal DoF
  double err_u = 0.0;
  std::optional<double> eoc_u;
  double err_q_V = 0.0;
  std::optional<double> eoc_q;
};

struct LevelDiagnostics {
  double wall_seconds = 0.0;
  SolverStats stats;
};

struct RunRecord {
  ExperimentConfig config;
  std::uint64_t config_hash = 0;
  std::vector<LevelRow> rows;               // ascending level
  std::vector<LevelDiagnostics> diagnostics;  // parallel to rows
};

/// Discretization columns (level, N, tau, cells, h, ndof) of one level;
/// the error columns are left at zero.
LevelRow table_row(const ExperimentConfig& config, int level, const QuadMesh& mesh,
                   const SpacePair& spaces);

/// Mesh, spaces, time loop and errors for every level of the config.
/// Throws HarnessError naming the level and stage on any failure.
RunRecord run_convergence(const ExperimentConfig& config);

/// Fills the EOC columns from the error columns.
void fill_eoc(std::vector<LevelRow>& rows);

/// Header "level,N,tau,cells,h,ndof,err_u,eoc_u,err_q_V,eoc_q"; reals in
/// %.4e, EOC in %.2f, empty EOC fields left blank.
void write_csv(std::ostream& os, const std::vector<LevelRow>& rows);
std::vector<LevelRow> read_csv(std::istream& is);
void write_markdown(std::ostream& os, const RunRecord& record);
/// Whitespace-separated "level h err_u err_q_V" for log-log plots.
void write_plot_data(std::ostream& os, const std::vector<LevelRow>& rows);

enum class TableFormat { Csv, Markdown, PlotData };
TableFormat parse_table_format(const std::string& name);

/// Writes convergence.{csv,md,dat} into `dir` (created if missing) and
/// returns the paths. I/O failures throw std::runtime_error with the path.
std::vector<std::filesystem::path> emit_tables(const RunRecord& record,
                                               const std::filesystem::path& dir,
                                               std::span<const TableFormat> formats);

}  // namespace stmfem
