// Command-line driver for the convergence experiments.
//
//   stmfem convergence [--config FILE] [--r 2] [--p 2] [--levels 0..4] ...
//   stmfem mesh --level 3 [--distortion 0.1 --seed 7] [--out mesh.txt]
//
// Exit codes: 0 success, 1 a level failed (stage printed), 2 bad usage/config,
// 3 output could not be written.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stmfem/harness.hpp"
#include "stmfem/mesh.hpp"

namespace {

constexpr int kExitRun = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

void print_summary(const stmfem::RunRecord& record) {
  stmfem::write_markdown(std::cout, record);
  std::cout << '\n';
  for (std::size_t i = 0; i < record.rows.size(); ++i) {
    const auto& d = record.diagnostics[i];
    std::printf("level %d: %.2f s, %d steps, %d step matrices, %d Krylov iterations, max residual %.2e\n",
                record.rows[i].level, d.wall_seconds, d.stats.steps, d.stats.step_matrices,
                d.stats.krylov_iterations, d.stats.max_residual);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time cGP(r)-MFEM(p) convergence experiments"};
  app.require_subcommand(1);

  // Flags are collected as strings and applied after the config file so that
  // they override it.
  auto* conv = app.add_subcommand("convergence", "Run a level sweep and write tables");
  conv->alias("run");
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> formats{"csv", "markdown", "plot-data"};
  conv->add_option("--config", config_path, "key=value config file");
  for (const char* key : {"r", "p", "levels", "distortion", "seed", "solver", "omega", "final-time",
                          "n-base", "out"}) {
    conv->add_option_function<std::string>(
        std::string("--") + key, [&overrides, key](const std::string& v) { overrides[key] = v; });
  }
  conv->add_flag_callback("--parallel-levels", [&overrides] { overrides["parallel-levels"] = "true"; },
                          "Run levels concurrently");
  conv->add_option("--format", formats, "Tables to write: csv, markdown, plot-data")
      ->delimiter(',');

  auto* mesh_cmd = app.add_subcommand("mesh", "Dump a (distorted) mesh as plain text");
  int mesh_level = 0;
  double mesh_distortion = 0.0;
  std::uint64_t mesh_seed = stmfem::ExperimentConfig{}.seed;
  std::string mesh_out;
  mesh_cmd->add_option("--level", mesh_level, "Refinement level")->required();
  mesh_cmd->add_option("--distortion", mesh_distortion, "Vertex movement factor");
  mesh_cmd->add_option("--seed", mesh_seed, "Base seed (combined with the level)");
  mesh_cmd->add_option("--out", mesh_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*mesh_cmd) {
    try {
      auto mesh = stmfem::unit_square_mesh(mesh_level);
      if (mesh_distortion > 0.0) {
        mesh = stmfem::distort(mesh, mesh_distortion, stmfem::level_seed(mesh_seed, mesh_level));
      }
      if (mesh_out.empty()) {
        stmfem::write_mesh(std::cout, mesh);
      } else {
        std::ofstream out(mesh_out);
        if (!out) {
          std::cerr << "error: cannot open " << mesh_out << " for writing\n";
          return kExitIo;
        }
        stmfem::write_mesh(out, mesh);
      }
    } catch (const std::exception& e) {
      std::cerr << "error: mesh: " << e.what() << '\n';
      return kExitUsage;
    }
    return 0;
  }

  stmfem::ExperimentConfig config;
  std::vector<stmfem::TableFormat> table_formats;
  try {
    if (!config_path.empty()) config = stmfem::load_config(std::filesystem::path(config_path));
    for (const auto& [key, value] : overrides) stmfem::apply_setting(config, key, value);
    config.validate();
    for (const auto& f : formats) table_formats.push_back(stmfem::parse_table_format(f));
  } catch (const std::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitUsage;
  }

  stmfem::RunRecord record;
  try {
    record = stmfem::run_convergence(config);
  } catch (const stmfem::HarnessError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRun;
  }

  print_summary(record);
  try {
    for (const auto& path : stmfem::emit_tables(record, config.out_dir, table_formats)) {
      std::cout << "wrote " << path.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: output: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
