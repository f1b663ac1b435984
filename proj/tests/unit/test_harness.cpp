#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "stmfem/harness.hpp"

using namespace stmfem;

TEST(Config, DefaultsAndValidation) {
  const ExperimentConfig c;
  EXPECT_EQ(c.r, 2);
  EXPECT_EQ(c.p, 2);
  EXPECT_EQ(c.level_min, 0);
  EXPECT_EQ(c.level_max, 4);
  EXPECT_EQ(c.n_base, 10);
  EXPECT_DOUBLE_EQ(c.omega, 10 * std::numbers::pi);
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.level_min = 3;
  bad.level_max = 2;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.distortion = 0.6;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.r = 6;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Config, FileThenOverrides) {
  std::istringstream file(
      "# sweep\n"
      "r = 1\n"
      "levels = 1..3\n"
      "distortion=0.05   # five percent\n"
      "seed = 0x10\n"
      "solver = schur\n"
      "\n");
  auto c = load_config(file);
  EXPECT_EQ(c.r, 1);
  EXPECT_EQ(c.level_min, 1);
  EXPECT_EQ(c.level_max, 3);
  EXPECT_DOUBLE_EQ(c.distortion, 0.05);
  EXPECT_EQ(c.seed, 16u);
  EXPECT_EQ(c.solver, SolverKind::Schur);
  apply_setting(c, "final-time", "0.5");
  apply_setting(c, "levels", "2");
  EXPECT_DOUBLE_EQ(c.final_time, 0.5);
  EXPECT_EQ(c.level_min, 2);
  EXPECT_EQ(c.level_max, 2);

  std::istringstream unknown("colour = blue\n");
  EXPECT_THROW(load_config(unknown), std::invalid_argument);
  std::istringstream malformed("r 2\n");
  EXPECT_THROW(load_config(malformed), std::invalid_argument);
  EXPECT_THROW(apply_setting(c, "r", "two"), std::invalid_argument);
  EXPECT_THROW(apply_setting(c, "seed", "-1"), std::invalid_argument);
  EXPECT_THROW(load_config(std::filesystem::path("/nonexistent/stmfem.cfg")), std::runtime_error);
}

TEST(Config, HashTracksResultFieldsOnly) {
  ExperimentConfig a;
  ExperimentConfig b;
  EXPECT_EQ(a.hash(), b.hash());
  b.out_dir = "/tmp/elsewhere";
  b.parallel_levels = true;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed += 1;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Levels, Parse) {
  EXPECT_EQ(parse_levels("0..4"), std::make_pair(0, 4));
  EXPECT_EQ(parse_levels(" 2 .. 5 "), std::make_pair(2, 5));
  EXPECT_EQ(parse_levels("3"), std::make_pair(3, 3));
  EXPECT_THROW(parse_levels("a..b"), std::invalid_argument);
}

TEST(Convergence, TableOneColumns) {
  const ExperimentConfig c;
  const int n[] = {10, 20, 40, 80, 160, 320};
  const int cells[] = {1, 4, 16, 64, 256, 1024};
  const double h[] = {1.4142, 7.0711e-01, 3.5355e-01, 1.7678e-01, 8.8388e-02, 4.4194e-02};
  const int ndof[] = {33, 120, 456, 1776, 7008, 27840};
  for (int level = 0; level <= 5; ++level) {
    auto mesh = std::make_shared<const QuadMesh>(unit_square_mesh(level));
    const auto row = table_row(c, level, *mesh, build_pair(mesh, c.p));
    EXPECT_EQ(row.intervals, n[level]);
    EXPECT_NEAR(row.tau, 0.1 / (1 << level), 1e-17);
    EXPECT_EQ(row.cells, cells[level]);
    EXPECT_NEAR(row.h, h[level], 5e-5 * h[level]);
    EXPECT_EQ(row.ndof, ndof[level]);
  }
}

TEST(Convergence, SingleLevelHasNoEoc) {
  ExperimentConfig c;
  c.level_min = c.level_max = 0;
  const auto rec = run_convergence(c);
  ASSERT_EQ(rec.rows.size(), 1u);
  EXPECT_FALSE(rec.rows[0].eoc_u.has_value());
  EXPECT_FALSE(rec.rows[0].eoc_q.has_value());
  EXPECT_EQ(rec.config_hash, c.hash());
  EXPECT_EQ(rec.diagnostics[0].stats.steps, 10);
}

TEST(Convergence, RerunIsBitwiseIdentical) {
  ExperimentConfig c;
  c.level_max = 2;
  c.distortion = 0.1;
  const auto a = run_convergence(c);
  const auto b = run_convergence(c);
  c.parallel_levels = true;
  const auto p = run_convergence(c);
  ASSERT_EQ(a.rows.size(), 3u);
  for (std::size_t l = 0; l < a.rows.size(); ++l) {
    EXPECT_EQ(a.rows[l].err_u, b.rows[l].err_u);
    EXPECT_EQ(a.rows[l].err_q_V, b.rows[l].err_q_V);
    EXPECT_EQ(a.rows[l].h, b.rows[l].h);
    EXPECT_EQ(a.rows[l].err_u, p.rows[l].err_u);
    EXPECT_EQ(a.rows[l].err_q_V, p.rows[l].err_q_V);
  }
}

TEST(Convergence, StageNamedOnFailure) {
  const HarnessError e(3, "timeloop", "solver diverged");
  EXPECT_EQ(e.level(), 3);
  EXPECT_EQ(e.stage(), "timeloop");
  EXPECT_NE(std::string(e.what()).find("level 3"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("timeloop"), std::string::npos);
  ExperimentConfig bad;
  bad.p = 7;
  EXPECT_THROW(run_convergence(bad), std::invalid_argument);
}

TEST(Tables, CsvRoundTrip) {
  ExperimentConfig c;
  c.level_max = 2;
  const auto rec = run_convergence(c);
  std::ostringstream os;
  write_csv(os, rec.rows);
  std::istringstream is(os.str());
  const auto back = read_csv(is);
  ASSERT_EQ(back.size(), rec.rows.size());
  for (std::size_t l = 0; l < back.size(); ++l) {
    const auto& a = rec.rows[l];
    const auto& b = back[l];
    EXPECT_EQ(a.level, b.level);
    EXPECT_EQ(a.intervals, b.intervals);
    EXPECT_EQ(a.cells, b.cells);
    EXPECT_EQ(a.ndof, b.ndof);
    // Five significant digits in the file.
    EXPECT_NEAR(a.tau, b.tau, 5e-5 * a.tau);
    EXPECT_NEAR(a.h, b.h, 5e-5 * a.h);
    EXPECT_NEAR(a.err_u, b.err_u, 5e-5 * a.err_u);
    EXPECT_NEAR(a.err_q_V, b.err_q_V, 5e-5 * a.err_q_V);
    EXPECT_EQ(a.eoc_u.has_value(), b.eoc_u.has_value());
    if (a.eoc_u) EXPECT_NEAR(*a.eoc_u, *b.eoc_u, 5e-3);
    if (a.eoc_q) EXPECT_NEAR(*a.eoc_q, *b.eoc_q, 5e-3);
  }
  std::ostringstream again;
  write_csv(again, back);
  std::istringstream is2(again.str());
  std::ostringstream third;
  write_csv(third, read_csv(is2));
  EXPECT_EQ(again.str(), third.str());

  std::istringstream bad_header("level,N\n");
  EXPECT_THROW(read_csv(bad_header), std::invalid_argument);
}

TEST(Tables, PlotSlopesEqualEoc) {
  ExperimentConfig c;
  c.level_max = 3;
  const auto rec = run_convergence(c);
  std::ostringstream os;
  write_plot_data(os, rec.rows);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  std::vector<std::array<double, 3>> pts;
  int level;
  double h, eu, eq;
  while (is >> level >> h >> eu >> eq) pts.push_back({h, eu, eq});
  ASSERT_EQ(pts.size(), 4u);
  for (std::size_t l = 1; l < pts.size(); ++l) {
    const double dh = std::log(pts[l - 1][0] / pts[l][0]);
    EXPECT_NEAR(std::log(pts[l - 1][1] / pts[l][1]) / dh, *rec.rows[l].eoc_u, 1e-12);
    EXPECT_NEAR(std::log(pts[l - 1][2] / pts[l][2]) / dh, *rec.rows[l].eoc_q, 1e-12);
  }
}

TEST(Tables, EmitWritesFilesAndReportsPath) {
  ExperimentConfig c;
  c.level_max = 1;
  const auto rec = run_convergence(c);
  const auto dir = std::filesystem::temp_directory_path() / "stmfem_harness_test";
  std::filesystem::remove_all(dir);
  const TableFormat all[] = {TableFormat::Csv, TableFormat::Markdown, TableFormat::PlotData};
  const auto paths = emit_tables(rec, dir, all);
  ASSERT_EQ(paths.size(), 3u);
  for (const auto& p : paths) EXPECT_GT(std::filesystem::file_size(p), 0u);
  std::ifstream md(dir / "convergence.md");
  std::stringstream text;
  text << md.rdbuf();
  EXPECT_NE(text.str().find("| 1 | 20 | 5.000e-02 | 4 |"), std::string::npos);
  std::filesystem::remove_all(dir);

  try {
    emit_tables(rec, "/proc/stmfem/forbidden", all);
    FAIL() << "expected an I/O error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/proc/stmfem/forbidden"), std::string::npos);
  }
  EXPECT_EQ(parse_table_format("markdown"), TableFormat::Markdown);
  EXPECT_THROW(parse_table_format("xlsx"), std::invalid_argument);
}
