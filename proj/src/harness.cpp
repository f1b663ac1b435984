#include "stmfem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>

#include "stmfem/mms.hpp"

namespace stmfem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument(key + ": not an integer: '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument(key + ": not a number: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": not a boolean: '" + v + "'");
}

std::string format(const char* fmt, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct LevelOutput {
  LevelRow row;
  LevelDiagnostics diag;
};

LevelOutput run_level(const ExperimentConfig& cfg, int level) {
  using clock = std::chrono::steady_clock;
  const auto t_begin = clock::now();
  std::string stage = "mesh";
  try {
    auto mesh = std::make_shared<QuadMesh>(unit_square_mesh(level));
    if (cfg.distortion > 0.0) {
      stage = "distort";
      *mesh = distort(*mesh, cfg.distortion, level_seed(cfg.seed, level));
    }
    stage = "spaces";
    auto spaces = std::make_shared<const SpacePair>(build_pair(mesh, cfg.p));

    stage = "timeloop";
    const auto mms = mms_standard(CoefficientField::constant(1.0), cfg.omega);
    const int intervals = cfg.n_base << level;
    RunOptions opts;
    opts.solver = cfg.solver;
    const auto solution = run(mms.problem(cfg.final_time), spaces,
                              TimePartition::uniform(cfg.final_time, intervals), cfg.r, opts);

    stage = "errors";
    const auto errors = compute_errors(solution, mms);

    LevelOutput out;
    out.row = table_row(cfg, level, *mesh, *spaces);
    out.row.err_u = errors.u;
    out.row.err_q_V = errors.q_V();
    out.diag.stats = solution.stats;
    out.diag.wall_seconds = std::chrono::duration<double>(clock::now() - t_begin).count();
    return out;
  } catch (const HarnessError&) {
    throw;
  } catch (const std::exception& e) {
    throw HarnessError(level, stage, e.what());
  }
}

}  // namespace

LevelRow table_row(const ExperimentConfig& config, int level, const QuadMesh& mesh,
                   const SpacePair& spaces) {
  LevelRow row;
  row.level = level;
  row.intervals = config.n_base << level;
  row.tau = config.final_time / row.intervals;
  row.cells = mesh.num_cells();
  row.h = h_max(mesh);
  row.ndof = spaces.total_dofs();
  return row;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (r < 1 || r > kMaxTimeDegree) fail("r must lie in [1, " + std::to_string(kMaxTimeDegree) + "]");
  if (p < 0 || p > kMaxSpaceDegree) fail("p must lie in [0, " + std::to_string(kMaxSpaceDegree) + "]");
  if (level_min < 0 || level_max > kMaxMeshLevel || level_min > level_max) {
    fail("levels must satisfy 0 <= min <= max <= " + std::to_string(kMaxMeshLevel));
  }
  if (n_base < 1) fail("n_base must be positive");
  if (!(final_time > 0.0)) fail("final_time must be positive");
  if (!std::isfinite(omega)) fail("omega must be finite");
  if (!(distortion >= 0.0 && distortion < 0.5)) fail("distortion must lie in [0, 0.5)");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "r=" << r << '\n'
     << "p=" << p << '\n'
     << "level_min=" << level_min << '\n'
     << "level_max=" << level_max << '\n'
     << "n_base=" << n_base << '\n'
     << "final_time=" << format("%.17g", final_time) << '\n'
     << "omega=" << format("%.17g", omega) << '\n'
     << "distortion=" << format("%.17g", distortion) << '\n'
     << "seed=" << seed << '\n'
     << "solver=" << to_string(solver) << '\n';
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw_value);
  if (key == "r") {
    c.r = to_int(key, v);
  } else if (key == "p") {
    c.p = to_int(key, v);
  } else if (key == "levels") {
    std::tie(c.level_min, c.level_max) = parse_levels(v);
  } else if (key == "level_min") {
    c.level_min = to_int(key, v);
  } else if (key == "level_max") {
    c.level_max = to_int(key, v);
  } else if (key == "n_base") {
    c.n_base = to_int(key, v);
  } else if (key == "final_time") {
    c.final_time = to_double(key, v);
  } else if (key == "omega") {
    c.omega = to_double(key, v);
  } else if (key == "distortion") {
    c.distortion = to_double(key, v);
  } else if (key == "seed") {
    std::size_t used = 0;
    try {
      c.seed = std::stoull(v, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || v.front() == '-') {
      throw std::invalid_argument("seed: not an unsigned integer: '" + v + "'");
    }
  } else if (key == "solver") {
    c.solver = parse_solver_kind(v);
  } else if (key == "out" || key == "out_dir") {
    c.out_dir = v;
  } else if (key == "parallel_levels") {
    c.parallel_levels = to_bool(key, v);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

ExperimentConfig load_config(std::istream& is, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return load_config(in, std::move(base));
}

std::pair<int, int> parse_levels(const std::string& raw) {
  const std::string text = trim(raw);
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const int l = to_int("levels", text);
    return {l, l};
  }
  return {to_int("levels", trim(text.substr(0, dots))), to_int("levels", trim(text.substr(dots + 2)))};
}

HarnessError::HarnessError(int level, std::string stage, const std::string& what)
    : std::runtime_error("level " + std::to_string(level) + ", stage " + stage + ": " + what),
      level_(level),
      stage_(std::move(stage)) {}

void fill_eoc(std::vector<LevelRow>& rows) {
  for (auto& row : rows) {
    row.eoc_u.reset();
    row.eoc_q.reset();
  }
  if (rows.size() < 2) return;
  std::vector<double> eu, eq;
  for (const auto& row : rows) {
    eu.push_back(row.err_u);
    eq.push_back(row.err_q_V);
  }
  const auto ou = eoc(eu);
  const auto oq = eoc(eq);
  for (std::size_t l = 0; l < rows.size(); ++l) {
    rows[l].eoc_u = ou[l];
    rows[l].eoc_q = oq[l];
  }
}

RunRecord run_convergence(const ExperimentConfig& config) {
  config.validate();
  RunRecord record;
  record.config = config;
  record.config_hash = config.hash();

  std::vector<LevelOutput> outputs;
  if (config.parallel_levels) {
    std::vector<std::future<LevelOutput>> jobs;
    for (int l = config.level_min; l <= config.level_max; ++l) {
      jobs.push_back(std::async(std::launch::async, run_level, std::cref(config), l));
    }
    for (auto& job : jobs) outputs.push_back(job.get());
  } else {
    for (int l = config.level_min; l <= config.level_max; ++l) outputs.push_back(run_level(config, l));
  }
  for (auto& out : outputs) {
    record.rows.push_back(out.row);
    record.diagnostics.push_back(out.diag);
  }
  fill_eoc(record.rows);
  return record;
}

void write_csv(std::ostream& os, const std::vector<LevelRow>& rows) {
  os << "level,N,tau,cells,h,ndof,err_u,eoc_u,err_q_V,eoc_q\n";
  auto eoc_field = [](const std::optional<double>& e) { return e ? format("%.2f", *e) : std::string(); };
  for (const auto& row : rows) {
    os << row.level << ',' << row.intervals << ',' << format("%.4e", row.tau) << ',' << row.cells
       << ',' << format("%.4e", row.h) << ',' << row.ndof << ',' << format("%.4e", row.err_u) << ','
       << eoc_field(row.eoc_u) << ',' << format("%.4e", row.err_q_V) << ','
       << eoc_field(row.eoc_q) << '\n';
  }
}

std::vector<LevelRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "level,N,tau,cells,h,ndof,err_u,eoc_u,err_q_V,eoc_q") {
    throw std::invalid_argument("read_csv: missing or unexpected header");
  }
  std::vector<LevelRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() == 9 && line.back() == ',') f.emplace_back();
    if (f.size() != 10) {
      throw std::invalid_argument("read_csv: line " + std::to_string(lineno) + " has " +
                                  std::to_string(f.size()) + " fields");
    }
    auto opt = [&](const std::string& s) -> std::optional<double> {
      if (trim(s).empty()) return std::nullopt;
      return to_double("eoc", trim(s));
    };
    LevelRow row;
    row.level = to_int("level", f[0]);
    row.intervals = to_int("N", f[1]);
    row.tau = to_double("tau", f[2]);
    row.cells = to_int("cells", f[3]);
    row.h = to_double("h", f[4]);
    row.ndof = to_int("ndof", f[5]);
    row.err_u = to_double("err_u", f[6]);
    row.eoc_u = opt(f[7]);
    row.err_q_V = to_double("err_q_V", f[8]);
    row.eoc_q = opt(f[9]);
    rows.push_back(row);
  }
  return rows;
}

void write_markdown(std::ostream& os, const RunRecord& record) {
  const auto& c = record.config;
  os << "cGP(" << c.r << ")-MFEM(" << c.p << "), distortion " << format("%g", 100.0 * c.distortion)
     << "%, seed " << c.seed << ", solver " << to_string(c.solver) << ", config " << hex(record.config_hash)
     << "\n\n";
  os << "| Level | N | tau_n | cells | h | N_DoF |\n|---|---|---|---|---|---|\n";
  for (const auto& row : record.rows) {
    os << "| " << row.level << " | " << row.intervals << " | " << format("%.3e", row.tau) << " | "
       << row.cells << " | " << format("%.4e", row.h) << " | " << row.ndof << " |\n";
  }
  auto eoc_cell = [](const std::optional<double>& e) { return e ? format("%.2f", *e) : std::string("---"); };
  os << "\n| Level | e_u L2(I;L2) | EOC | e_q L2(I;V) | EOC |\n|---|---|---|---|---|\n";
  for (const auto& row : record.rows) {
    os << "| " << row.level << " | " << format("%.4e", row.err_u) << " | " << eoc_cell(row.eoc_u)
       << " | " << format("%.4e", row.err_q_V) << " | " << eoc_cell(row.eoc_q) << " |\n";
  }
}

void write_plot_data(std::ostream& os, const std::vector<LevelRow>& rows) {
  os << "# level h err_u err_q_V\n";
  for (const auto& row : rows) {
    os << row.level << ' ' << format("%.17g", row.h) << ' ' << format("%.17g", row.err_u) << ' '
       << format("%.17g", row.err_q_V) << '\n';
  }
}

TableFormat parse_table_format(const std::string& name) {
  if (name == "csv") return TableFormat::Csv;
  if (name == "markdown" || name == "md") return TableFormat::Markdown;
  if (name == "plot-data" || name == "plot") return TableFormat::PlotData;
  throw std::invalid_argument("unknown table format '" + name + "' (csv, markdown, plot-data)");
}

std::vector<std::filesystem::path> emit_tables(const RunRecord& record,
                                               const std::filesystem::path& dir,
                                               std::span<const TableFormat> formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto fmt : formats) {
    const char* name = fmt == TableFormat::Csv ? "convergence.csv"
                       : fmt == TableFormat::Markdown ? "convergence.md"
                                                      : "convergence.dat";
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    switch (fmt) {
      case TableFormat::Csv: write_csv(out, record.rows); break;
      case TableFormat::Markdown: write_markdown(out, record); break;
      case TableFormat::PlotData: write_plot_data(out, record.rows); break;
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace stmfem
