#pragma once

#include <atomic>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "scaledgd/models.hpp"
#include "scaledgd/solvers_matrix.hpp"
#include "scaledgd/solvers_tensor.hpp"

namespace scaledgd {

// ---------------------------------------------------------------------------
// number formatting: shortest round-trip decimals
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline double parse_double_token(std::string_view tok, const std::string& where) {
  // trim surrounding whitespace; accept an explicit leading '+'
  std::size_t b = 0, e = tok.size();
  while (b < e && (tok[b] == ' ' || tok[b] == '\t' || tok[b] == '\r')) ++b;
  while (e > b && (tok[e - 1] == ' ' || tok[e - 1] == '\t' || tok[e - 1] == '\r')) --e;
  if (b < e && tok[b] == '+') ++b;
  double v = 0.0;
  const auto res = std::from_chars(tok.data() + b, tok.data() + e, v);
  if (res.ec != std::errc() || res.ptr != tok.data() + e || b == e)
    throw ParseError(where + ": not a number: \"" + std::string(tok) + "\"");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string chop_trailing_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// trace CSV
// ---------------------------------------------------------------------------

inline void write_trace(const std::string& path, const ConvergenceTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open trace file for writing: " + path);
  out << "t,rel_error_fro,rel_error_inf,wall_time_s,event\n";
  for (const IterRecord& r : trace.iterations) {
    out << r.t << ',' << format_double(r.rel_error_fro) << ',' << format_double(r.rel_error_inf)
        << ',' << format_double(r.wall_time_s) << ',' << r.event << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline ConvergenceTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty trace file (missing header)");
  line = detail::chop_trailing_cr(line);
  if (line != "t,rel_error_fro,rel_error_inf,wall_time_s,event")
    throw ParseError(path + ": unexpected trace header: \"" + line + "\"");
  ConvergenceTrace trace;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chop_trailing_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 5)
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    const std::string where = path + ": line " + std::to_string(lineno);
    IterRecord r;
    r.t = static_cast<int>(detail::parse_double_token(fields[0], where));
    r.rel_error_fro = detail::parse_double_token(fields[1], where);
    r.rel_error_inf = detail::parse_double_token(fields[2], where);
    r.wall_time_s = detail::parse_double_token(fields[3], where);
    r.event = std::string(fields[4]);
    trace.iterations.push_back(std::move(r));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// dense CSV import/export
// ---------------------------------------------------------------------------

inline void export_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Matrix ingest_matrix_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  std::size_t ncols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chop_trailing_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (ncols == 0) {
      ncols = fields.size();
    } else if (fields.size() != ncols) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(ncols) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string where =
          path + ": line " + std::to_string(lineno) + ", column " + std::to_string(c + 1);
      const double v = detail::parse_double_token(fields[c], where);
      if (!std::isfinite(v)) throw ParseError(where + ": non-finite value");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(ncols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

// Tensors travel as their mode-1 matricization behind a header line with dims.
inline void export_tensor_csv(const std::string& path, const Tensor3& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << "dims," << t.n1() << ',' << t.n2() << ',' << t.n3() << '\n';
  const Matrix m1 = matricize(t, 1);
  for (Index i = 0; i < m1.rows(); ++i) {
    for (Index j = 0; j < m1.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m1(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Tensor3 ingest_tensor_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty tensor file");
  header = detail::chop_trailing_cr(header);
  const auto hf = detail::split_csv_line(header);
  if (hf.size() != 4 || hf[0] != "dims")
    throw ParseError(path + ": line 1: expected header \"dims,n1,n2,n3\"");
  Index dims[3];
  for (int k = 0; k < 3; ++k) {
    const double v = detail::parse_double_token(hf[static_cast<std::size_t>(k + 1)],
                                                path + ": line 1");
    if (v < 1 || v != std::floor(v)) throw ParseError(path + ": line 1: bad dimension");
    dims[k] = static_cast<Index>(v);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chop_trailing_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (static_cast<Index>(fields.size()) != dims[1] * dims[2])
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(dims[1] * dims[2]) + " fields, got " +
                       std::to_string(fields.size()));
    std::vector<double> row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string where =
          path + ": line " + std::to_string(lineno) + ", column " + std::to_string(c + 1);
      row.push_back(detail::parse_double_token(fields[c], where));
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<Index>(rows.size()) != dims[0])
    throw ParseError(path + ": expected " + std::to_string(dims[0]) + " data rows, got " +
                     std::to_string(rows.size()));
  Matrix m1(dims[0], dims[1] * dims[2]);
  for (Index i = 0; i < m1.rows(); ++i)
    for (Index j = 0; j < m1.cols(); ++j)
      m1(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return tensorize(m1, 1, dims[0], dims[1], dims[2]);
}

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

enum class ProblemKind {
  matrix_sensing,
  matrix_rpca,
  matrix_completion,
  scaledgd_lambda,
  tensor_sensing,
  tensor_rpca,
  tensor_completion,
};

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::matrix_sensing: return "matrix_sensing";
    case ProblemKind::matrix_rpca: return "matrix_rpca";
    case ProblemKind::matrix_completion: return "matrix_completion";
    case ProblemKind::scaledgd_lambda: return "scaledgd_lambda";
    case ProblemKind::tensor_sensing: return "tensor_sensing";
    case ProblemKind::tensor_rpca: return "tensor_rpca";
    case ProblemKind::tensor_completion: return "tensor_completion";
  }
  return "?";
}

inline bool is_tensor_problem(ProblemKind k) {
  return k == ProblemKind::tensor_sensing || k == ProblemKind::tensor_rpca ||
         k == ProblemKind::tensor_completion;
}

inline bool is_sensing_problem(ProblemKind k) {
  return k == ProblemKind::matrix_sensing || k == ProblemKind::tensor_sensing ||
         k == ProblemKind::scaledgd_lambda;
}

inline bool is_completion_problem(ProblemKind k) {
  return k == ProblemKind::matrix_completion || k == ProblemKind::tensor_completion;
}

inline bool is_rpca_problem(ProblemKind k) {
  return k == ProblemKind::matrix_rpca || k == ProblemKind::tensor_rpca;
}

struct SweepSpec {
  std::string parameter;  // kappa | p | alpha | rank
  std::vector<double> values;
};

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::matrix_completion;
  std::array<Index, 3> dims = {1, 1, 1};   // third entry 1 for matrices
  std::array<Index, 3> ranks = {1, 1, 1};  // planted ranks
  double kappa = 1.0;
  double sigma_max = 1.0;
  bool symmetric = false;
  double p = 0.0;                 // completion observation probability
  Index m = 0;                    // sensing measurement count
  double alpha = 0.0;             // RPCA corruption fraction
  double magnitude_scale = 10.0;  // corruption amplitude multiplier
  double tol = 1e-3;              // summary iterations-to-tol threshold
  int repetitions = 1;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string note;  // free-form metadata echoed into outputs (e.g. scaling provenance)
  std::vector<std::string> variants;  // scaled | vanilla | mixed
  std::optional<SweepSpec> sweep;
  MatrixSolverConfig matrix_solver;
  TensorSolverConfig tensor_solver;
  // Which solver fields were given explicitly (sweeps must not clobber them).
  bool solver_rank_explicit = false;
  bool solver_alpha_explicit = false;
  bool solver_lambda_explicit = false;
};

namespace detail {

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline void check_known_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                            const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& key = it.key();
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const std::string& cand : allowed) {
      const std::size_t d = edit_distance(key, cand);
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    std::string msg = "unknown field \"" + key + "\"" + (where.empty() ? "" : " in " + where);
    if (best_d <= std::max<std::size_t>(2, key.size() / 3))
      msg += " (did you mean \"" + best + "\"?)";
    throw ParseError(msg);
  }
}

inline double get_number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError("field \"" + field + "\" must be a number");
  return j.get<double>();
}

inline long long get_integer(const nlohmann::json& j, const std::string& field) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number()) {
    const double v = j.get<double>();
    if (v == std::floor(v)) return static_cast<long long>(v);
  }
  throw ParseError("field \"" + field + "\" must be an integer");
}

inline std::array<Index, 3> parse_extents(const nlohmann::json& j, bool tensor,
                                          const std::string& field) {
  std::array<Index, 3> out = {1, 1, 1};
  const int want = tensor ? 3 : 2;
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != want)
      throw ParseError("field \"" + field + "\" must have " + std::to_string(want) +
                       " entries for this problem");
    for (int k = 0; k < want; ++k) out[static_cast<std::size_t>(k)] =
        static_cast<Index>(get_integer(j[static_cast<std::size_t>(k)], field));
  } else {
    const Index n = static_cast<Index>(get_integer(j, field));
    for (int k = 0; k < want; ++k) out[static_cast<std::size_t>(k)] = n;
  }
  for (int k = 0; k < want; ++k)
    if (out[static_cast<std::size_t>(k)] < 1)
      throw ParseError("field \"" + field + "\" entries must be >= 1");
  return out;
}

}  // namespace detail

inline ProblemKind parse_problem_kind(const std::string& s) {
  static const std::vector<std::pair<std::string, ProblemKind>> table = {
      {"matrix_sensing", ProblemKind::matrix_sensing},
      {"matrix_rpca", ProblemKind::matrix_rpca},
      {"matrix_completion", ProblemKind::matrix_completion},
      {"scaledgd_lambda", ProblemKind::scaledgd_lambda},
      {"tensor_sensing", ProblemKind::tensor_sensing},
      {"tensor_rpca", ProblemKind::tensor_rpca},
      {"tensor_completion", ProblemKind::tensor_completion},
  };
  for (const auto& [name, kind] : table)
    if (s == name) return kind;
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& [name, kind] : table) {
    const std::size_t d = detail::edit_distance(s, name);
    if (d < best_d) {
      best_d = d;
      best = name;
    }
  }
  throw ParseError("unknown problem \"" + s + "\" (did you mean \"" + best + "\"?)");
}

inline double default_step_size(ProblemKind k) {
  switch (k) {
    case ProblemKind::matrix_sensing:
    case ProblemKind::matrix_rpca:
    case ProblemKind::matrix_completion: return 0.5;
    case ProblemKind::scaledgd_lambda: return 0.3;
    case ProblemKind::tensor_sensing:
    case ProblemKind::tensor_completion: return 0.3;
    case ProblemKind::tensor_rpca: return 0.2;
  }
  return 0.5;
}

// Builds a fully validated config from parsed JSON; every default (step size,
// ranks, corruption bound) is resolved into the returned record.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config root must be a JSON object");
  detail::check_known_keys(
      j,
      {"problem", "n", "r", "kappa", "sigma_max", "symmetric", "p", "m", "alpha",
       "magnitude_scale", "tol", "repetitions", "seed", "output_dir", "note", "variants",
       "sweep", "solver"},
      "");
  if (!j.contains("problem")) throw ParseError("field \"problem\" is required");
  if (!j["problem"].is_string()) throw ParseError("field \"problem\" must be a string");

  ExperimentConfig cfg;
  cfg.problem = parse_problem_kind(j["problem"].get<std::string>());
  const bool tensor = is_tensor_problem(cfg.problem);

  if (!j.contains("n")) throw ParseError("field \"n\" is required");
  cfg.dims = detail::parse_extents(j["n"], tensor, "n");
  if (cfg.problem == ProblemKind::scaledgd_lambda && cfg.dims[0] != cfg.dims[1])
    throw ParseError("scaledgd_lambda requires a square shape (scalar \"n\")");

  if (!j.contains("r")) throw ParseError("field \"r\" is required");
  if (tensor) {
    cfg.ranks = detail::parse_extents(j["r"], true, "r");
  } else {
    const Index r = static_cast<Index>(detail::get_integer(j["r"], "r"));
    if (r < 1) throw ParseError("field \"r\" must be >= 1");
    cfg.ranks = {r, r, 1};
  }
  for (int k = 0; k < (tensor ? 3 : 2); ++k)
    if (cfg.ranks[static_cast<std::size_t>(k)] > cfg.dims[static_cast<std::size_t>(k)])
      throw ParseError("field \"r\" exceeds the corresponding entry of \"n\"");

  if (j.contains("kappa")) cfg.kappa = detail::get_number(j["kappa"], "kappa");
  if (cfg.kappa < 1.0) throw ParseError("field \"kappa\" must be >= 1");
  if (j.contains("sigma_max")) cfg.sigma_max = detail::get_number(j["sigma_max"], "sigma_max");
  if (cfg.sigma_max <= 0.0) throw ParseError("field \"sigma_max\" must be > 0");

  if (j.contains("symmetric")) {
    if (!j["symmetric"].is_boolean()) throw ParseError("field \"symmetric\" must be a boolean");
    cfg.symmetric = j["symmetric"].get<bool>();
  }
  if (cfg.problem == ProblemKind::scaledgd_lambda) {
    if (j.contains("symmetric") && !cfg.symmetric)
      throw ParseError("scaledgd_lambda instances are symmetric; \"symmetric\" cannot be false");
    cfg.symmetric = true;
  } else if (cfg.symmetric && tensor) {
    throw ParseError("field \"symmetric\" applies to matrix problems only");
  }

  if (j.contains("p")) cfg.p = detail::get_number(j["p"], "p");
  if (j.contains("m")) cfg.m = static_cast<Index>(detail::get_integer(j["m"], "m"));
  if (j.contains("alpha")) cfg.alpha = detail::get_number(j["alpha"], "alpha");
  if (j.contains("magnitude_scale"))
    cfg.magnitude_scale = detail::get_number(j["magnitude_scale"], "magnitude_scale");
  if (is_completion_problem(cfg.problem)) {
    if (!j.contains("p")) throw ParseError("field \"p\" is required for completion problems");
    if (!(cfg.p > 0.0 && cfg.p <= 1.0)) throw ParseError("field \"p\" must lie in (0, 1]");
  } else if (j.contains("p")) {
    throw ParseError("field \"p\" applies to completion problems only");
  }
  if (is_sensing_problem(cfg.problem)) {
    if (!j.contains("m")) throw ParseError("field \"m\" is required for sensing problems");
    if (cfg.m < 1) throw ParseError("field \"m\" must be >= 1");
  } else if (j.contains("m")) {
    throw ParseError("field \"m\" applies to sensing problems only");
  }
  if (is_rpca_problem(cfg.problem)) {
    if (!(cfg.alpha >= 0.0 && cfg.alpha < 0.5))
      throw ParseError("field \"alpha\" must lie in [0, 1/2)");
  } else if (j.contains("alpha")) {
    throw ParseError("field \"alpha\" applies to RPCA problems only");
  }
  if (cfg.magnitude_scale <= 0.0) throw ParseError("field \"magnitude_scale\" must be > 0");

  if (j.contains("tol")) cfg.tol = detail::get_number(j["tol"], "tol");
  if (cfg.tol <= 0.0) throw ParseError("field \"tol\" must be > 0");
  if (j.contains("repetitions"))
    cfg.repetitions = static_cast<int>(detail::get_integer(j["repetitions"], "repetitions"));
  if (cfg.repetitions < 1) throw ParseError("field \"repetitions\" must be >= 1");
  if (j.contains("seed")) {
    const long long s = detail::get_integer(j["seed"], "seed");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ParseError("field \"output_dir\" must be a string");
    cfg.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("note")) {
    if (!j["note"].is_string()) throw ParseError("field \"note\" must be a string");
    cfg.note = j["note"].get<std::string>();
  }

  // Variants.
  if (j.contains("variants")) {
    if (!j["variants"].is_array() || j["variants"].empty())
      throw ParseError("field \"variants\" must be a non-empty array of strings");
    for (const auto& v : j["variants"]) {
      if (!v.is_string()) throw ParseError("field \"variants\" must contain strings");
      cfg.variants.push_back(v.get<std::string>());
    }
  } else {
    cfg.variants = {"scaled"};
  }
  for (const std::string& v : cfg.variants) {
    const bool lambda_problem = cfg.problem == ProblemKind::scaledgd_lambda;
    const bool ok = v == "scaled" || (lambda_problem ? v == "mixed" : v == "vanilla");
    if (!ok)
      throw ParseError("variant \"" + v + "\" is not valid for problem " +
                       to_string(cfg.problem) +
                       (lambda_problem ? " (allowed: scaled, mixed)" : " (allowed: scaled, vanilla)"));
  }
  for (std::size_t a = 0; a < cfg.variants.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.variants.size(); ++b)
      if (cfg.variants[a] == cfg.variants[b])
        throw ParseError("duplicate variant \"" + cfg.variants[a] + "\"");

  // Solver overrides.
  MatrixSolverConfig& ms = cfg.matrix_solver;
  TensorSolverConfig& ts = cfg.tensor_solver;
  if (j.contains("solver")) {
    const nlohmann::json& s = j["solver"];
    if (!s.is_object()) throw ParseError("field \"solver\" must be an object");
    detail::check_known_keys(s,
                            {"rank", "step_size", "max_iters", "stop_tol", "lambda",
                             "init_scale", "projection_radius", "zeta0", "zeta1", "rho",
                             "alpha"},
                            "solver config");
    if (s.contains("rank")) {
      cfg.solver_rank_explicit = true;
      if (tensor) {
        ts.ranks = detail::parse_extents(s["rank"], true, "solver.rank");
      } else {
        ms.rank = static_cast<Index>(detail::get_integer(s["rank"], "solver.rank"));
        if (ms.rank < 1) throw ParseError("field \"solver.rank\" must be >= 1");
      }
    }
    if (s.contains("step_size")) {
      const double v = detail::get_number(s["step_size"], "solver.step_size");
      if (v <= 0.0) throw ParseError("field \"solver.step_size\" must be > 0");
      ms.step_size = ts.step_size = v;
    }
    if (s.contains("max_iters")) {
      const int v = static_cast<int>(detail::get_integer(s["max_iters"], "solver.max_iters"));
      if (v < 0) throw ParseError("field \"solver.max_iters\" must be >= 0");
      ms.max_iters = ts.max_iters = v;
    }
    if (s.contains("stop_tol")) {
      const double v = detail::get_number(s["stop_tol"], "solver.stop_tol");
      if (v < 0.0) throw ParseError("field \"solver.stop_tol\" must be >= 0");
      ms.stop_tol = ts.stop_tol = v;
    }
    if (s.contains("lambda")) {
      cfg.solver_lambda_explicit = true;
      ms.lambda = detail::get_number(s["lambda"], "solver.lambda");
      if (ms.lambda < 0.0) throw ParseError("field \"solver.lambda\" must be >= 0");
    }
    if (s.contains("init_scale")) {
      ms.init_scale = detail::get_number(s["init_scale"], "solver.init_scale");
      if (ms.init_scale <= 0.0) throw ParseError("field \"solver.init_scale\" must be > 0");
    }
    if (s.contains("projection_radius")) {
      const double v = detail::get_number(s["projection_radius"], "solver.projection_radius");
      if (v <= 0.0) throw ParseError("field \"solver.projection_radius\" must be > 0");
      ms.projection_radius = v;
      ts.projection_radius = v;
    }
    if (s.contains("zeta0")) {
      const double v = detail::get_number(s["zeta0"], "solver.zeta0");
      if (v < 0.0) throw ParseError("field \"solver.zeta0\" must be >= 0");
      ts.zeta0 = v;
    }
    if (s.contains("zeta1")) {
      const double v = detail::get_number(s["zeta1"], "solver.zeta1");
      if (v < 0.0) throw ParseError("field \"solver.zeta1\" must be >= 0");
      ts.zeta1 = v;
    }
    if (s.contains("rho")) {
      const double v = detail::get_number(s["rho"], "solver.rho");
      if (!(v > 0.0 && v < 1.0)) throw ParseError("field \"solver.rho\" must lie in (0, 1)");
      ts.rho = v;
    }
    if (s.contains("alpha")) {
      cfg.solver_alpha_explicit = true;
      const double v = detail::get_number(s["alpha"], "solver.alpha");
      if (!(v >= 0.0 && v < 0.5)) throw ParseError("field \"solver.alpha\" must lie in [0, 1/2)");
      ms.alpha = ts.alpha = v;
    }
  }
  if (ms.step_size <= 0.0) ms.step_size = default_step_size(cfg.problem);
  if (ts.step_size <= 0.0) ts.step_size = default_step_size(cfg.problem);
  if (!cfg.solver_rank_explicit) {
    ms.rank = cfg.ranks[0];
    ts.ranks = cfg.ranks;
  }
  if (!cfg.solver_alpha_explicit) {
    ms.alpha = cfg.alpha;
    ts.alpha = cfg.alpha;
  }
  if (cfg.problem == ProblemKind::scaledgd_lambda && ms.rank < cfg.ranks[0])
    throw ParseError("scaledgd_lambda solver rank must be >= the planted rank");

  // Sweep.
  if (j.contains("sweep")) {
    const nlohmann::json& sw = j["sweep"];
    if (!sw.is_object()) throw ParseError("field \"sweep\" must be an object");
    detail::check_known_keys(sw, {"parameter", "values"}, "sweep config");
    if (!sw.contains("parameter") || !sw["parameter"].is_string())
      throw ParseError("field \"sweep.parameter\" is required and must be a string");
    if (!sw.contains("values") || !sw["values"].is_array() || sw["values"].empty())
      throw ParseError("field \"sweep.values\" is required and must be a non-empty array");
    SweepSpec spec;
    spec.parameter = sw["parameter"].get<std::string>();
    const std::vector<std::string> allowed = {"kappa", "p", "alpha", "rank"};
    if (std::find(allowed.begin(), allowed.end(), spec.parameter) == allowed.end()) {
      std::string best;
      std::size_t best_d = std::numeric_limits<std::size_t>::max();
      for (const std::string& cand : allowed) {
        const std::size_t d = detail::edit_distance(spec.parameter, cand);
        if (d < best_d) { best_d = d; best = cand; }
      }
      throw ParseError("unknown sweep parameter \"" + spec.parameter + "\" (did you mean \"" +
                       best + "\"?)");
    }
    if (spec.parameter == "p" && !is_completion_problem(cfg.problem))
      throw ParseError("sweep parameter \"p\" applies to completion problems only");
    if (spec.parameter == "alpha" && !is_rpca_problem(cfg.problem))
      throw ParseError("sweep parameter \"alpha\" applies to RPCA problems only");
    for (const auto& v : sw["values"]) {
      const double x = detail::get_number(v, "sweep.values");
      if (spec.parameter == "kappa" && x < 1.0)
        throw ParseError("sweep value for kappa must be >= 1");
      if (spec.parameter == "p" && !(x > 0.0 && x <= 1.0))
        throw ParseError("sweep value for p must lie in (0, 1]");
      if (spec.parameter == "alpha" && !(x >= 0.0 && x < 0.5))
        throw ParseError("sweep value for alpha must lie in [0, 1/2)");
      if (spec.parameter == "rank") {
        if (x < 1.0 || x != std::floor(x)) throw ParseError("sweep values for rank must be integers >= 1");
        const Index r = static_cast<Index>(x);
        const int nmodes = tensor ? 3 : 2;
        for (int k = 0; k < nmodes; ++k)
          if (r > cfg.dims[static_cast<std::size_t>(k)])
            throw ParseError("sweep rank value exceeds an entry of \"n\"");
      }
      spec.values.push_back(x);
    }
    cfg.sweep = std::move(spec);
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(path + ": parse error at line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": " + e.what());
  }
  try {
    return parse_experiment_config(j);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// experiment runner
// ---------------------------------------------------------------------------

struct SummaryRow {
  int sweep_index = 0;
  double sweep_value = 0.0;
  bool has_sweep = false;
  int repetition = 0;
  std::string variant;
  std::uint64_t run_seed = 0;
  std::string status;
  int iterations = 0;
  int iterations_to_tol = -1;  // -1: tol not reached within the trace
  double final_rel_error = std::numeric_limits<double>::quiet_NaN();
  double final_rel_error_inf = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  std::string trace_file;
  std::optional<int> switch_iteration;
  std::optional<double> lambda_used;
  std::optional<double> zeta0_used, zeta1_used, rho_used, projection_radius_used;
};

struct SweepSummary {
  std::string problem;
  double tol = 1e-3;
  std::string sweep_parameter;  // empty when no sweep
  std::string note;
  std::vector<SummaryRow> rows;
};

struct RunRecord {
  SummaryRow row;
  ConvergenceTrace trace;
};

struct RunOptions {
  std::string output_dir;  // overrides config / environment when non-empty
  int threads = 1;
  std::optional<std::uint64_t> seed;  // overrides cfg.seed
  bool write_files = true;
};

struct ExperimentResult {
  ExperimentConfig config;  // resolved config the runs actually used
  std::string output_dir;   // empty when write_files was false
  std::vector<RunRecord> runs;
  SweepSummary summary;
};

namespace detail {

inline int variant_code(const std::string& v) {
  if (v == "scaled") return 0;
  if (v == "vanilla") return 1;
  if (v == "mixed") return 2;
  throw ValueError("unknown solver variant: " + v);
}

// Applies one sweep value to a config copy.
inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& parameter, double value) {
  if (parameter == "kappa") {
    cfg.kappa = value;
  } else if (parameter == "p") {
    cfg.p = value;
  } else if (parameter == "alpha") {
    cfg.alpha = value;
    if (!cfg.solver_alpha_explicit) {
      cfg.matrix_solver.alpha = value;
      cfg.tensor_solver.alpha = value;
    }
  } else if (parameter == "rank") {
    const Index r = static_cast<Index>(value);
    const bool tensor = is_tensor_problem(cfg.problem);
    cfg.ranks = tensor ? std::array<Index, 3>{r, r, r} : std::array<Index, 3>{r, r, 1};
    if (!cfg.solver_rank_explicit) {
      cfg.matrix_solver.rank = r;
      cfg.tensor_solver.ranks = cfg.ranks;
    }
  } else {
    throw ValueError("unknown sweep parameter: " + parameter);
  }
}

inline RunRecord run_one(const ExperimentConfig& base, int sweep_index, int repetition,
                         const std::string& variant) {
  ExperimentConfig cfg = base;
  RunRecord rec;
  rec.row.sweep_index = sweep_index;
  rec.row.repetition = repetition;
  rec.row.variant = variant;
  if (cfg.sweep) {
    rec.row.has_sweep = true;
    rec.row.sweep_value = cfg.sweep->values[static_cast<std::size_t>(sweep_index)];
    apply_sweep_value(cfg, cfg.sweep->parameter, rec.row.sweep_value);
  }
  // Per-run seed: chained key derivation over (seed, sweep index, repetition,
  // variant); adding repetitions or sweep points never disturbs earlier runs.
  const std::uint64_t run_seed = derive_key(
      derive_key(derive_key(cfg.seed, static_cast<std::uint64_t>(sweep_index)),
                 static_cast<std::uint64_t>(repetition)),
      static_cast<std::uint64_t>(variant_code(variant)));
  rec.row.run_seed = run_seed;
  const std::uint64_t truth_seed = derive_key(run_seed, 1);
  const std::uint64_t op_seed = derive_key(run_seed, 2);
  const std::uint64_t corr_seed = derive_key(run_seed, 3);
  const std::uint64_t solver_seed = derive_key(run_seed, 4);

  GroundTruthSpec tspec;
  tspec.dims = cfg.dims;
  tspec.ranks = cfg.ranks;
  tspec.kappa = cfg.kappa;
  tspec.sigma_max = cfg.sigma_max;
  tspec.symmetric = cfg.symmetric;
  tspec.seed = truth_seed;

  const ConvergenceTrace* trace = nullptr;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;

  if (is_tensor_problem(cfg.problem)) {
    TensorSolverConfig scfg = cfg.tensor_solver;
    scfg.seed = solver_seed;
    if (variant == "vanilla") scfg.vanilla = true;
    const TensorTruth truth = gen_tensor_truth(tspec);
    TensorSolveResult res;
    switch (cfg.problem) {
      case ProblemKind::tensor_sensing: {
        GaussianSensingOp op(cfg.dims[0], cfg.dims[1], cfg.dims[2], cfg.m, op_seed);
        const Vector y = op.apply(truth.X);
        res = solve_tensor_sensing(op, y, scfg, &truth.X);
        break;
      }
      case ProblemKind::tensor_rpca: {
        CorruptionSpec cspec{cfg.alpha, cfg.magnitude_scale, corr_seed};
        const SparseCorruptionTensor corr =
            gen_sparse_corruption(cspec, cfg.dims[0], cfg.dims[1], cfg.dims[2],
                                  truth.X.norm_inf());
        Tensor3 y = truth.X;
        y += corr.S;
        res = solve_tensor_rpca(y, scfg, &truth.X);
        rec.row.zeta0_used = res.zeta0_used;
        rec.row.zeta1_used = res.zeta1_used;
        rec.row.rho_used = res.rho_used;
        break;
      }
      case ProblemKind::tensor_completion: {
        ObservationMask mask({cfg.dims[0], cfg.dims[1], cfg.dims[2]}, cfg.p, op_seed);
        const Tensor3 y_obs = mask.project(truth.X);
        res = solve_tensor_completion(mask, y_obs, scfg, &truth.X);
        rec.row.projection_radius_used = res.projection_radius_used;
        break;
      }
      default: throw ValueError("internal: not a tensor problem");
    }
    rec.trace = std::move(res.trace);
    trace = &rec.trace;
    status = res.status;
    iterations = res.iterations;
  } else {
    MatrixSolverConfig scfg = cfg.matrix_solver;
    scfg.seed = solver_seed;
    if (variant == "vanilla") scfg.vanilla = true;
    if (variant == "mixed") scfg.mixed_init = true;
    const MatrixTruth truth = gen_matrix_truth(tspec);
    MatrixSolveResult res;
    switch (cfg.problem) {
      case ProblemKind::matrix_sensing: {
        GaussianSensingOp op(cfg.dims[0], cfg.dims[1], cfg.m, op_seed);
        const Vector y = op.apply(truth.X);
        res = solve_matrix_sensing(op, y, scfg, &truth.X);
        break;
      }
      case ProblemKind::matrix_rpca: {
        CorruptionSpec cspec{cfg.alpha, cfg.magnitude_scale, corr_seed};
        const SparseCorruptionMatrix corr =
            gen_sparse_corruption(cspec, cfg.dims[0], cfg.dims[1],
                                  truth.X.cwiseAbs().maxCoeff());
        const Matrix y = truth.X + corr.S;
        res = solve_matrix_rpca(y, scfg, &truth.X);
        break;
      }
      case ProblemKind::matrix_completion: {
        ObservationMask mask({cfg.dims[0], cfg.dims[1]}, cfg.p, op_seed);
        const Matrix y_obs = mask.project(truth.X);
        res = solve_matrix_completion(mask, y_obs, scfg, &truth.X);
        break;
      }
      case ProblemKind::scaledgd_lambda: {
        GaussianSensingOp op(cfg.dims[0], cfg.dims[1], cfg.m, op_seed);
        const Vector y = op.apply(truth.X);
        if (!cfg.solver_lambda_explicit) {
          // lambda ~ 0.01 * sigma_min(X*) estimated from the backprojection
          // (sigma_min(X*) = sigma_min(L*)^2 for the symmetric factorization).
          const SvdResult est = svd_top_r(op.adjoint_matrix(y), cfg.ranks[0]);
          scfg.lambda = 0.01 * std::max(est.S[cfg.ranks[0] - 1], 0.0);
        }
        rec.row.lambda_used = scfg.lambda;
        res = solve_scaledgd_lambda(op, y, scfg, &truth.X);
        if (res.switch_iteration) rec.row.switch_iteration = *res.switch_iteration;
        break;
      }
      default: throw ValueError("internal: not a matrix problem");
    }
    rec.trace = std::move(res.trace);
    trace = &rec.trace;
    status = res.status;
    iterations = res.iterations;
  }

  rec.row.status = to_string(status);
  rec.row.iterations = iterations;
  rec.row.iterations_to_tol = iterations_to_tol(*trace, cfg.tol);
  if (!trace->iterations.empty()) {
    const IterRecord& last = trace->iterations.back();
    rec.row.final_rel_error = last.rel_error_fro;
    rec.row.final_rel_error_inf = last.rel_error_inf;
    rec.row.wall_time_s = last.wall_time_s;
  }
  return rec;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["problem"] = to_string(cfg.problem);
  const bool tensor = is_tensor_problem(cfg.problem);
  if (tensor) {
    j["n"] = {cfg.dims[0], cfg.dims[1], cfg.dims[2]};
    j["r"] = {cfg.ranks[0], cfg.ranks[1], cfg.ranks[2]};
  } else {
    j["n"] = {cfg.dims[0], cfg.dims[1]};
    j["r"] = cfg.ranks[0];
  }
  j["kappa"] = cfg.kappa;
  j["sigma_max"] = cfg.sigma_max;
  if (!tensor) j["symmetric"] = cfg.symmetric;
  if (is_completion_problem(cfg.problem)) j["p"] = cfg.p;
  if (is_sensing_problem(cfg.problem)) j["m"] = cfg.m;
  if (is_rpca_problem(cfg.problem)) {
    j["alpha"] = cfg.alpha;
    j["magnitude_scale"] = cfg.magnitude_scale;
  }
  j["tol"] = cfg.tol;
  j["repetitions"] = cfg.repetitions;
  j["seed"] = cfg.seed;
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
  if (!cfg.note.empty()) j["note"] = cfg.note;
  j["variants"] = cfg.variants;
  if (cfg.sweep) {
    j["sweep"] = {{"parameter", cfg.sweep->parameter}, {"values", cfg.sweep->values}};
  }
  nlohmann::json s;
  if (tensor) {
    const TensorSolverConfig& ts = cfg.tensor_solver;
    s["rank"] = {ts.ranks[0], ts.ranks[1], ts.ranks[2]};
    s["step_size"] = ts.step_size;
    s["max_iters"] = ts.max_iters;
    s["stop_tol"] = ts.stop_tol;
    if (is_rpca_problem(cfg.problem)) {
      s["alpha"] = ts.alpha;
      if (ts.zeta0) s["zeta0"] = *ts.zeta0;
      if (ts.zeta1) s["zeta1"] = *ts.zeta1;
      if (ts.rho) s["rho"] = *ts.rho;
    }
    if (is_completion_problem(cfg.problem) && ts.projection_radius)
      s["projection_radius"] = *ts.projection_radius;
  } else {
    const MatrixSolverConfig& ms = cfg.matrix_solver;
    s["rank"] = ms.rank;
    s["step_size"] = ms.step_size;
    s["max_iters"] = ms.max_iters;
    s["stop_tol"] = ms.stop_tol;
    if (is_rpca_problem(cfg.problem)) s["alpha"] = ms.alpha;
    if (is_completion_problem(cfg.problem) && ms.projection_radius)
      s["projection_radius"] = *ms.projection_radius;
    if (cfg.problem == ProblemKind::scaledgd_lambda) {
      if (cfg.solver_lambda_explicit) s["lambda"] = ms.lambda;
      s["init_scale"] = ms.init_scale;
    }
  }
  j["solver"] = std::move(s);
  return j;
}

inline nlohmann::json summary_to_json(const SweepSummary& summary) {
  nlohmann::json j;
  j["problem"] = summary.problem;
  j["tol"] = summary.tol;
  if (!summary.sweep_parameter.empty()) j["sweep_parameter"] = summary.sweep_parameter;
  if (!summary.note.empty()) j["note"] = summary.note;
  nlohmann::json rows = nlohmann::json::array();
  for (const SummaryRow& r : summary.rows) {
    nlohmann::json row;
    if (r.has_sweep) {
      row["sweep_index"] = r.sweep_index;
      row["value"] = r.sweep_value;
    }
    row["repetition"] = r.repetition;
    row["variant"] = r.variant;
    row["run_seed"] = r.run_seed;
    row["status"] = r.status;
    row["iterations"] = r.iterations;
    row["iterations_to_tol"] = r.iterations_to_tol;
    row["final_rel_error"] = r.final_rel_error;
    row["final_rel_error_inf"] = r.final_rel_error_inf;
    row["wall_time_s"] = r.wall_time_s;
    if (!r.trace_file.empty()) row["trace_file"] = r.trace_file;
    if (r.switch_iteration) row["switch_iteration"] = *r.switch_iteration;
    if (r.lambda_used) row["lambda_used"] = *r.lambda_used;
    if (r.zeta0_used) row["zeta0_used"] = *r.zeta0_used;
    if (r.zeta1_used) row["zeta1_used"] = *r.zeta1_used;
    if (r.rho_used) row["rho_used"] = *r.rho_used;
    if (r.projection_radius_used) row["projection_radius_used"] = *r.projection_radius_used;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline SweepSummary summary_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array())
    throw ParseError("summary JSON must be an object with a \"rows\" array");
  SweepSummary s;
  if (j.contains("problem")) s.problem = j["problem"].get<std::string>();
  if (j.contains("tol")) s.tol = j["tol"].get<double>();
  if (j.contains("sweep_parameter")) s.sweep_parameter = j["sweep_parameter"].get<std::string>();
  if (j.contains("note")) s.note = j["note"].get<std::string>();
  for (const auto& row : j["rows"]) {
    if (!row.is_object()) throw ParseError("summary rows must be objects");
    SummaryRow r;
    if (row.contains("value")) {
      r.has_sweep = true;
      r.sweep_value = row["value"].get<double>();
    }
    if (row.contains("sweep_index")) r.sweep_index = row["sweep_index"].get<int>();
    if (row.contains("repetition")) r.repetition = row["repetition"].get<int>();
    if (row.contains("variant")) r.variant = row["variant"].get<std::string>();
    if (row.contains("run_seed")) r.run_seed = row["run_seed"].get<std::uint64_t>();
    if (row.contains("status")) r.status = row["status"].get<std::string>();
    if (row.contains("iterations")) r.iterations = row["iterations"].get<int>();
    if (row.contains("iterations_to_tol"))
      r.iterations_to_tol = row["iterations_to_tol"].get<int>();
    if (row.contains("final_rel_error")) r.final_rel_error = row["final_rel_error"].get<double>();
    if (row.contains("final_rel_error_inf"))
      r.final_rel_error_inf = row["final_rel_error_inf"].get<double>();
    if (row.contains("wall_time_s")) r.wall_time_s = row["wall_time_s"].get<double>();
    if (row.contains("trace_file")) r.trace_file = row["trace_file"].get<std::string>();
    if (row.contains("switch_iteration")) r.switch_iteration = row["switch_iteration"].get<int>();
    if (row.contains("lambda_used")) r.lambda_used = row["lambda_used"].get<double>();
    s.rows.push_back(std::move(r));
  }
  return s;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median iteration count; -1 entries (tol not reached) sort above every real
// count, and a median that lands on one is reported as -1 (censored).
inline double median_iters(std::vector<int> v) {
  if (v.empty()) return -1.0;
  const int big = std::numeric_limits<int>::max();
  for (int& x : v)
    if (x < 0) x = big;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) {
    const int med = v[n / 2];
    return med == big ? -1.0 : static_cast<double>(med);
  }
  const int lo = v[n / 2 - 1], hi = v[n / 2];
  if (hi == big) return -1.0;
  return 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
}

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

inline std::string sci3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

}  // namespace detail

// Aligned text table: one row per sweep point x variant, medians over
// repetitions; variants for the same sweep point sit on adjacent rows.
inline std::string sweep_summary_table(const SweepSummary& summary) {
  require_value(!summary.rows.empty(), "sweep_summary_table: empty summary");
  struct Key {
    int sweep_index;
    std::string variant;
    bool operator<(const Key& o) const {
      return sweep_index != o.sweep_index ? sweep_index < o.sweep_index : variant < o.variant;
    }
  };
  struct Agg {
    double value = 0.0;
    bool has_value = false;
    std::vector<int> iters;
    std::vector<double> err, wall;
  };
  std::map<Key, Agg> groups;
  std::vector<Key> order;  // first-appearance order (sweep-major, config variant order)
  for (const SummaryRow& r : summary.rows) {
    const Key key{r.sweep_index, r.variant};
    auto it = groups.find(key);
    if (it == groups.end()) {
      it = groups.emplace(key, Agg{}).first;
      order.push_back(key);
    }
    Agg& a = it->second;
    a.value = r.sweep_value;
    a.has_value = r.has_sweep;
    a.iters.push_back(r.iterations_to_tol);
    a.err.push_back(r.final_rel_error);
    a.wall.push_back(r.wall_time_s);
  }
  const std::string param = summary.sweep_parameter.empty() ? "-" : summary.sweep_parameter;
  std::vector<std::array<std::string, 7>> cells;
  cells.push_back({"parameter", "value", "variant", "reps", "iters_to_tol", "final_rel_error",
                   "wall_time_s"});
  for (const Key& key : order) {
    const Agg& a = groups.at(key);
    const double med_it = detail::median_iters(a.iters);
    cells.push_back({param, a.has_value ? detail::fixed3(a.value) : "-", key.variant,
                     std::to_string(a.iters.size()),
                     med_it < 0 ? "-" : detail::fixed3(med_it),
                     detail::sci3(detail::median_of(a.err)),
                     detail::fixed3(detail::median_of(a.wall))});
  }
  std::array<std::size_t, 7> width{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) out.append(width[c] - row[c].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

inline std::string default_output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (!opts.output_dir.empty()) return opts.output_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("SCALEDGD_BENCH_OUT"); env && *env) return env;
  return "bench_out";
}

// Runs every (sweep point x variant x repetition) combination; rows keep that
// nesting order. With write_files set, emits config_resolved.json, one trace
// CSV per run, summary.json, and summary.txt into the output directory.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg_in,
                                       const RunOptions& opts = {}) {
  ExperimentConfig cfg = cfg_in;
  if (opts.seed) cfg.seed = *opts.seed;

  struct Job {
    int sweep_index, repetition;
    std::string variant;
  };
  std::vector<Job> jobs;
  const int n_sweep = cfg.sweep ? static_cast<int>(cfg.sweep->values.size()) : 1;
  for (int s = 0; s < n_sweep; ++s)
    for (const std::string& variant : cfg.variants)
      for (int rep = 0; rep < cfg.repetitions; ++rep) jobs.push_back({s, rep, variant});

  std::vector<RunRecord> runs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(jobs.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      runs[i] = detail::run_one(cfg, jobs[i].sweep_index, jobs[i].repetition, jobs[i].variant);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
        try {
          runs[i] =
              detail::run_one(cfg, jobs[i].sweep_index, jobs[i].repetition, jobs[i].variant);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  result.summary.problem = to_string(cfg.problem);
  result.summary.tol = cfg.tol;
  result.summary.note = cfg.note;
  if (cfg.sweep) result.summary.sweep_parameter = cfg.sweep->parameter;

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::string tag;
    if (cfg.sweep) tag += "s" + std::to_string(jobs[i].sweep_index) + "_";
    tag += jobs[i].variant + "_r" + std::to_string(jobs[i].repetition);
    runs[i].row.trace_file = "trace_" + tag + ".csv";
  }

  if (opts.write_files) {
    namespace fs = std::filesystem;
    const std::string out_dir = default_output_dir(cfg, opts);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    result.output_dir = out_dir;
    cfg.output_dir = out_dir;
    {
      std::ofstream f(out_dir + "/config_resolved.json", std::ios::binary);
      if (!f) throw IoError("cannot write " + out_dir + "/config_resolved.json");
      f << config_to_json(cfg).dump(2) << '\n';
    }
    for (const RunRecord& run : runs)
      write_trace(out_dir + "/" + run.row.trace_file, run.trace);
  }

  for (RunRecord& run : runs) result.summary.rows.push_back(run.row);
  result.runs = std::move(runs);
  result.config = cfg;

  if (opts.write_files) {
    const std::string out_dir = result.output_dir;
    {
      std::ofstream f(out_dir + "/summary.json", std::ios::binary);
      if (!f) throw IoError("cannot write " + out_dir + "/summary.json");
      f << summary_to_json(result.summary).dump(2) << '\n';
    }
    {
      std::ofstream f(out_dir + "/summary.txt", std::ios::binary);
      if (!f) throw IoError("cannot write " + out_dir + "/summary.txt");
      f << sweep_summary_table(result.summary);
    }
  }
  return result;
}

}  // namespace scaledgd
