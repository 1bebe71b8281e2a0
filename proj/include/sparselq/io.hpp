#ifndef SPARSELQ_IO_HPP
#define SPARSELQ_IO_HPP

/**
 * @file
 * @brief Problem files, solution records and CSV tables.
 *
 * Matrices are JSON arrays in row-major order, either nested (one array per
 * row) or flat. Forced zeros are 1-based (row, column) positions of K.
 */

#include <Eigen/Dense>
#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "l0.hpp"
#include "model.hpp"
#include "outer.hpp"
#include "penalties.hpp"

namespace sparselq::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class Relaxation { L1, PQ, L0 };

inline const char * to_string(Relaxation r)
{
  switch (r) {
    case Relaxation::L1: return "l1";
    case Relaxation::PQ: return "pq";
    case Relaxation::L0: return "l0";
  }
  return "?";
}

inline Relaxation parse_relaxation(const std::string & s)
{
  if (s == "l1") { return Relaxation::L1; }
  if (s == "pq") { return Relaxation::PQ; }
  if (s == "l0") { return Relaxation::L0; }
  throw InvalidOption("relaxation must be one of l1, pq, l0 (got '" + s + "')");
}

/// Tunable solver knobs shared by the problem file and the command line.
struct Settings
{
  double beta0 = 1.0;
  double kappa0 = 1.0;
  double eps1 = 1e-5;
  double eps2 = 1e-4;
  Index max_outer = 50000;
  Index max_inner_sweeps = 10000;
  double sparsity_tol = 1e-6;
  double lambda = 10.0;
  double sigma0 = 1.0;
  double sigma_decay = 0.7;
  double sigma_min = 1e-4;
  Index max_passes = 50;
};

struct ProblemFile
{
  std::string name;
  Index n = 0, m = 0, l = 0, q = 0;
  PlantData plant;
  double gamma = 0.0;
  Relaxation relaxation = Relaxation::L1;
  Mat weights;  ///< empty means all ones
  PqParams pq;
  std::vector<ForcedZero> forced_zeros;  ///< 0-based (row, column) of K
  Settings settings;
  std::uint64_t seed = 0;
};

inline SolverOptions solver_options(const Settings & s)
{
  SolverOptions o;
  o.beta0 = s.beta0;
  o.kappa0 = s.kappa0;
  o.eps1 = s.eps1;
  o.eps2 = s.eps2;
  o.max_outer = s.max_outer;
  o.max_inner_sweeps = s.max_inner_sweeps;
  o.sparsity_tol = s.sparsity_tol;
  return o;
}

/// The initial solve uses the relaxed-solve settings; the anchored passes run ten times tighter.
inline L0Options l0_options(const Settings & s)
{
  L0Options o;
  o.lambda = s.lambda;
  o.sigma0 = s.sigma0;
  o.decay = s.sigma_decay;
  o.sigma_min = s.sigma_min;
  o.max_passes = s.max_passes;
  o.initial = solver_options(s);
  o.subproblem.beta0 = s.beta0;
  o.subproblem.kappa0 = s.kappa0;
  o.subproblem.eps1 = 0.1 * s.eps1;
  o.subproblem.eps2 = 0.1 * s.eps2;
  o.subproblem.max_inner_sweeps = s.max_inner_sweeps;
  o.subproblem.sparsity_tol = s.sparsity_tol;
  return o;
}

namespace detail {

inline void require_keys(const json & obj, const std::string & where, std::initializer_list<const char *> allowed)
{
  if (!obj.is_object()) { throw ParseError(where + ": expected an object"); }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto & item : obj.items()) {
    if (!ok.count(item.key())) { throw UnknownKey(where + ": unknown key '" + item.key() + "'"); }
  }
}

inline const json & need(const json & obj, const std::string & key, const std::string & where)
{
  auto it = obj.find(key);
  if (it == obj.end()) { throw ParseError(where + ": missing key '" + key + "'"); }
  return *it;
}

inline double get_number(const json & v, const std::string & key)
{
  if (!v.is_number()) { throw ParseError("key '" + key + "': expected a number"); }
  return v.get<double>();
}

inline Index get_index(const json & v, const std::string & key)
{
  if (!v.is_number_integer()) { throw ParseError("key '" + key + "': expected an integer"); }
  return v.get<Index>();
}

inline Index get_dimension(const json & obj, const std::string & key)
{
  const Index d = get_index(need(obj, key, "problem"), key);
  if (d < 1) { throw ParseError("key '" + key + "': dimension must be >= 1"); }
  return d;
}

/// Row-major matrix from a nested or flat numeric array.
inline Mat get_matrix(const json & v, Index rows, Index cols, const std::string & key)
{
  if (!v.is_array()) { throw ParseError("key '" + key + "': expected an array"); }
  std::vector<double> flat;
  const bool nested = !v.empty() && v.front().is_array();
  if (nested) {
    if (static_cast<Index>(v.size()) != rows) {
      throw DimensionMismatch("key '" + key + "': expected " + std::to_string(rows) + " rows, got "
                              + std::to_string(v.size()));
    }
    for (const auto & row : v) {
      if (!row.is_array()) { throw ParseError("key '" + key + "': mixed nested and flat rows"); }
      if (static_cast<Index>(row.size()) != cols) {
        throw DimensionMismatch("key '" + key + "': expected " + std::to_string(cols) + " columns, got "
                                + std::to_string(row.size()));
      }
      for (const auto & x : row) { flat.push_back(get_number(x, key)); }
    }
  } else {
    if (static_cast<Index>(v.size()) != rows * cols) {
      throw DimensionMismatch("key '" + key + "': expected " + std::to_string(rows * cols) + " entries, got "
                              + std::to_string(v.size()));
    }
    for (const auto & x : v) { flat.push_back(get_number(x, key)); }
  }
  Mat M(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) { M(r, c) = flat[static_cast<std::size_t>(r * cols + c)]; }
  }
  return M;
}

inline Vec get_vector(const json & v, const std::string & key)
{
  if (!v.is_array()) { throw ParseError("key '" + key + "': expected an array"); }
  Vec out(static_cast<Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) { out(static_cast<Index>(k)) = get_number(v[k], key); }
  return out;
}

inline std::size_t line_of(const std::string & text, std::size_t byte)
{
  std::size_t line = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
    if (text[k] == '\n') { ++line; }
  }
  return line;
}

inline void read_settings(const json & o, Settings & s)
{
  require_keys(o, "options", {"beta0", "kappa0", "eps1", "eps2", "max_outer", "max_inner_sweeps", "sparsity_tol",
                              "lambda", "sigma0", "sigma_decay", "sigma_min", "max_passes"});
  auto num = [&](const char * k, double & dst) {
    if (o.contains(k)) { dst = get_number(o[k], k); }
  };
  auto idx = [&](const char * k, Index & dst) {
    if (o.contains(k)) { dst = get_index(o[k], k); }
  };
  num("beta0", s.beta0);
  num("kappa0", s.kappa0);
  num("eps1", s.eps1);
  num("eps2", s.eps2);
  idx("max_outer", s.max_outer);
  idx("max_inner_sweeps", s.max_inner_sweeps);
  num("sparsity_tol", s.sparsity_tol);
  num("lambda", s.lambda);
  num("sigma0", s.sigma0);
  num("sigma_decay", s.sigma_decay);
  num("sigma_min", s.sigma_min);
  idx("max_passes", s.max_passes);
}

}  // namespace detail

/// Check the settings ranges by building the solver option sets.
inline void validate_settings(const Settings & s)
{
  solver_options(s).validate();
  l0_options(s).validate();
  if (!(s.sparsity_tol >= 0.0)) { throw InvalidOption("sparsity_tol must be >= 0"); }
}

/// Structural and plant-assumption validation of a parsed problem.
inline void validate_problem(const ProblemFile & pf)
{
  const ValidatedPlant vp = validate_plant(pf.plant);
  lift_plant(vp, pf.forced_zeros);
  if (!(pf.gamma >= 0.0) || !std::isfinite(pf.gamma)) { throw InvalidOption("gamma must be finite and >= 0"); }
  if (pf.weights.size() && !(pf.weights.array() > 0.0).all()) { throw InvalidOption("weights must be > 0"); }
  validate_pq(pf.pq);
  validate_settings(pf.settings);
}

inline ProblemFile parse_problem_json(const json & j)
{
  detail::require_keys(j, "problem", {"name", "n", "m", "l", "q", "A", "B2", "B1", "C", "D", "vertices", "gamma",
                                      "relaxation", "weights", "pq_params", "forced_zeros", "options", "seed"});
  ProblemFile pf;
  if (j.contains("name")) {
    if (!j["name"].is_string()) { throw ParseError("key 'name': expected a string"); }
    pf.name = j["name"].get<std::string>();
  }
  pf.n = detail::get_dimension(j, "n");
  pf.m = detail::get_dimension(j, "m");
  pf.l = detail::get_dimension(j, "l");
  pf.q = detail::get_dimension(j, "q");
  pf.plant.A = detail::get_matrix(detail::need(j, "A", "problem"), pf.n, pf.n, "A");
  pf.plant.B2 = detail::get_matrix(detail::need(j, "B2", "problem"), pf.n, pf.m, "B2");
  pf.plant.B1 = detail::get_matrix(detail::need(j, "B1", "problem"), pf.n, pf.l, "B1");
  pf.plant.C = detail::get_matrix(detail::need(j, "C", "problem"), pf.q, pf.n, "C");
  pf.plant.D = detail::get_matrix(detail::need(j, "D", "problem"), pf.q, pf.m, "D");
  if (j.contains("vertices")) {
    const json & vs = j["vertices"];
    if (!vs.is_array()) { throw ParseError("key 'vertices': expected an array"); }
    for (std::size_t k = 0; k < vs.size(); ++k) {
      const std::string where = "vertices[" + std::to_string(k) + "]";
      detail::require_keys(vs[k], where, {"A", "B2"});
      Vertex v;
      v.A = detail::get_matrix(detail::need(vs[k], "A", where), pf.n, pf.n, where + ".A");
      v.B2 = detail::get_matrix(detail::need(vs[k], "B2", where), pf.n, pf.m, where + ".B2");
      pf.plant.vertices.push_back(std::move(v));
    }
  }
  if (j.contains("gamma")) { pf.gamma = detail::get_number(j["gamma"], "gamma"); }
  if (j.contains("relaxation")) {
    if (!j["relaxation"].is_string()) { throw ParseError("key 'relaxation': expected a string"); }
    pf.relaxation = parse_relaxation(j["relaxation"].get<std::string>());
  }
  if (j.contains("weights")) { pf.weights = detail::get_matrix(j["weights"], pf.m, pf.n, "weights"); }
  if (j.contains("pq_params")) {
    const json & o = j["pq_params"];
    detail::require_keys(o, "pq_params", {"a1", "a2", "b1", "b2"});
    if (o.contains("a1")) { pf.pq.a1 = detail::get_number(o["a1"], "a1"); }
    if (o.contains("a2")) { pf.pq.a2 = detail::get_number(o["a2"], "a2"); }
    if (o.contains("b1")) { pf.pq.b1 = detail::get_number(o["b1"], "b1"); }
    if (o.contains("b2")) { pf.pq.b2 = detail::get_number(o["b2"], "b2"); }
  }
  if (j.contains("forced_zeros")) {
    const json & fz = j["forced_zeros"];
    if (!fz.is_array()) { throw ParseError("key 'forced_zeros': expected an array"); }
    for (const auto & e : fz) {
      if (!e.is_array() || e.size() != 2) { throw ParseError("key 'forced_zeros': entries are [row, column] pairs"); }
      const Index r = detail::get_index(e[0], "forced_zeros");
      const Index c = detail::get_index(e[1], "forced_zeros");
      if (r < 1 || r > pf.m || c < 1 || c > pf.n) {
        throw ForcedZeroOutOfRange("forced zero (" + std::to_string(r) + ", " + std::to_string(c)
                                   + ") outside the " + std::to_string(pf.m) + " x " + std::to_string(pf.n) + " gain");
      }
      pf.forced_zeros.emplace_back(r - 1, c - 1);
    }
  }
  if (j.contains("options")) { detail::read_settings(j["options"], pf.settings); }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) { throw ParseError("key 'seed': expected a non-negative integer"); }
    pf.seed = j["seed"].get<std::uint64_t>();
  }
  return pf;
}

inline json parse_json_text(const std::string & text, const std::string & source)
{
  try {
    return json::parse(text);
  } catch (const json::parse_error & e) {
    throw ParseError(source + ": line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw ParseError("cannot open '" + path.string() + "'"); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parse and validate a problem file.
inline ProblemFile parse_problem(const std::filesystem::path & path)
{
  const std::string text = read_file(path);
  ProblemFile pf = parse_problem_json(parse_json_text(text, path.string()));
  validate_problem(pf);
  return pf;
}

// ---------------------------------------------------------------- output

/// Shortest decimal that parses back to the same double.
inline std::string format_number(double x)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x == 0.0 ? 0.0 : x);
  return std::string(buf, res.ptr);
}

inline ordered_json number_json(double x)
{
  if (!std::isfinite(x)) { return nullptr; }
  return x == 0.0 ? 0.0 : x;
}

inline ordered_json matrix_json(const Mat & M)
{
  ordered_json rows = ordered_json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < M.cols(); ++c) { row.push_back(number_json(M(r, c))); }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json int_matrix_json(const Eigen::MatrixXi & M)
{
  ordered_json rows = ordered_json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < M.cols(); ++c) { row.push_back(M(r, c)); }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json vector_json(const std::vector<double> & v)
{
  ordered_json a = ordered_json::array();
  for (double x : v) { a.push_back(number_json(x)); }
  return a;
}

inline ordered_json vector_json(const Vec & v)
{
  ordered_json a = ordered_json::array();
  for (Index k = 0; k < v.size(); ++k) { a.push_back(number_json(v(k))); }
  return a;
}

inline ordered_json problem_json(const ProblemFile & pf)
{
  ordered_json j;
  if (!pf.name.empty()) { j["name"] = pf.name; }
  j["n"] = pf.n;
  j["m"] = pf.m;
  j["l"] = pf.l;
  j["q"] = pf.q;
  j["A"] = matrix_json(pf.plant.A);
  j["B2"] = matrix_json(pf.plant.B2);
  j["B1"] = matrix_json(pf.plant.B1);
  j["C"] = matrix_json(pf.plant.C);
  j["D"] = matrix_json(pf.plant.D);
  if (!pf.plant.vertices.empty()) {
    ordered_json vs = ordered_json::array();
    for (const auto & v : pf.plant.vertices) {
      ordered_json o;
      o["A"] = matrix_json(v.A);
      o["B2"] = matrix_json(v.B2);
      vs.push_back(std::move(o));
    }
    j["vertices"] = std::move(vs);
  }
  j["gamma"] = pf.gamma;
  j["relaxation"] = to_string(pf.relaxation);
  if (pf.weights.size()) { j["weights"] = matrix_json(pf.weights); }
  j["pq_params"] = {{"a1", pf.pq.a1}, {"a2", pf.pq.a2}, {"b1", pf.pq.b1}, {"b2", pf.pq.b2}};
  if (!pf.forced_zeros.empty()) {
    ordered_json fz = ordered_json::array();
    for (const auto & [r, c] : pf.forced_zeros) { fz.push_back({r + 1, c + 1}); }
    j["forced_zeros"] = std::move(fz);
  }
  const Settings & s = pf.settings;
  j["options"] = {{"beta0", s.beta0},
                  {"kappa0", s.kappa0},
                  {"eps1", s.eps1},
                  {"eps2", s.eps2},
                  {"max_outer", s.max_outer},
                  {"max_inner_sweeps", s.max_inner_sweeps},
                  {"sparsity_tol", s.sparsity_tol},
                  {"lambda", s.lambda},
                  {"sigma0", s.sigma0},
                  {"sigma_decay", s.sigma_decay},
                  {"sigma_min", s.sigma_min},
                  {"max_passes", s.max_passes}};
  j["seed"] = pf.seed;
  return j;
}

/// Solution record: the effective problem plus every result field. Holds no timings.
inline ordered_json solution_json(const ProblemFile & pf, const Solution & sol)
{
  ordered_json j;
  j["format"] = "sparselq-solution";
  j["version"] = 1;
  j["problem"] = problem_json(pf);
  j["status"] = to_string(sol.status);
  j["certified"] = sol.certified;
  j["certificate"] = sol.certificate_message;
  j["iterations"] = sol.iterations;
  j["primal_res"] = number_json(sol.primal_res);
  j["dual_res"] = number_json(sol.dual_res);
  j["objective"] = number_json(sol.objective);
  j["J_upper"] = number_json(sol.J_upper);
  j["J_vertex"] = vector_json(sol.J_vertex);
  j["J_vertex_max"] = number_json(sol.J_vertex_max);
  j["n_zeros"] = sol.n_zeros;
  j["pattern"] = int_matrix_json(sol.pattern);
  j["margins"] = vector_json(sol.margins);
  j["stable"] = sol.stable;
  j["K"] = matrix_json(sol.K);
  j["P"] = matrix_json(sol.P);
  j["W"] = matrix_json(sol.W);
  j["W_tilde"] = matrix_json(sol.W_tilde);
  j["lambda"] = vector_json(sol.lambda);
  if (!sol.l0_trace.empty()) {
    ordered_json stages = ordered_json::array();
    for (const auto & r : sol.l0_trace) {
      stages.push_back({{"stage", r.stage},
                        {"sigma", r.sigma},
                        {"pass", r.pass},
                        {"h_sigma", number_json(r.h_sigma)},
                        {"h_sigma_candidate", number_json(r.h_sigma_candidate)},
                        {"accepted", r.accepted},
                        {"nnz", r.nnz},
                        {"outer_iters", r.outer_iters}});
    }
    j["l0_passes"] = std::move(stages);
  }
  return j;
}

/// Fields of a solution record needed to re-certify it.
struct SolutionRecord
{
  ProblemFile problem;
  std::string status;
  Mat W, K, P;
  Vec lambda;
};

inline SolutionRecord parse_solution_json(const json & j)
{
  if (!j.is_object() || j.value("format", "") != "sparselq-solution") {
    throw ParseError("not a sparselq solution record");
  }
  SolutionRecord rec;
  rec.problem = parse_problem_json(detail::need(j, "problem", "solution"));
  validate_problem(rec.problem);
  const Index n = rec.problem.n, m = rec.problem.m;
  rec.status = detail::need(j, "status", "solution").get<std::string>();
  rec.W = detail::get_matrix(detail::need(j, "W", "solution"), n + m, n + m, "W");
  rec.K = detail::get_matrix(detail::need(j, "K", "solution"), m, n, "K");
  rec.P = detail::get_matrix(detail::need(j, "P", "solution"), m, n, "P");
  rec.lambda = detail::get_vector(detail::need(j, "lambda", "solution"), "lambda");
  return rec;
}

inline SolutionRecord parse_solution(const std::filesystem::path & path)
{
  const std::string text = read_file(path);
  return parse_solution_json(parse_json_text(text, path.string()));
}

/// Write through a temporary sibling and rename, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path & path, const std::string & content)
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) { throw std::runtime_error("cannot write '" + tmp.string() + "'"); }
    out << content;
    if (!out) { throw std::runtime_error("write failed for '" + tmp.string() + "'"); }
  }
  std::filesystem::rename(tmp, path);
}

inline std::string trace_csv(const std::vector<TraceRow> & trace)
{
  std::string s = "iter,theta,alpha,primal_res,dual_res,objective,inner_sweeps,wall_ms\n";
  for (const auto & r : trace) {
    s += std::to_string(r.iter) + ',' + format_number(r.theta) + ',' + format_number(r.alpha) + ','
         + format_number(r.primal_res) + ',' + format_number(r.dual_res) + ',' + format_number(r.objective) + ','
         + std::to_string(r.inner_sweeps) + ',' + format_number(r.wall_ms) + '\n';
  }
  return s;
}

inline std::string l0_trace_csv(const std::vector<L0TraceRow> & trace)
{
  std::string s = "stage,sigma,pass,h_sigma,h_sigma_candidate,accepted,nnz,outer_iters\n";
  for (const auto & r : trace) {
    s += std::to_string(r.stage) + ',' + format_number(r.sigma) + ',' + std::to_string(r.pass) + ','
         + format_number(r.h_sigma) + ',' + format_number(r.h_sigma_candidate) + ',' + (r.accepted ? "1" : "0") + ','
         + std::to_string(r.nnz) + ',' + std::to_string(r.outer_iters) + '\n';
  }
  return s;
}

/// channel, t, x1..xn, u1..um with u = -K x.
inline std::string trajectory_csv(const Trajectory & tr, const Mat & K)
{
  const Index n = K.cols(), m = K.rows();
  std::string s = "channel,t";
  for (Index i = 0; i < n; ++i) { s += ",x" + std::to_string(i + 1); }
  for (Index i = 0; i < m; ++i) { s += ",u" + std::to_string(i + 1); }
  s += '\n';
  for (std::size_t ch = 0; ch < tr.states.size(); ++ch) {
    const Mat & X = tr.states[ch];
    for (Index k = 0; k < X.cols(); ++k) {
      s += std::to_string(ch + 1) + ',' + format_number(tr.t[static_cast<std::size_t>(k)]);
      for (Index i = 0; i < n; ++i) { s += ',' + format_number(X(i, k)); }
      const Vec u = -K * X.col(k);
      for (Index i = 0; i < m; ++i) { s += ',' + format_number(u(i)); }
      s += '\n';
    }
  }
  return s;
}

}  // namespace sparselq::io

#endif  // SPARSELQ_IO_HPP
