#ifndef SPARSELQ_CLI_HPP
#define SPARSELQ_CLI_HPP

/**
 * @file
 * @brief Command-line front end: solve, sweep, simulate and verify.
 *
 * Exit codes: 0 success, 2 parse or validation failure, 3 solve not
 * converged, 4 certification failed, 1 any other failure.
 */

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "l0.hpp"
#include "log.hpp"
#include "model.hpp"
#include "outer.hpp"

namespace sparselq::cli {

enum ExitCode : int { Success = 0, Failure = 1, Invalid = 2, NotConvergedExit = 3, CertificationFailed = 4 };

/// Exit code of one finished solve.
inline int exit_code_of(const Solution & sol)
{
  if (sol.status != SolveStatus::Converged) { return NotConvergedExit; }
  return sol.certified ? Success : CertificationFailed;
}

/// Run the configured relaxation on a validated problem.
inline Solution run_solver(const io::ProblemFile & pf)
{
  const LiftedProblem lp = lift_plant(validate_plant(pf.plant), pf.forced_zeros);
  switch (pf.relaxation) {
    case io::Relaxation::L1:
      return solve_relaxed(lp, RegimeSpec::l1(pf.gamma, pf.weights), io::solver_options(pf.settings));
    case io::Relaxation::PQ:
      return solve_relaxed(lp, RegimeSpec::pq(pf.gamma, pf.weights, pf.pq), io::solver_options(pf.settings));
    case io::Relaxation::L0: return solve_l0(lp, pf.gamma, io::l0_options(pf.settings));
  }
  throw InvalidOption("unknown relaxation");
}

// ---------------------------------------------------------------- verify

struct Check
{
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport
{
  std::vector<Check> checks;
  bool ok() const
  {
    return std::all_of(checks.begin(), checks.end(), [](const Check & c) { return c.pass; });
  }
};

struct VerifyOptions
{
  double feas_tol = 1e-4;
  double cost_tol = 1e-4;
  double kkt_tol = 1e-2;  ///< relative to max(1, gamma * w)
  Index kkt_samples = 16;
};

/**
 * @brief Distance of the gain multiplier from the penalty subdifferential at P.
 *
 * At a saddle point lambda_gain lies in the subdifferential of the penalty at P.
 * Entries are drawn without replacement with the problem seed; forced zeros are skipped.
 */
inline double kkt_gap(const io::ProblemFile & pf,
                      const LiftedProblem & lp,
                      const Mat & P,
                      const Vec & lambda,
                      Index samples,
                      double zero_tol)
{
  if (lambda.size() != lp.op.rows()) { throw DimensionMismatch("multiplier length does not match the constraint rows"); }
  const Mat w = pf.weights.size() ? pf.weights : Mat::Ones(lp.m, lp.n);
  const double gamma = std::max(pf.gamma, SolverOptions{}.min_gamma);
  std::vector<Index> entries;
  for (Index j = 0; j < lp.n; ++j) {
    for (Index i = 0; i < lp.m; ++i) {
      if (std::find(lp.forced_zeros.begin(), lp.forced_zeros.end(), ForcedZero{i, j}) == lp.forced_zeros.end()) {
        entries.push_back(i + j * lp.m);
      }
    }
  }
  std::mt19937_64 rng(pf.seed);
  std::shuffle(entries.begin(), entries.end(), rng);
  entries.resize(std::min<std::size_t>(entries.size(), static_cast<std::size_t>(std::max<Index>(samples, 0))));

  const double scale = std::max(1.0, P.size() ? P.cwiseAbs().maxCoeff() : 0.0);
  double worst = 0.0;
  for (Index k : entries) {
    const double lam = lambda(lp.op.n_diag + k);
    const double x = P(k);
    const double gw = gamma * w(k);
    double lo = 0.0, hi = 0.0;
    const bool zero = std::abs(x) <= zero_tol * scale;
    if (pf.relaxation == io::Relaxation::PQ) {
      if (zero) {
        lo = gw * pf.pq.b1;
        hi = gw * pf.pq.b2;
      } else {
        lo = hi = x > 0.0 ? gw * (pf.pq.a2 * x + pf.pq.b2) : gw * (pf.pq.a1 * x + pf.pq.b1);
      }
    } else {
      lo = zero ? -gw : (x > 0.0 ? gw : -gw);
      hi = zero ? gw : lo;
    }
    const double dist = lam < lo ? lo - lam : (lam > hi ? lam - hi : 0.0);
    worst = std::max(worst, dist / std::max(1.0, gw));
  }
  return worst;
}

/// Re-certify a stored solution from its W, P and multiplier alone.
inline VerifyReport verify_solution(const io::SolutionRecord & rec, const VerifyOptions & opt = {})
{
  const io::ProblemFile & pf = rec.problem;
  const LiftedProblem lp = lift_plant(validate_plant(pf.plant), pf.forced_zeros);
  VerifyReport rep;
  auto add = [&](std::string name, bool pass, std::string detail) {
    rep.checks.push_back({std::move(name), pass, std::move(detail)});
  };

  Mat K;
  try {
    K = recover_gain(rec.W, lp.n, lp.m);
  } catch (const Error & e) {
    add("gain", false, e.what());
    return rep;
  }
  const double kdiff = (K - rec.K).cwiseAbs().maxCoeff();
  add("gain", kdiff <= 1e-9 * std::max(1.0, K.cwiseAbs().maxCoeff()),
      "max |K(W) - K| = " + io::format_number(kdiff));

  double worst_margin = -std::numeric_limits<double>::infinity();
  for (const auto & v : lp.plant.vertices) { worst_margin = std::max(worst_margin, stability_check(v.A, v.B2, K)); }
  const bool stable = worst_margin < 0.0;
  add("stability", stable, "max spectral abscissa = " + io::format_number(worst_margin));

  if (stable) {
    const double j_upper = lp.R.cwiseProduct(rec.W).sum();
    double j_max = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < lp.vertex_count(); ++i) { j_max = std::max(j_max, h2_cost(lp.plant, K, i)); }
    add("gramian_bound", j_upper >= j_max - opt.cost_tol,
        "<R,W> = " + io::format_number(j_upper) + ", max vertex J = " + io::format_number(j_max));
  } else {
    add("gramian_bound", false, "skipped: closed loop not Hurwitz");
  }

  const FeasibilityReport f = feasibility_report(lp, rec.W, rec.P);
  add("feasibility", f.ok(opt.feas_tol),
      "min eig W = " + io::format_number(f.min_eig_W) + ", min eig Psi = " + io::format_number(f.min_eig_psi)
          + ", max |W1 offdiag| = " + io::format_number(f.max_offdiag_W1)
          + ", gain mismatch = " + io::format_number(f.gain_mismatch));

  if (pf.relaxation == io::Relaxation::L0) {
    add("kkt", true, "skipped: the l0 continuation has no fixed convex penalty");
  } else {
    const double gap = kkt_gap(pf, lp, rec.P, rec.lambda, opt.kkt_samples, pf.settings.sparsity_tol);
    add("kkt", gap <= opt.kkt_tol, "max relative subgradient gap = " + io::format_number(gap));
  }
  return rep;
}

// ---------------------------------------------------------------- commands

/// Flag values given on the command line; unset ones leave the problem file untouched.
struct Overrides
{
  std::string problem;
  std::string relaxation;
  std::optional<double> gamma, eps1, eps2, lambda, sigma0, sigma_decay;
  std::optional<Index> max_outer;
  std::optional<std::uint64_t> seed;
  std::vector<double> gammas;
  std::string out = ".";

  void apply(io::ProblemFile & pf) const
  {
    if (!relaxation.empty()) { pf.relaxation = io::parse_relaxation(relaxation); }
    if (gamma) { pf.gamma = *gamma; }
    if (eps1) { pf.settings.eps1 = *eps1; }
    if (eps2) { pf.settings.eps2 = *eps2; }
    if (lambda) { pf.settings.lambda = *lambda; }
    if (sigma0) { pf.settings.sigma0 = *sigma0; }
    if (sigma_decay) { pf.settings.sigma_decay = *sigma_decay; }
    if (max_outer) { pf.settings.max_outer = *max_outer; }
    if (seed) { pf.seed = *seed; }
  }
};

inline io::ProblemFile load_problem(const Overrides & ov)
{
  io::ProblemFile pf = io::parse_problem(ov.problem);
  ov.apply(pf);
  io::validate_problem(pf);
  return pf;
}

inline std::string summary_line(const Solution & sol)
{
  return std::string("status=") + to_string(sol.status) + " certified=" + (sol.certified ? "true" : "false")
         + " iterations=" + std::to_string(sol.iterations) + " J_upper=" + io::format_number(sol.J_upper)
         + " J_vertex_max=" + io::format_number(sol.J_vertex_max) + " n_zeros=" + std::to_string(sol.n_zeros);
}

inline int cmd_solve(const Overrides & ov, std::ostream & out)
{
  const io::ProblemFile pf = load_problem(ov);
  const Solution sol = run_solver(pf);
  const std::filesystem::path dir(ov.out);
  io::write_atomic(dir / "solution.json", io::solution_json(pf, sol).dump(2) + "\n");
  io::write_atomic(dir / "trace.csv", io::trace_csv(sol.trace));
  if (!sol.l0_trace.empty()) { io::write_atomic(dir / "l0_trace.csv", io::l0_trace_csv(sol.l0_trace)); }
  out << summary_line(sol) << '\n';
  if (!sol.certified) { out << "certificate: " << sol.certificate_message << '\n'; }
  return exit_code_of(sol);
}

struct SweepRow
{
  double gamma = 0.0;
  double J_upper = 0.0;
  double J_vertex_max = 0.0;
  Index n_zeros = 0;
  Index iters = 0;
  double wall_ms = 0.0;
  int code = Success;
  std::string error;
};

/// One thread and solver instance per row (at most 64 threads); the table is merged in input order.
inline int cmd_sweep(const Overrides & ov, std::ostream & out, std::ostream & err)
{
  if (ov.gammas.empty()) { throw InvalidOption("--gammas needs at least one value"); }
  const io::ProblemFile base = load_problem(ov);
  for (double g : ov.gammas) {
    if (!(g >= 0.0) || !std::isfinite(g)) { throw InvalidOption("every gamma must be finite and >= 0"); }
  }
  const std::filesystem::path dir(ov.out);
  std::vector<SweepRow> rows(ov.gammas.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min<std::size_t>(rows.size(), 64);

  auto work = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++) {
      SweepRow & r = rows[k];
      r.gamma = ov.gammas[k];
      io::ProblemFile pf = base;
      pf.gamma = r.gamma;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Solution sol = run_solver(pf);
        r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        r.J_upper = sol.J_upper;
        r.J_vertex_max = sol.J_vertex_max;
        r.n_zeros = sol.n_zeros;
        r.iters = sol.iterations;
        r.code = exit_code_of(sol);
        io::write_atomic(dir / "sweep" / ("row_" + std::to_string(k) + ".json"), io::solution_json(pf, sol).dump(2) + "\n");
      } catch (const std::exception & e) {
        r.code = Failure;
        r.error = e.what();
      }
      log::info("sweep row " + std::to_string(k) + " gamma " + io::format_number(r.gamma) + " done");
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) { pool.emplace_back(work); }
  for (auto & th : pool) { th.join(); }

  std::string csv = "gamma,J_upper,J_vertex_max,n_zeros,iters,wall_ms\n";
  int code = Success;
  for (const auto & r : rows) {
    if (!r.error.empty()) {
      err << "gamma " << io::format_number(r.gamma) << ": " << r.error << '\n';
      code = Failure;
      continue;
    }
    csv += io::format_number(r.gamma) + ',' + io::format_number(r.J_upper) + ',' + io::format_number(r.J_vertex_max) + ','
           + std::to_string(r.n_zeros) + ',' + std::to_string(r.iters) + ',' + io::format_number(r.wall_ms) + '\n';
    out << "gamma=" << io::format_number(r.gamma) << " J_upper=" << io::format_number(r.J_upper)
        << " n_zeros=" << r.n_zeros << " iters=" << r.iters << '\n';
    if (code == Success || (code == CertificationFailed && r.code == NotConvergedExit)) {
      code = r.code == Success ? code : r.code;
    }
  }
  io::write_atomic(dir / "sweep.csv", csv);
  return code;
}

inline int cmd_simulate(const Overrides & ov,
                        const std::string & solution_path,
                        double horizon,
                        double dt,
                        Index vertex,
                        std::ostream & out)
{
  io::ProblemFile pf;
  Mat K;
  int code = Success;
  if (!solution_path.empty()) {
    const io::SolutionRecord rec = io::parse_solution(solution_path);
    pf = rec.problem;
    K = rec.K;
  } else {
    if (ov.problem.empty()) { throw InvalidOption("simulate needs --problem or --solution"); }
    pf = load_problem(ov);
    const Solution sol = run_solver(pf);
    K = sol.K;
    code = exit_code_of(sol);
    out << summary_line(sol) << '\n';
  }
  const ValidatedPlant vp = validate_plant(pf.plant);
  if (vertex < 0 || vertex >= static_cast<Index>(vp.vertices.size())) { throw InvalidOption("vertex index out of range"); }
  const Trajectory tr = simulate_impulse(vp, K, horizon, dt, vertex);
  io::write_atomic(std::filesystem::path(ov.out) / "trajectory.csv", io::trajectory_csv(tr, K));
  out << "trajectory: " << tr.states.size() << " channels x " << tr.t.size() << " samples\n";
  return code;
}

inline int cmd_verify(const std::string & solution_path, const VerifyOptions & vo, std::ostream & out)
{
  const io::SolutionRecord rec = io::parse_solution(solution_path);
  const VerifyReport rep = verify_solution(rec, vo);
  for (const auto & c : rep.checks) { out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n'; }
  return rep.ok() ? Success : CertificationFailed;
}

/// Parse `args` (without the program name) and run the selected subcommand.
inline int run_command(std::vector<std::string> args, std::ostream & out = std::cout, std::ostream & err = std::cerr)
{
  CLI::App app{"Sparse static state-feedback LQ synthesis under polytopic uncertainty", "sparselq"};
  app.require_subcommand(1);
  Overrides ov;

  auto add_common = [&](CLI::App * sub, bool need_problem) {
    auto * p = sub->add_option("--problem", ov.problem, "problem JSON file");
    if (need_problem) { p->required(); }
    sub->add_option("--relaxation", ov.relaxation, "l1, pq or l0")->check(CLI::IsMember({"l1", "pq", "l0"}));
    sub->add_option("--gamma", ov.gamma, "sparsity weight");
    sub->add_option("--out", ov.out, "output directory")->capture_default_str();
    sub->add_option("--tol-eps1", ov.eps1, "absolute stopping tolerance");
    sub->add_option("--tol-eps2", ov.eps2, "relative stopping tolerance");
    sub->add_option("--max-outer", ov.max_outer, "outer iteration cap");
    sub->add_option("--lambda", ov.lambda, "l0 anchor parameter");
    sub->add_option("--sigma0", ov.sigma0, "l0 initial surrogate width");
    sub->add_option("--sigma-decay", ov.sigma_decay, "l0 surrogate width decay");
    sub->add_option("--seed", ov.seed, "seed of randomized diagnostics");
  };

  CLI::App * solve = app.add_subcommand("solve", "solve one problem, write solution.json and trace.csv");
  add_common(solve, true);

  CLI::App * sweep = app.add_subcommand("sweep", "solve for several gammas concurrently, write sweep.csv");
  add_common(sweep, true);
  sweep->add_option("--gammas", ov.gammas, "comma-separated gamma values")->delimiter(',')->required();

  std::string sim_solution;
  double horizon = 10.0, dt = 0.01;
  Index vertex = 0;
  CLI::App * simulate = app.add_subcommand("simulate", "impulse responses of the closed loop, write trajectory.csv");
  add_common(simulate, false);
  simulate->add_option("--solution", sim_solution, "take K from a solution file instead of solving");
  simulate->add_option("--horizon", horizon, "simulated time")->capture_default_str();
  simulate->add_option("--dt", dt, "integration step")->capture_default_str();
  simulate->add_option("--vertex", vertex, "plant vertex, 0 is the nominal one")->capture_default_str();

  std::string verify_path;
  VerifyOptions vo;
  CLI::App * verify = app.add_subcommand("verify", "re-certify a solution file");
  verify->add_option("solution", verify_path, "solution JSON file")->required();
  verify->add_option("--feas-tol", vo.feas_tol, "feasibility tolerance")->capture_default_str();
  verify->add_option("--kkt-tol", vo.kkt_tol, "relative subgradient tolerance")->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? Success : Invalid;
  }

  try {
    if (solve->parsed()) { return cmd_solve(ov, out); }
    if (sweep->parsed()) { return cmd_sweep(ov, out, err); }
    if (simulate->parsed()) { return cmd_simulate(ov, sim_solution, horizon, dt, vertex, out); }
    if (verify->parsed()) { return cmd_verify(verify_path, vo, out); }
  } catch (const ParseError & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const DimensionMismatch & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const AssumptionViolated & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const ForcedZeroOutOfRange & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const InvalidOption & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const InvalidPqParams & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const NonPositiveSigma & e) {
    err << "error: " << e.what() << '\n';
    return Invalid;
  } catch (const Error & e) {
    err << "error: " << e.what() << '\n';
    return NotConvergedExit;
  } catch (const std::exception & e) {
    err << "error: " << e.what() << '\n';
    return Failure;
  }
  return Invalid;
}

inline int run_command(int argc, const char * const * argv, std::ostream & out = std::cout, std::ostream & err = std::cerr)
{
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) { args.emplace_back(argv[k]); }
  return run_command(std::move(args), out, err);
}

}  // namespace sparselq::cli

#endif  // SPARSELQ_CLI_HPP
