#include <gtest/gtest.h>

#include <sparselq/sparselq.hpp>

#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sparselq;
namespace fs = std::filesystem;
using sparselq::io::json;

namespace {

fs::path scratch(const std::string & name)
{
  const fs::path p = fs::temp_directory_path() / ("sparselq_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args)
{
  std::ostringstream out, err;
  return cli::run_command(std::move(args), out, err);
}

json example_json() { return json::parse(slurp(oracle::data_path("example1.json"))); }

io::ProblemFile scalar_problem()
{
  json j = {{"n", 1}, {"m", 1}, {"l", 1}, {"q", 2}, {"A", {{-1.0}}}, {"B2", {{1.0}}}, {"B1", {{1.0}}},
            {"C", {{1.0}, {0.0}}}, {"D", {{0.0}, {1.0}}}, {"gamma", 0.1}, {"relaxation", "l1"}};
  return io::parse_problem_json(j);
}

std::size_t line_count(const std::string & s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, ParsesFixtures)
{
  for (const char * f : {"example1.json", "example2.json", "example3.json", "example1_topology.json"}) {
    const io::ProblemFile pf = io::parse_problem(oracle::data_path(f));
    EXPECT_NO_THROW(validate_plant(pf.plant)) << f;
  }
  const io::ProblemFile t = io::parse_problem(oracle::data_path("example1_topology.json"));
  ASSERT_EQ(t.forced_zeros.size(), 2u);
  EXPECT_EQ(t.forced_zeros[0], ForcedZero(0, 2));
}

TEST(Cli, MissingMatrixIsParseError)
{
  json j = example_json();
  j.erase("D");
  EXPECT_THROW(io::parse_problem_json(j), ParseError);
}

TEST(Cli, WrongLengthIsDimensionMismatch)
{
  json j = example_json();
  j["A"] = {1.0, 2.0, 3.0, 4.0};
  EXPECT_THROW(io::parse_problem_json(j), DimensionMismatch);
}

TEST(Cli, UnknownKeyRejected)
{
  json j = example_json();
  j["colour"] = "blue";
  EXPECT_THROW(io::parse_problem_json(j), UnknownKey);
}

TEST(Cli, SyntaxErrorReportsLine)
{
  try {
    io::parse_json_text("{\n\"n\": 1,\n oops\n}", "inline");
    FAIL() << "expected ParseError";
  } catch (const ParseError & e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Cli, NumbersRoundTrip)
{
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) {
    EXPECT_EQ(std::stod(io::format_number(x)), x);
  }
  EXPECT_EQ(io::format_number(-0.0), "0");
}

TEST(Cli, ExitCodesForBadInput)
{
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"solve", "--problem", "/nonexistent/problem.json"}), 2);
  EXPECT_EQ(run({"solve", "--problem", oracle::data_path("example1.json"), "--relaxation", "l7"}), 2);
  EXPECT_EQ(run({"solve", "--problem", oracle::data_path("example1.json"), "--gamma", "-1", "--out",
                 scratch("neg").string()}),
            2);
}

TEST(Cli, ExitCodeForNonConvergence)
{
  const fs::path out = scratch("nc");
  EXPECT_EQ(run({"solve", "--problem", oracle::data_path("example1.json"), "--max-outer", "5", "--out", out.string()}),
            3);
  const std::string trace = slurp(out / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,theta,alpha,primal_res,dual_res,objective,inner_sweeps,wall_ms");
  EXPECT_EQ(line_count(trace), 6u);
}

TEST(Cli, ExitCodeMapping)
{
  Solution s;
  s.status = SolveStatus::Converged;
  s.certified = true;
  EXPECT_EQ(cli::exit_code_of(s), 0);
  s.certified = false;
  EXPECT_EQ(cli::exit_code_of(s), 4);
  s.status = SolveStatus::NotConverged;
  EXPECT_EQ(cli::exit_code_of(s), 3);
}

TEST(Cli, SolveIsDeterministicAndTraceMatchesIterations)
{
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::vector<std::string> base = {"solve", "--problem", oracle::data_path("example3.json"), "--relaxation", "pq"};
  auto with_out = [&](const fs::path & o) {
    auto v = base;
    v.insert(v.end(), {"--out", o.string()});
    return v;
  };
  const int ca = run(with_out(a));
  const int cb = run(with_out(b));
  EXPECT_EQ(ca, cb);
  const std::string ja = slurp(a / "solution.json");
  ASSERT_FALSE(ja.empty());
  EXPECT_EQ(ja, slurp(b / "solution.json"));
  const json j = json::parse(ja);
  EXPECT_EQ(line_count(slurp(a / "trace.csv")), static_cast<std::size_t>(j["iterations"].get<Index>()) + 1);
}

TEST(Cli, SolutionRoundTripsThroughParser)
{
  const io::ProblemFile pf = scalar_problem();
  const Solution s = cli::run_solver(pf);
  const io::SolutionRecord rec = io::parse_solution_json(json::parse(io::solution_json(pf, s).dump()));
  EXPECT_EQ(rec.K, s.K);
  EXPECT_EQ(rec.W, s.W);
  EXPECT_EQ(rec.problem.gamma, pf.gamma);
}

TEST(Cli, VerifyConvergedScalarSolution)
{
  const fs::path out = scratch("verify_scalar");
  const io::ProblemFile pf = scalar_problem();
  const Solution s = cli::run_solver(pf);
  ASSERT_EQ(s.status, SolveStatus::Converged);
  io::write_atomic(out / "solution.json", io::solution_json(pf, s).dump(2));
  EXPECT_EQ(run({"verify", (out / "solution.json").string()}), 0);
}

TEST(Cli, VerifyConvergedExampleThreeSolution)
{
  const fs::path out = scratch("verify_ex3");
  ASSERT_NE(run({"solve", "--problem", oracle::data_path("example3.json"), "--relaxation", "pq", "--out", out.string()}),
            3);
  EXPECT_EQ(run({"verify", (out / "solution.json").string()}), 0);
}

TEST(Cli, VerifyRejectsTamperedGain)
{
  const fs::path out = scratch("verify_tamper");
  const io::ProblemFile pf = scalar_problem();
  const Solution s = cli::run_solver(pf);
  json j = json::parse(io::solution_json(pf, s).dump());
  j["K"][0][0] = 5.0;
  io::write_atomic(out / "solution.json", j.dump());
  EXPECT_EQ(run({"verify", (out / "solution.json").string()}), 4);
}

TEST(Cli, SweepKeepsInputOrder)
{
  const fs::path out = scratch("sweep");
  run({"sweep", "--problem", oracle::data_path("example1.json"), "--gammas", "20,1e-8,5", "--max-outer", "50",
       "--out", out.string()});
  std::istringstream csv(slurp(out / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "gamma,J_upper,J_vertex_max,n_zeros,iters,wall_ms");
  std::vector<double> gammas;
  while (std::getline(csv, line)) { gammas.push_back(std::stod(line.substr(0, line.find(',')))); }
  EXPECT_EQ(gammas, (std::vector<double>{20.0, 1e-8, 5.0}));
}

TEST(Cli, SimulateWritesTrajectory)
{
  const fs::path out = scratch("simulate");
  const fs::path sol = scratch("simulate_sol");
  const io::ProblemFile pf = scalar_problem();
  io::write_atomic(sol / "solution.json", io::solution_json(pf, cli::run_solver(pf)).dump());
  EXPECT_EQ(run({"simulate", "--solution", (sol / "solution.json").string(), "--horizon", "1", "--dt", "0.1", "--out",
                 out.string()}),
            0);
  const std::string csv = slurp(out / "trajectory.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "channel,t,x1,u1");
  EXPECT_EQ(line_count(csv), 12u);
}
