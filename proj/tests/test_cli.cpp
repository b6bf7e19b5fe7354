#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "noether/cli.hpp"
#include "noether/io.hpp"
#include "noether/pmp.hpp"
#include "support.hpp"

using namespace noether;
using namespace testing_support;
using nlohmann::json;

namespace {

std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "noether_dt_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

struct Run {
  int code;
  json report;
  std::string err;
};

Run run(const std::string& command, const std::string& config, cli::CommandOptions o = {}) {
  o.command = command;
  o.config = fixture(config);
  std::ostringstream err;
  const cli::CommandResult r = cli::run_command(o, err);
  return {r.exit_code, r.report.empty() ? json() : json::parse(r.report), err.str()};
}

int shell(const std::string& args) {
  const std::string cmd = std::string("\"") + NOETHER_DT_EXE + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("solve") {
  const Run lq = run("solve", "lq.ini");
  CHECK(lq.code == cli::kExitOk);
  CHECK(lq.report["solve"]["converged"] == true);
  CHECK(lq.report["solve"]["cost"].get<double>() == doctest::Approx(0.5));
  CHECK(lq.report["maximality"]["ok"] == true);

  const Run worked = run("solve", "section4.ini");
  CHECK(worked.code == cli::kExitOk);
  CHECK(worked.report["solve"]["branch"] == "normal");

  const Run rollout = run("solve", "section4_rollout.ini");
  CHECK(rollout.code == cli::kExitNoConvergence);
  CHECK(rollout.report["solve"]["converged"] == false);
  CHECK(rollout.report["solve"]["abnormal_fallback_engaged"] == true);

  const Run ho = run("solve", "ho_m2.ini");
  CHECK(ho.code == cli::kExitOk);
  CHECK(ho.report["sequence"]["x"][5][0].get<double>() == doctest::Approx(125.0));

  // A free terminal state cannot be solved for.
  CHECK(run("solve", "section4_broken.ini").code == cli::kExitUsage);
}

TEST_CASE("check") {
  const Run good = run("check", "section4.ini");
  CHECK(good.code == cli::kExitOk);
  CHECK(good.report["invariance"]["pass"] == true);
  CHECK(good.report["seed"] == kDefaultSampleSeed);

  const Run bad = run("check", "section4_broken.ini");
  CHECK(bad.code == cli::kExitCheckFailed);
  CHECK(bad.report["invariance"]["max_abs"].get<double>() >= 0.1);

  CHECK(run("check", "section4_identity.ini").code == cli::kExitOk);
  CHECK(run("check", "cv_particle.ini").code == cli::kExitOk);
  CHECK(run("check", "cv_plane.ini").code == cli::kExitOk);
  CHECK(run("check", "ho_m2.ini").code == cli::kExitOk);
  // No family declared.
  CHECK(run("check", "cv_pendulum.ini").code == cli::kExitUsage);

  cli::CommandOptions loose;
  loose.tol = 10.0;
  CHECK(run("check", "section4_broken.ini", loose).code == cli::kExitOk);
  cli::CommandOptions seeded;
  seeded.seed = 99;
  CHECK(run("check", "section4.ini", seeded).report["seed"] == 99);
}

TEST_CASE("noether from the solver and from files") {
  const Run solved = run("noether", "section4.ini");
  CHECK(solved.code == cli::kExitOk);
  CHECK(solved.report["source"] == "solver");
  CHECK(solved.report["conservation"]["pass"] == true);

  CHECK(run("noether", "lq.ini").code == cli::kExitOk);
  CHECK(run("noether", "cv_particle.ini").code == cli::kExitOk);
  CHECK(run("noether", "cv_plane.ini").code == cli::kExitOk);
  CHECK(run("noether", "ho_m2.ini").code == cli::kExitOk);
  CHECK(run("noether", "section4_rollout.ini").code == cli::kExitNoConvergence);

  const SolveResult s = solve_extremal(worked_example(4, fixed({2, 1, 0.5})));
  REQUIRE(s.converged);
  const auto good_path = scratch("worked_extremal.csv");
  const auto bent_path = scratch("worked_bent.csv");
  {
    std::ofstream out(good_path);
    write_extremal_csv(out, s.extremal);
    Extremal bent = s.extremal;
    bent.psi(0, 1) += 0.1;
    std::ofstream out2(bent_path);
    write_extremal_csv(out2, bent);
  }
  cli::CommandOptions from_file;
  from_file.extremal = good_path.string();
  const Run good = run("noether", "section4.ini", from_file);
  CHECK(good.code == cli::kExitOk);
  CHECK(good.report["source"] == "file");
  from_file.extremal = bent_path.string();
  CHECK(run("noether", "section4.ini", from_file).code == cli::kExitCheckFailed);
  from_file.extremal = scratch("missing.csv").string();
  CHECK(run("noether", "section4.ini", from_file).code == cli::kExitUsage);
}

TEST_CASE("el and ep") {
  const Run el = run("el", "cv_particle.ini");
  CHECK(el.code == cli::kExitOk);
  CHECK(el.report["max_abs"].get<double>() <= 1e-8);
  CHECK(el.report["residuals"].size() == 5);
  CHECK(run("el", "cv_pendulum.ini").code == cli::kExitOk);
  CHECK(run("ep", "ho_m2.ini").code == cli::kExitOk);
  CHECK(run("el", "ho_m2.ini").code == cli::kExitUsage);
  CHECK(run("ep", "section4.ini").code == cli::kExitUsage);

  // Squares violate the free-particle Euler-Lagrange equation by -4.
  const auto path = scratch("squares.csv");
  {
    StateSequence sq;
    sq.x.resize(1, 7);
    for (int k = 0; k < 7; ++k) sq.x(0, k) = double(k) * k;
    std::ofstream out(path);
    write_sequence_csv(out, sq);
  }
  cli::CommandOptions o;
  o.extremal = path.string();
  const Run bad = run("el", "cv_particle.ini", o);
  CHECK(bad.code == cli::kExitCheckFailed);
  CHECK(bad.report["max_abs"].get<double>() == doctest::Approx(4.0));
}

TEST_CASE("discover") {
  const Run found = run("discover", "section4.ini");
  CHECK(found.code == cli::kExitOk);
  CHECK(found.report["discovered"] == true);
  CHECK(found.report["verification"]["pass"] == true);
  CHECK(run("discover", "cv_pendulum.ini").code == cli::kExitCheckFailed);
}

TEST_CASE("invalid configurations exit with a usage error") {
  const Run expr = run("solve", "invalid/bad_expression.ini");
  CHECK(expr.code == cli::kExitUsage);
  CHECK(expr.err.find("offset") != std::string::npos);
  CHECK(expr.report.is_null());
  const Run horizon = run("check", "invalid/empty_horizon.ini");
  CHECK(horizon.code == cli::kExitUsage);
  CHECK(horizon.err.find("empty horizon") != std::string::npos);
  CHECK(run("solve", "invalid/bad_variable.ini").code == cli::kExitUsage);
  CHECK(run("solve", "no_such_file.ini").code == cli::kExitUsage);
  CHECK(run("frobnicate", "lq.ini").code == cli::kExitUsage);
}

TEST_CASE("report goes to --out") {
  const auto path = scratch("report.json");
  std::filesystem::remove(path);
  cli::CommandOptions o;
  o.command = "check";
  o.config = fixture("section4.ini");
  o.out = path.string();
  std::ostringstream out, err;
  CHECK(cli::dispatch(o, out, err) == cli::kExitOk);
  CHECK(out.str().empty());
  std::ifstream in(path);
  const json report = json::parse(in);
  CHECK(report["invariance"]["pass"] == true);
  CHECK(report["exit_code"] == 0);
}

TEST_CASE("executable exit codes") {
  CHECK(shell("check " + fixture("section4.ini")) == 0);
  CHECK(shell("check " + fixture("section4_broken.ini")) == 3);
  CHECK(shell("solve " + fixture("section4_rollout.ini")) == 2);
  CHECK(shell("solve " + fixture("invalid/bad_expression.ini")) == 1);
  CHECK(shell("solve") == 1);
  CHECK(shell("bogus " + fixture("lq.ini")) == 1);
  CHECK(shell("check " + fixture("section4.ini") + " --seed notanumber") == 1);
  const auto csv = scratch("lq_extremal.csv");
  std::filesystem::remove(csv);
  CHECK(shell("solve " + fixture("lq.ini") + " --write-extremal " + csv.string()) == 0);
  CHECK(std::filesystem::exists(csv));
  CHECK(shell("noether " + fixture("lq.ini") + " --extremal " + csv.string() + " --tol 1e-10") == 0);
}
