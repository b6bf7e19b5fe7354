#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "noether/config.hpp"
#include "noether/io.hpp"
#include "noether/pmp.hpp"
#include "support.hpp"

using namespace noether;
using namespace testing_support;

namespace {

std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

const char* const kFixtures[] = {"section4.ini",      "section4_rollout.ini", "section4_broken.ini",
                                 "section4_identity.ini", "lq.ini",           "cv_particle.ini",
                                 "cv_pendulum.ini",   "cv_plane.ini",         "ho_m2.ini"};

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* const kMinimal = R"([horizon]
M = 0
N = 2
[dims]
n = 1
r = 1
[lagrangian]
L = u1^2
[dynamics]
phi1 = x1 + u1
[boundary]
x_start = 0
x_end = 1
)";

}  // namespace

TEST_CASE("fixtures parse and survive canonical printing") {
  for (const char* name : kFixtures) {
    INFO(name);
    const ConfigDocument doc = load_config(fixture(name));
    const std::string text = to_ini(doc);
    const ConfigDocument again = parse_config(text);
    CHECK(again == doc);
    CHECK(to_ini(again) == text);
  }
}

TEST_CASE("typed contents of the worked fixture") {
  const ConfigDocument doc = load_config(fixture("section4.ini"));
  CHECK(doc.kind == ProblemKind::Control);
  CHECK(doc.horizon.periods == 4);
  CHECK(doc.n == 3);
  CHECK(doc.r == 2);
  CHECK(doc.lagrangian == parse("u1^2 - u2^2"));
  CHECK(doc.dynamics == exprs({"x2 + u1", "x1 + u2", "x2*u1"}));
  CHECK(doc.x_start == vec({1, 1, 0}));
  CHECK(doc.x_end == fixed({2, 1, 0.5}));
  REQUIRE(doc.symmetry.has_value());
  CHECK(doc.symmetry->X == exprs({"x1 + 2*s1", "x2 + s1", "x3 + s1*x1"}));
  CHECK(doc.symmetry->u == exprs({"u1 + s1", "u2 - s1"}));
  const SymmetryFamily fam = symmetry_family(doc);
  CHECK(fam.gauge_expr() == parse("2*(x1 + x2)*s1"));

  const ConfigDocument ho = load_config(fixture("ho_m2.ini"));
  CHECK(ho.kind == ProblemKind::HigherOrder);
  CHECK(ho.m == 2);
  const ProblemSpec reduced = problem_spec(ho);
  CHECK(reduced.n() == 2);
  CHECK(reduced.r() == 1);
  CHECK_THROWS_AS(cv_problem(ho), ConfigError);
}

TEST_CASE("defaults") {
  const ConfigDocument doc = parse_config(kMinimal);
  CHECK_FALSE(doc.control_set.is_box());
  CHECK(doc.samples == 10);
  CHECK_FALSE(doc.check_tol.has_value());
  CHECK_FALSE(doc.symmetry.has_value());
  CHECK(doc.solver.max_newton_iters == SolverOptions{}.max_newton_iters);
  CHECK_THROWS_AS(symmetry_family(doc), ConfigError);

  const ConfigDocument with_family = parse_config(std::string(kMinimal) + "[symmetry]\nX1 = x1 + s1\n");
  const SymmetryFamily fam = symmetry_family(with_family);
  CHECK(fam.control_deformation_exprs() == exprs({"u1"}));
  CHECK(fam.gauge_expr() == parse("0"));
}

TEST_CASE("boxes, free terminals and solver options") {
  const std::string text = std::string(kMinimal) +
                           "[control_set]\nkind = box\nlower = -inf\nupper = 2.5\n"
                           "[solver]\nmax_newton_iters = 7\nabnormal_fallback = false\nmaximality_grid_points = 5\n"
                           "[check]\nsamples = 4\ntol = 1e-7\n";
  const ConfigDocument doc = parse_config(text);
  REQUIRE(doc.control_set.is_box());
  CHECK(doc.control_set.upper == vec({2.5}));
  CHECK(std::isinf(doc.control_set.lower[0]));
  CHECK(doc.solver.max_newton_iters == 7);
  CHECK_FALSE(doc.solver.abnormal_fallback);
  CHECK(doc.solver.maximality_grid_points == 5);
  CHECK(doc.samples == 4);
  CHECK(doc.check_tol == 1e-7);
  CHECK(parse_config(to_ini(doc)) == doc);

  std::string open = kMinimal;
  open.replace(open.find("x_end = 1"), 9, "x_end = free");
  const ConfigDocument free_end = parse_config(open);
  CHECK_FALSE(free_end.x_end[0].has_value());
  CHECK(parse_config(to_ini(free_end)) == free_end);
}

TEST_CASE("configuration errors name what went wrong") {
  const std::string bad_expr = [] {
    std::ifstream in(fixture("invalid/bad_expression.ini"));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }();
  const std::string msg = error_of(bad_expr);
  CHECK(msg.find("[lagrangian] L") != std::string::npos);
  CHECK(msg.find("offset 1") != std::string::npos);

  CHECK_THROWS_WITH_AS(load_config(fixture("invalid/empty_horizon.ini")), doctest::Contains("empty horizon"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(load_config(fixture("invalid/bad_variable.ini")), doctest::Contains("y1"), ConfigError);
  CHECK_THROWS_AS(load_config(fixture("does_not_exist.ini")), ConfigError);

  CHECK(error_of(std::string(kMinimal) + "[weird]\na = 1\n").find("weird") != std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "[check]\nquux = 1\n").find("quux") != std::string::npos);
  CHECK_FALSE(error_of("[horizon]\nM = 0\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "[boundary]\nx_start = 0, 1\n").empty());
  CHECK_FALSE(error_of("[horizon]\nM = zero\nN = 2\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "[symmetry]\nX1 = x1 + 1\n").empty());
  CHECK_FALSE(error_of("no section = 1\n").empty());
}

TEST_CASE("extremal CSV round trip is bit exact") {
  const SolveResult s = solve_extremal(worked_example(4, fixed({2, 1, 0.5})));
  REQUIRE(s.converged);
  std::stringstream buffer;
  write_extremal_csv(buffer, s.extremal);
  const std::string text = buffer.str();
  CHECK(text.rfind("k,x1,x2,x3,u1,u2,psi0,psi1,psi2,psi3\n", 0) == 0);
  std::istringstream in(text);
  const CsvTable table = read_csv(in);
  CHECK(table.rows.size() == 5);
  CHECK(has_costates(table, 3));
  const Extremal back = extremal_from_csv(table, 3, 2);
  CHECK(back.trajectory.first == s.extremal.trajectory.first);
  CHECK(back.trajectory.x == s.extremal.trajectory.x);
  CHECK(back.trajectory.u == s.extremal.trajectory.u);
  CHECK(back.psi == s.extremal.psi);
  CHECK(back.psi0 == s.extremal.psi0);
}

TEST_CASE("trajectory and sequence CSV") {
  const ProblemSpec p = worked_example(5, all_free(3));
  const Trajectory t = sample_trajectories(p, 1, 3).front();
  std::stringstream a;
  write_trajectory_csv(a, t);
  std::istringstream ain(a.str());
  const CsvTable ta = read_csv(ain);
  CHECK_FALSE(has_costates(ta, 3));
  const Trajectory tb = trajectory_from_csv(ta, 3, 2);
  CHECK(tb.x == t.x);
  CHECK(tb.u == t.u);

  StateSequence s;
  s.first = 2;
  s.x = Eigen::MatrixXd::Random(2, 6);
  std::stringstream b;
  write_sequence_csv(b, s);
  std::istringstream bin(b.str());
  const StateSequence back = sequence_from_csv(read_csv(bin), 2);
  CHECK(back.first == 2);
  CHECK(back.x == s.x);
}

TEST_CASE("malformed CSV") {
  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    try {
      const CsvTable t = read_csv(in);
      extremal_from_csv(t, 1, 1);
    } catch (const FormatError&) {
      return true;
    }
    return false;
  };
  CHECK(fails(""));
  CHECK(fails("k,x1,u1,psi0,psi1\n0,1,abc,-1,\n1,2,,-1,0\n"));
  CHECK(fails("k,x1,u1,psi0,psi1\n0,1,0.5,-1,\n2,2,,-1,0\n"));
  CHECK(fails("k,x1,u1\n0,1,0.5\n1,2,\n"));
  CHECK(fails("k,x1,u1,psi0,psi1\n0,1,0.5,-1\n"));
  CHECK_FALSE(fails("k,x1,u1,psi0,psi1\n0,1,0.5,-1,\n1,2,,-1,0\n"));
}
