#include <cmath>
#include <random>
#include <span>

#include "doctest.h"
#include "noether/derivatives.hpp"
#include "noether/noether.hpp"
#include "noether/pmp.hpp"
#include "support.hpp"

using namespace noether;
using namespace testing_support;

namespace {

std::vector<double> slots(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double s) {
  std::vector<double> out{static_cast<double>(k)};
  out.insert(out.end(), x.data(), x.data() + x.size());
  out.insert(out.end(), u.data(), u.data() + u.size());
  out.push_back(s);
  return out;
}

/// L(k, X, u(s)) - L - (Phi(k+1) - Phi(k)) at a finite s, with plain doubles.
double lagrangian_residual_at(const ProblemSpec& p, const SymmetryFamily& fam, const Trajectory& t, int k,
                              double s) {
  const auto now = slots(k, t.state(k), t.control(k), s);
  const auto next = slots(k + 1, t.state(k + 1), t.control(k + 1), s);
  const Eigen::VectorXd X = fam.transform<double>(std::span<const double>(now));
  const Eigen::VectorXd us = fam.control_deformation<double>(std::span<const double>(now));
  const double dphi = fam.gauge<double>(std::span<const double>(next)) - fam.gauge<double>(std::span<const double>(now));
  return p.lagrangian<double>(k, X, us) - p.lagrangian<double>(k, t.state(k), t.control(k)) - dphi;
}

/// phi(k, X(k), u(s)) - X(k+1) at a finite s.
Eigen::VectorXd dynamics_residual_at(const ProblemSpec& p, const SymmetryFamily& fam, const Trajectory& t, int k,
                                     double s) {
  const auto now = slots(k, t.state(k), t.control(k), s);
  const auto next = slots(k + 1, t.state(k + 1), t.control(k + 1), s);
  const Eigen::VectorXd X = fam.transform<double>(std::span<const double>(now));
  const Eigen::VectorXd us = fam.control_deformation<double>(std::span<const double>(now));
  return p.dynamics<double>(k, X, us) - fam.transform<double>(std::span<const double>(next));
}

Extremal reachable_worked_extremal() {
  const SolveResult s = solve_extremal(worked_example(4, fixed({2, 1, 0.5})));
  REQUIRE(s.converged);
  return s.extremal;
}

}  // namespace

TEST_CASE("residual derivatives of the worked family") {
  const ProblemSpec p = worked_example(10, all_free(3));
  const SymmetryFamily fam = worked_family();
  const SymmetryFamily no_gauge = worked_family("x1 + 2*s1", "0");
  for (const Trajectory& t : sample_trajectories(p, 10, kDefaultSampleSeed)) {
    for (int k = 0; k <= 8; ++k) {
      CHECK(lagrangian_residual_derivative(p, fam, t, k, 0) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
      CHECK(dynamics_residual_derivative(p, fam, t, k, 0).cwiseAbs().maxCoeff() <= 1e-12);
      const double expected = 2 * (t.u(0, k) + t.u(1, k));
      CHECK(lagrangian_residual_derivative(p, no_gauge, t, k, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  const Trajectory t = sample_trajectories(p, 1, 1).front();
  CHECK_THROWS_AS(lagrangian_residual_derivative(p, fam, t, 9, 0), ModelError);
  CHECK_THROWS_AS(dynamics_residual_derivative(p, fam, t, -1, 0), ModelError);
}

TEST_CASE("residual derivatives of the identity family vanish") {
  const ProblemSpec p(Horizon{2, 6}, 2, 1, parse("sin(x1)*u1 + k*x2^2"), exprs({"x2*u1", "exp(0.1*x1)"}),
                      ControlSet::free_set(), vec({0.3, 0.2}), all_free(2));
  const SymmetryFamily id = SymmetryFamily::identity_control(2, 1);
  const auto samples = sample_trajectories(p, 5, 8);
  for (const Trajectory& t : samples) {
    for (int k = 2; k <= 6; ++k) {
      CHECK(lagrangian_residual_derivative(p, id, t, k, 0) == 0.0);
      CHECK(dynamics_residual_derivative(p, id, t, k, 0) == Eigen::VectorXd::Zero(2));
    }
  }
  const InvarianceReport r = check_quasi_invariance(p, id, samples);
  CHECK(r.pass);
  CHECK(r.max_abs == 0.0);
}

TEST_CASE("quasi-invariance of the worked example") {
  const ProblemSpec p = worked_example(10, all_free(3));
  const auto samples = sample_trajectories(p, 10, kDefaultSampleSeed);
  const InvarianceReport good = check_quasi_invariance(p, worked_family(), samples);
  CHECK(good.pass);
  CHECK(good.max_abs <= 1e-12);
  REQUIRE(good.parameters.size() == 1);
  CHECK(good.parameters[0].dynamics_residual_deriv.size() == 3);
  CHECK(good.tol == 1e-9);

  const InvarianceReport bad = check_quasi_invariance(p, worked_family("x1 + s1"), samples);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_abs >= 0.1);
  // phi1 and phi2 both pick up a mismatch of size s; phi3 still closes.
  CHECK(bad.parameters[0].dynamics_residual_deriv[0] == doctest::Approx(1.0));
  CHECK(bad.parameters[0].dynamics_residual_deriv[1] == doctest::Approx(1.0));
  CHECK(bad.parameters[0].dynamics_residual_deriv[2] <= 1e-12);
}

TEST_CASE("invariance checking rejects inadmissible samples") {
  const ProblemSpec p = worked_example(4, all_free(3));
  Trajectory t = sample_trajectories(p, 1, 2).front();
  t.x(2, 3) += 0.5;
  try {
    check_quasi_invariance(p, worked_family(), {t});
    FAIL("expected rejection");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("0.5") != std::string::npos);
  }
}

TEST_CASE("residual derivatives agree with central differences in s") {
  const std::vector<std::pair<ProblemSpec, SymmetryFamily>> cases{
      {worked_example(6, all_free(3)), worked_family("x1 + s1 + 0.3*s1^2*x2", "(x1 - x2)*s1 + s1^2")},
      {ProblemSpec(Horizon{0, 6}, 2, 1, parse("u1^2 + cos(x1)*x2"), exprs({"x2 + u1*x1", "sin(x1) - u1"}),
                   ControlSet::free_set(), vec({0.1, 0.2}), all_free(2)),
       SymmetryFamily::control(2, 1, 1, exprs({"x1*exp(s1)", "x2 + s1*x1*x2"}), parse("s1*k*x1"),
                               exprs({"u1 + s1*u1^2"}))},
  };
  int points = 0;
  for (const auto& [p, fam] : cases) {
    for (const Trajectory& t : sample_trajectories(p, 10, 17)) {
      for (int k = 0; k + 2 <= p.horizon().periods; k += 2) {
        const double h = 1e-6;
        const double dual = lagrangian_residual_derivative(p, fam, t, k, 0);
        const double fd = (lagrangian_residual_at(p, fam, t, k, h) - lagrangian_residual_at(p, fam, t, k, -h)) / (2 * h);
        CHECK(std::abs(dual - fd) <= 1e-6 * (1.0 + std::abs(dual)));
        const Eigen::VectorXd ddual = dynamics_residual_derivative(p, fam, t, k, 0);
        const Eigen::VectorXd dfd =
            (dynamics_residual_at(p, fam, t, k, h) - dynamics_residual_at(p, fam, t, k, -h)) / (2 * h);
        CHECK((ddual - dfd).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + ddual.cwiseAbs().maxCoeff()));
        ++points;
      }
    }
  }
  CHECK(points >= 50);
}

TEST_CASE("the integral of the worked family is the printed closed form") {
  const Extremal e = reachable_worked_extremal();
  const SymmetryFamily fam = worked_family();
  for (int k = 1; k <= 4; ++k) CHECK(noether_integral(fam, e, k, 0) == doctest::Approx(worked_integral(e, k)));
  // Eliminating the multipliers with the maximality condition needs psi3(k) =
  // psi3(k+1) = 0, which the adjoint equation gives for k + 1 < N.
  for (int k = 1; k <= 2; ++k) {
    const Eigen::VectorXd x = e.trajectory.state(k);
    const Eigen::VectorXd u = e.trajectory.control(k);
    const double eliminated = 2 * e.psi0 * ((x[0] + x[1]) + 2 * u[1] - u[0]);
    CHECK(noether_integral(fam, e, k, 0) == doctest::Approx(eliminated).epsilon(1e-9));
  }
}

TEST_CASE("conservation along a computed worked-example extremal") {
  const Extremal e = reachable_worked_extremal();
  const ConservationReport r = conservation_report(worked_family(), e);
  CHECK(r.pass);
  CHECK(r.first_k == 1);
  CHECK(r.last_k == 4);
  CHECK(r.note.empty());
  REQUIRE(r.parameters.size() == 1);
  CHECK(r.parameters[0].values.size() == 4);
  CHECK(r.parameters[0].drift <= r.parameters[0].tol);
  CHECK(r.parameters[0].drift >= 0.0);

  Extremal bent = e;
  bent.psi(0, 1) += 0.1;  // psi1 at k = 2
  const ConservationReport broken = conservation_report(worked_family(), bent);
  CHECK_FALSE(broken.pass);
  CHECK(broken.parameters[0].drift >= 0.05);

  const ConservationReport trivial = conservation_report(SymmetryFamily::identity_control(3, 2), e);
  CHECK(trivial.pass);
  for (double v : trivial.parameters[0].values) CHECK(v == 0.0);
  CHECK(trivial.parameters[0].drift == 0.0);
}

TEST_CASE("families reading the control skip the terminal period") {
  const Extremal e = reachable_worked_extremal();
  const SymmetryFamily reads_u =
      SymmetryFamily::control(3, 2, 1, exprs({"x1 + 2*s1", "x2 + s1", "x3 + s1*x1"}),
                              parse("2*(x1 + x2)*s1 + 0*u1*s1"), exprs({"u1 + s1", "u2 - s1"}));
  const ConservationReport r = conservation_report(reads_u, e);
  CHECK(r.last_k == 3);
  CHECK_FALSE(r.note.empty());
  CHECK(r.pass);
}

TEST_CASE("integrals scale with the multipliers") {
  const Extremal e = reachable_worked_extremal();
  for (const double lambda : {0.5, 3.0, 17.25}) {
    Extremal scaled = e;
    scaled.psi0 *= lambda;
    scaled.psi *= lambda;
    const ConservationReport a = conservation_report(worked_family(), e);
    const ConservationReport b = conservation_report(worked_family(), scaled);
    CHECK(a.pass == b.pass);
    for (std::size_t j = 0; j < a.parameters[0].values.size(); ++j) {
      CHECK(b.parameters[0].values[j] == doctest::Approx(lambda * a.parameters[0].values[j]).epsilon(1e-13));
    }
  }
}

TEST_CASE("the closing control law annihilates the eliminated integral") {
  // u1 = x1, u2 = -x2/2 from x = (1, 1, 0).
  const ProblemSpec p = worked_example(4, all_free(3));
  Trajectory t;
  t.first = 0;
  t.x = Eigen::MatrixXd(3, 5);
  t.u = Eigen::MatrixXd(2, 4);
  t.x.col(0) = vec({1, 1, 0});
  for (int k = 0; k < 4; ++k) {
    const Eigen::VectorXd x = t.x.col(k);
    t.u.col(k) = vec({x[0], -x[1] / 2});
    t.x.col(k + 1) = p.dynamics<double>(k, x, t.u.col(k));
  }
  CHECK(t.state(4) == vec({5.875, 3.4375, 6.90625}));
  for (int k = 0; k < 4; ++k) {
    const Eigen::VectorXd x = t.state(k), u = t.control(k);
    CHECK((x[0] + x[1]) + 2 * u[1] - u[0] == 0.0);
  }

  // The multipliers offered with that law: psi1 = x2/2, psi2 = x1, psi3 = 0.
  // Checked as a candidate extremal rather than assumed to be one.
  Extremal e;
  e.trajectory = t;
  e.psi0 = -1.0;
  e.psi = Eigen::MatrixXd(3, 4);
  for (int k = 1; k <= 4; ++k) e.psi.col(k - 1) = vec({t.x(1, k) / 2, t.x(0, k), 0.0});
  const ResidualReport r = extremal_residuals(worked_example(4, fixed({5.875, 3.4375, 6.90625})), e);
  CHECK(r.dynamics_res == 0.0);
  CHECK(r.adjoint_res > 0.1);
  CHECK(r.stationarity_res > 0.1);
}

TEST_CASE("translation symmetry of the scalar LQ problem") {
  // phi = x + u, L = u^2: X = x + s, u unchanged, no gauge.
  const ProblemSpec p = scalar_lq();
  const SymmetryFamily shift = SymmetryFamily::control(1, 1, 1, exprs({"x1 + s1"}), parse("0"), exprs({"u1"}));
  const ProblemSpec long_lq(Horizon{0, 8}, 1, 1, parse("u1^2"), exprs({"x1 + u1"}), ControlSet::free_set(),
                            vec({0}), fixed({1}));
  CHECK(check_quasi_invariance(long_lq, shift, sample_trajectories(long_lq, 10, kDefaultSampleSeed)).pass);
  for (const ProblemSpec* q : {&p, &long_lq}) {
    const SolveResult s = solve_extremal(*q);
    REQUIRE(s.converged);
    const ConservationReport r = conservation_report(shift, s.extremal);
    CHECK(r.pass);
    for (double v : r.parameters[0].values) CHECK(v == doctest::Approx(s.extremal.costate(1)[0]));
  }
}

TEST_CASE("random linear-quadratic problems with affine symmetries conserve their integrals") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto num = [](double v) { return format_number(v); };
  int solved = 0;
  for (int trial = 0; trial < 15; ++trial) {
    // Dynamics x' = A x + B u with A v = v, cost u^2 + (c . x)^2 with c . v = 0, v = (v1, v2).
    const double v1 = unit(rng), v2 = 1.0 + std::abs(unit(rng));
    const double w1 = unit(rng), w2 = unit(rng);
    // A = I + w q^T with q orthogonal to v.
    const double q1 = -v2, q2 = v1;
    const double a11 = 1 + w1 * q1, a12 = w1 * q2, a21 = w2 * q1, a22 = 1 + w2 * q2;
    const double b1 = unit(rng), b2 = unit(rng);
    const double c1 = 0.5 * q1, c2 = 0.5 * q2;
    const std::string phi1 = num(a11) + "*x1 + " + num(a12) + "*x2 + " + num(b1) + "*u1";
    const std::string phi2 = num(a21) + "*x1 + " + num(a22) + "*x2 + " + num(b2) + "*u1";
    const std::string L = "u1^2 + (" + num(c1) + "*x1 + " + num(c2) + "*x2)^2";
    const ProblemSpec p(Horizon{0, 5}, 2, 1, parse(L), {parse(phi1), parse(phi2)}, ControlSet::free_set(),
                        vec({unit(rng), unit(rng)}), fixed({unit(rng), unit(rng)}));
    const SymmetryFamily fam = SymmetryFamily::control(
        2, 1, 1, {parse("x1 + " + num(v1) + "*s1"), parse("x2 + " + num(v2) + "*s1")}, parse("0"), exprs({"u1"}));
    const InvarianceReport inv = check_quasi_invariance(p, fam, sample_trajectories(p, 10, kDefaultSampleSeed));
    INFO(L, " | ", phi1, " | ", phi2);
    // Printed coefficients round to 17 digits, so the identities hold to rounding.
    CHECK(inv.max_abs <= 1e-9);
    const SolveResult s = solve_extremal(p);
    if (!s.converged) continue;
    ++solved;
    CHECK(conservation_report(fam, s.extremal).pass);
  }
  CHECK(solved >= 12);
}
