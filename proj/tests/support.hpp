#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "noether/calcvar.hpp"
#include "noether/expr.hpp"
#include "noether/model.hpp"

namespace testing_support {

using noether::ControlSet;
using noether::Expr;
using noether::Horizon;
using noether::ProblemSpec;
using noether::SymmetryFamily;
using noether::parse;

inline std::vector<Expr> exprs(std::initializer_list<const char*> texts) {
  std::vector<Expr> out;
  for (const char* t : texts) out.push_back(parse(t));
  return out;
}

inline std::vector<std::optional<double>> fixed(std::initializer_list<double> values) {
  return {values.begin(), values.end()};
}

inline std::vector<std::optional<double>> all_free(int n) { return std::vector<std::optional<double>>(n); }

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

/// Three states, two free controls: L = u1^2 - u2^2, phi = (x2 + u1, x1 + u2, x2 u1).
inline ProblemSpec worked_example(int periods, std::vector<std::optional<double>> x_end,
                                  Eigen::VectorXd x_start = vec({1.0, 1.0, 0.0})) {
  return ProblemSpec(Horizon{0, periods}, 3, 2, parse("u1^2 - u2^2"), exprs({"x2 + u1", "x1 + u2", "x2*u1"}),
                     ControlSet::free_set(), std::move(x_start), std::move(x_end));
}

/// X = (x1 + 2s, x2 + s, x3 + s x1), u(s) = (u1 + s, u2 - s), Phi = 2 (x1 + x2) s.
inline SymmetryFamily worked_family(const char* x1 = "x1 + 2*s1", const char* gauge = "2*(x1 + x2)*s1") {
  return SymmetryFamily::control(3, 2, 1, exprs({x1, "x2 + s1", "x3 + s1*x1"}), parse(gauge),
                                 exprs({"u1 + s1", "u2 - s1"}));
}

/// n = r = 1, L = u^2, phi = x + u, x(0) = 0, x(2) = 1.
inline ProblemSpec scalar_lq() {
  return ProblemSpec(Horizon{0, 2}, 1, 1, parse("u1^2"), exprs({"x1 + u1"}), ControlSet::free_set(), vec({0.0}),
                     fixed({1.0}));
}

/// 2 (x1 + x2) psi0 + 2 psi1 + psi2 + psi3 x1.
inline double worked_integral(const noether::Extremal& e, int k) {
  const Eigen::VectorXd x = e.trajectory.state(k);
  const Eigen::VectorXd p = e.costate(k);
  return 2.0 * e.psi0 * (x[0] + x[1]) + 2.0 * p[0] + p[1] + p[2] * x[0];
}

inline double relative_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace testing_support
