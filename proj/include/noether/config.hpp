#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "noether/calcvar.hpp"
#include "noether/expr.hpp"
#include "noether/model.hpp"
#include "noether/pmp.hpp"

namespace noether {

/// Malformed or inconsistent configuration text. The message names the
/// section and key (and the line when known).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { Control, FirstOrder, HigherOrder };

struct SymmetrySection {
  int rho = 1;
  std::vector<Expr> X;
  Expr Phi;
  /// Control deformation u(k,s); control problems only.
  std::vector<Expr> u;
  std::optional<double> epsilon;
};

/// Typed contents of a problem file.
///
///   [horizon] M, N          [dims] n, r
///   [lagrangian] L          [dynamics] phi1..phin
///   [cv] L                  [ho] m, L
///   [control_set] kind = free | box, lower, upper
///   [boundary] x_start, x_end   (x_end entries may be "free")
///   [symmetry] rho, X1..Xn, Phi, u1..ur, epsilon
///   [solver] max_newton_iters, newton_tol, backtrack, min_step,
///            abnormal_fallback, maximality_grid_points
///   [check] samples, tol     [discover] basis, max_basis
struct ConfigDocument {
  ProblemKind kind = ProblemKind::Control;
  Horizon horizon;
  int n = 0;
  int r = 0;
  int m = 1;
  Expr lagrangian;
  std::vector<Expr> dynamics;
  ControlSet control_set;
  Eigen::VectorXd x_start;
  std::vector<std::optional<double>> x_end;
  std::optional<SymmetrySection> symmetry;
  SolverOptions solver;
  int samples = 10;
  std::optional<double> check_tol;
  std::optional<std::vector<Expr>> basis;
  int max_basis = 64;

  friend bool operator==(const ConfigDocument& a, const ConfigDocument& b);
};

ConfigDocument parse_config(std::string_view text);
ConfigDocument load_config(const std::string& path);

/// Canonical text; parse_config(to_ini(d)) == d.
std::string to_ini(const ConfigDocument& doc);

/// The optimal control problem, reduced from [cv] / [ho] when present.
ProblemSpec problem_spec(const ConfigDocument& doc);
CVProblem cv_problem(const ConfigDocument& doc);
HOProblem ho_problem(const ConfigDocument& doc);

/// Family in the document's context; throws ConfigError without [symmetry].
SymmetryFamily symmetry_family(const ConfigDocument& doc);

}  // namespace noether
