#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "noether/expr.hpp"
#include "noether/model.hpp"

namespace noether {

/// Basis functions of (k, x, u) for the one-parameter ansatz
///   X = x + s a(k,x,u),  u(k,s) = u + s b(k,x,u),  Phi = s g(k,x,u)
/// with a, b, g linear combinations of the basis.
struct GeneratorAnsatz {
  std::vector<Expr> basis;

  /// 1, x_j, u_j, x_i x_j (i <= j), x_i u_j, truncated to `max_size` entries.
  static GeneratorAnsatz standard(int n, int r, int max_size = 64);
  static GeneratorAnsatz custom(std::vector<Expr> basis);
};

struct DiscoveryResult {
  explicit DiscoveryResult(SymmetryFamily f) : family(std::move(f)) {}

  SymmetryFamily family;
  /// sigma_min / sigma_max of the linear system.
  double residual = 0.0;
  /// Number of normalized singular values at or below the null threshold.
  int null_dimension = 0;
  /// The system was identically zero: every generator in the span qualifies.
  bool degenerate = false;
  bool discovered = false;
  /// Unit-norm coefficients laid out as [a_1..a_n, b_1..b_r, g], each block one
  /// entry per basis function (the constant is absent from g).
  Eigen::VectorXd coefficients;
  std::string message;
};

inline constexpr double kDiscoveryThreshold = 1e-8;
inline constexpr double kNullThreshold = 1e-10;

/// Least-squares null direction of the linearised quasi-invariance conditions
/// over all samples and periods k = M..M+N-2.
DiscoveryResult discover(const ProblemSpec& p, const GeneratorAnsatz& ansatz, const std::vector<Trajectory>& samples);

}  // namespace noether
