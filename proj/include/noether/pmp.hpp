#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "noether/derivatives.hpp"
#include "noether/model.hpp"

namespace noether {

/// Residuals of the discrete Hamiltonian system and the stationary form of
/// the maximality condition, as infinity norms over the horizon.
struct ResidualReport {
  double dynamics_res = 0.0;      ///< includes boundary mismatch
  double adjoint_res = 0.0;
  double stationarity_res = 0.0;
  bool maximality_ok = true;
  int worst_k = 0;

  double max() const;
};

struct SolverOptions {
  int max_newton_iters = 100;
  double newton_tol = 1e-10;
  double backtrack = 0.5;
  double min_step = 0x1p-30;
  bool abnormal_fallback = true;
  /// Grid points per control dimension for the optional global maximality
  /// certificate on bounded boxes. 0 disables the grid.
  int maximality_grid_points = 0;
};

template <typename T>
T hamiltonian(const ProblemSpec& p, int k, const VectorX<T>& x, const VectorX<T>& u, const T& psi0,
              const VectorX<T>& psi) {
  const VectorX<T> next = p.dynamics<T>(k, x, u);
  T h = psi0 * p.lagrangian<T>(k, x, u);
  for (Eigen::Index i = 0; i < next.size(); ++i) h += psi[i] * next[i];
  return h;
}

/// dH/dx at (k, x, u, psi0, psi_next).
template <typename T>
VectorX<T> hamiltonian_grad_x(const ProblemSpec& p, int k, const VectorX<T>& x, const VectorX<T>& u,
                              const T& psi0, const VectorX<T>& psi_next) {
  const VectorX<Dual<T>> ud = lift(u);
  const VectorX<Dual<T>> pd = lift(psi_next);
  const Dual<T> p0(psi0);
  return gradient(
      [&](const VectorX<Dual<T>>& xd) { return hamiltonian<Dual<T>>(p, k, xd, ud, p0, pd); }, x);
}

/// dH/du at (k, x, u, psi0, psi_next).
template <typename T>
VectorX<T> hamiltonian_grad_u(const ProblemSpec& p, int k, const VectorX<T>& x, const VectorX<T>& u,
                              const T& psi0, const VectorX<T>& psi_next) {
  const VectorX<Dual<T>> xd = lift(x);
  const VectorX<Dual<T>> pd = lift(psi_next);
  const Dual<T> p0(psi0);
  return gradient(
      [&](const VectorX<Dual<T>>& vd) { return hamiltonian<Dual<T>>(p, k, xd, vd, p0, pd); }, u);
}

/// dH/du for free control sets; u - clamp(u + dH/du) for boxes. Zero exactly
/// where u satisfies the first-order maximality condition over the set.
template <typename T>
VectorX<T> stationarity(const ProblemSpec& p, int k, const VectorX<T>& x, const VectorX<T>& u, const T& psi0,
                        const VectorX<T>& psi_next) {
  const VectorX<T> g = hamiltonian_grad_u<T>(p, k, x, u, psi0, psi_next);
  if (!p.control_set().is_box()) return g;
  const VectorX<T> stepped = u + g;
  return u - p.control_set().project<T>(stepped);
}

double hamiltonian(const ProblemSpec& p, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double psi0,
                   const Eigen::VectorXd& psi);

/// psi(k) implied by the adjoint equation from psi(k+1).
Eigen::VectorXd adjoint_step(const ProblemSpec& p, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             double psi0, const Eigen::VectorXd& psi_next);

Eigen::VectorXd stationarity_residual(const ProblemSpec& p, int k, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u, double psi0, const Eigen::VectorXd& psi_next);

struct MaximalityReport {
  bool ok = true;
  double worst_stationarity = 0.0;
  int worst_k = 0;
  bool grid_checked = false;
  /// Largest H(u_grid) - H(u(k)) found on the grid (<= tol when ok).
  double grid_excess = 0.0;
};

MaximalityReport maximality_check(const ProblemSpec& p, const Extremal& e, const SolverOptions& opts,
                                  double tol = 1e-8);

/// Recomputes all residual families of a candidate extremal.
ResidualReport extremal_residuals(const ProblemSpec& p, const Extremal& e, double tol = 1e-8);

/// The square (normal branch) or overdetermined-by-one (abnormal branch)
/// stacked system solved by Newton's method.
///
/// Unknowns, grouped by period k = M..M+N-1: u(k), psi(k+1), and x(k+1) when
/// k+1 < M+N. Equations per period: dynamics, stationarity, and the adjoint
/// equation for k >= M+1. The abnormal branch appends ||psi(M+1)||^2 - 1.
class NewtonSystem {
 public:
  NewtonSystem(const ProblemSpec& p, double psi0, bool normalize_costate);

  int unknowns() const { return unknowns_; }
  int equations() const { return equations_; }
  double psi0() const { return psi0_; }

  Eigen::VectorXd pack(const Extremal& e) const;
  Extremal unpack(const Eigen::VectorXd& z) const;

  /// Linear interpolation of states, box-center (or zero) controls, and
  /// constant co-states `costate_fill`.
  Eigen::VectorXd initial_guess(const std::optional<Trajectory>& seed, double costate_fill) const;

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const;
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& z) const;

 private:
  int block_offset(int period) const;
  int row_offset(int period) const;
  int x_index(int k) const;
  int u_index(int k) const;
  int psi_index(int k) const;

  template <typename T>
  VectorX<T> stage(int k, const VectorX<T>& x, const VectorX<T>& u, const VectorX<T>& psi,
                   const VectorX<T>& psi_next, const VectorX<T>& x_next) const;

  const ProblemSpec& p_;
  double psi0_;
  bool normalize_;
  Eigen::VectorXd x_start_;
  Eigen::VectorXd x_end_;
  int unknowns_ = 0;
  int equations_ = 0;
};

enum class Branch { Normal, Abnormal };

struct SolveResult {
  Extremal extremal;
  ResidualReport report;
  bool converged = false;
  bool abnormal_fallback_engaged = false;
  int iterations = 0;
  /// First iteration whose Newton matrix was rank-deficient. A converged
  /// result with this set is an extremal that is not locally unique.
  std::optional<int> singular_iteration;
  double condition_estimate = 0.0;
  std::string message;
};

/// Newton iteration on one branch (psi0 = -1, or psi0 = 0 with a co-state
/// normalization solved in least squares).
SolveResult solve_branch(const ProblemSpec& p, Branch branch, const SolverOptions& opts,
                         const std::optional<Trajectory>& seed = std::nullopt);

/// Normal branch first; on failure and when enabled, the abnormal branch.
/// Throws ModelError if some terminal coordinate is free.
SolveResult solve_extremal(const ProblemSpec& p, const SolverOptions& opts = {},
                           const std::optional<Trajectory>& seed = std::nullopt);

}  // namespace noether
