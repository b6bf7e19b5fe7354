#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "noether/derivatives.hpp"
#include "noether/expr.hpp"
#include "noether/model.hpp"
#include "noether/noether.hpp"

namespace noether {

/// States x(k) as columns k = first, first+1, ...
struct StateSequence {
  int first = 0;
  Eigen::MatrixXd x;

  int last() const { return first + static_cast<int>(x.cols()) - 1; }
  Eigen::VectorXd at(int k) const { return x.col(k - first); }
};

/// Order-m discrete variational problem: extremise sum_{k=M}^{M+N-1}
/// L(k, x(k), ..., x(k+m)). L reads x0_i .. xm_i, where xj_i is coordinate i
/// of x(k+j). Boundary data fixes x(M..M+m-1) and x(M+N..M+N+m-1), stacked
/// oldest first in `x_start` and `x_end`.
class HOProblem {
 public:
  HOProblem(Horizon horizon, int n, int m, Expr lagrangian, Eigen::VectorXd x_start, Eigen::VectorXd x_end);

  const Horizon& horizon() const { return horizon_; }
  int n() const { return n_; }
  int m() const { return m_; }
  const Expr& lagrangian_expr() const { return lagrangian_; }
  const Eigen::VectorXd& x_start() const { return x_start_; }
  const Eigen::VectorXd& x_end() const { return x_end_; }
  /// k, x0_1..x0_n, ..., xm_1..xm_n
  const std::vector<std::string>& layout() const { return layout_; }

  /// `window` stacks x(k), ..., x(k+m).
  template <typename T>
  T lagrangian(int k, const VectorX<T>& window) const {
    if (window.size() != (m_ + 1) * n_) throw ModelError("stencil window has the wrong length");
    std::vector<T> slots;
    slots.reserve(static_cast<std::size_t>(window.size() + 1));
    slots.emplace_back(static_cast<double>(k));
    for (Eigen::Index a = 0; a < window.size(); ++a) slots.push_back(window[a]);
    return program_(std::span<const T>(slots));
  }

 private:
  Horizon horizon_;
  int n_;
  int m_;
  Expr lagrangian_;
  Eigen::VectorXd x_start_;
  Eigen::VectorXd x_end_;
  std::vector<std::string> layout_;
  Program program_;
};

/// First-order problem: extremise sum_{k=M}^{M+N-1} L(k, x(k), x(k+1)), with
/// L over x1..xn and xp1..xpn (xp = next state).
class CVProblem {
 public:
  CVProblem(Horizon horizon, int n, Expr lagrangian, Eigen::VectorXd x_start, Eigen::VectorXd x_end);

  const Horizon& horizon() const { return horizon_; }
  int n() const { return n_; }
  const Expr& lagrangian_expr() const { return lagrangian_; }
  const Eigen::VectorXd& x_start() const { return x_start_; }
  const Eigen::VectorXd& x_end() const { return x_end_; }

  template <typename T>
  T lagrangian(int k, const VectorX<T>& x, const VectorX<T>& xp) const {
    VectorX<T> window(2 * n_);
    window << x, xp;
    return as_higher_order_.lagrangian<T>(k, window);
  }

  /// The same problem written with stencil variables x0_i, x1_i (m = 1).
  const HOProblem& as_higher_order() const { return as_higher_order_; }

 private:
  Horizon horizon_;
  int n_;
  Expr lagrangian_;
  Eigen::VectorXd x_start_;
  Eigen::VectorXd x_end_;
  HOProblem as_higher_order_;
};

/// r = n, phi = u, free controls, xp renamed to u.
ProblemSpec cv_to_oc(const CVProblem& cv);

/// State x_{j n + i} stands for x^j_i (j < m), control u_i for x^m_i; shift
/// chain dynamics. For m = 1 this is cv_to_oc.
ProblemSpec ho_to_oc(const HOProblem& ho);

/// Original sequence x(M..M+N+m-1) from a trajectory of the reduced problem.
StateSequence sequence_from_oc(const Trajectory& t, int n, int m);

/// Reduced trajectory whose states stack m consecutive x and controls are x(k+m).
Trajectory oc_from_sequence(const StateSequence& s, int m, int periods);

/// dL/dx(k+1, x(k+1), x(k+2)) + dL/dxp(k, x(k), x(k+1)).
Eigen::VectorXd el_residual(const CVProblem& cv, const StateSequence& s, int k);

/// sum_{j=0}^m dL/dx^j at the window starting at k+m-j. Needs x(k..k+2m).
Eigen::VectorXd euler_poisson_residual(const HOProblem& ho, const StateSequence& s, int k);

/// dL/dxp(k-1, x(k-1), x(k)) . dX/ds_i(k, x(k), x(k+1)) - dPhi/ds_i(k, x(k), x(k+1)).
double cv_noether_integral(const CVProblem& cv, const SymmetryFamily& fam, const StateSequence& s, int k, int i);

/// dPhi/ds_i(k) + sum_{j=0}^{m-1} sum_{l=0}^{j} dL/dx^l(k+j-l) . dX/ds_i(k+j).
/// Needs x(k..k+2m-1).
double ho_noether_integral(const HOProblem& ho, const SymmetryFamily& fam, const StateSequence& s, int k, int i);

/// Quasi-invariance of a variational Lagrangian: d/ds_i at s = 0 of
/// L(k, X(k), ..., X(k+m)) - L - (Phi(k+1) - Phi(k)), for every k whose
/// stencil lies inside the sequence. Only the Lagrangian residual exists here.
InvarianceReport check_quasi_invariance(const CVProblem& cv, const SymmetryFamily& fam,
                                        const std::vector<StateSequence>& samples, double tol = 1e-9);
InvarianceReport check_quasi_invariance(const HOProblem& ho, const SymmetryFamily& fam,
                                        const std::vector<StateSequence>& samples, double tol = 1e-9);

/// Sequences x(M..M+N+m-1) with coordinates uniform in [-1, 1].
std::vector<StateSequence> sample_sequences(const Horizon& h, int n, int m, int count, std::uint64_t seed);

/// Solves the Euler-Lagrange equations forward from x(first), x(first+1)
/// by Newton's method on x(k+2). Throws ModelError if a step fails to converge.
StateSequence integrate_el(const CVProblem& cv, const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, int first,
                           int states);

}  // namespace noether
