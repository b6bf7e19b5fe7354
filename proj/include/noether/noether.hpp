#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "noether/model.hpp"

namespace noether {

/// Largest |d delta / d s_i| at s = 0 per parameter, over every sampled
/// trajectory and period k = M..M+N-2.
struct InvarianceReport {
  struct Parameter {
    double lagrangian_residual_deriv = 0.0;
    Eigen::VectorXd dynamics_residual_deriv;  ///< componentwise maxima, length n
    int worst_trajectory = 0;
    int worst_k = 0;
  };
  std::vector<Parameter> parameters;
  double max_abs = 0.0;
  double tol = 0.0;
  bool pass = true;
};

struct ConservationReport {
  struct Parameter {
    std::vector<double> values;  ///< I_i(k) for k = first_k .. last_k
    double drift = 0.0;
    double tol = 0.0;
    bool pass = true;
  };
  int first_k = 0;
  int last_k = 0;
  std::vector<Parameter> parameters;
  bool pass = true;
  /// Set when the endpoint k = M+N was skipped because X or Phi reads u.
  std::string note;
};

/// d/ds_i at s = 0 of L(k, X, u(k,s)) - L(k, x, u) - (Phi(k+1) - Phi(k)).
/// Requires M <= k <= M+N-2.
double lagrangian_residual_derivative(const ProblemSpec& p, const SymmetryFamily& fam, const Trajectory& t, int k,
                                      int i);

/// d/ds_i at s = 0 of phi(k, X, u(k,s)) - X(k+1, x(k+1), u(k+1), s).
/// Requires M <= k <= M+N-2.
Eigen::VectorXd dynamics_residual_derivative(const ProblemSpec& p, const SymmetryFamily& fam, const Trajectory& t,
                                             int k, int i);

/// Throws ModelError naming the residual when a trajectory violates the
/// dynamics. Boundary data is not required to match.
InvarianceReport check_quasi_invariance(const ProblemSpec& p, const SymmetryFamily& fam,
                                        const std::vector<Trajectory>& trajectories, double tol = 1e-9);

/// psi0 dPhi/ds_i + psi(k) . dX/ds_i at s = 0.
double noether_integral(const SymmetryFamily& fam, const Extremal& e, int k, int i);

/// Integral sequences over k = M+1..M+N-1, extended to M+N when X and Phi do
/// not read the control. Passes when drift <= rel_tol (1 + max |I|).
ConservationReport conservation_report(const SymmetryFamily& fam, const Extremal& e, double rel_tol = 1e-8);

/// Drift and tolerance of a single sequence.
ConservationReport::Parameter summarize_sequence(std::vector<double> values, double rel_tol);

}  // namespace noether
