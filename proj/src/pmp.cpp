#include "noether/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseQR>

namespace noether {

double ResidualReport::max() const { return std::max({dynamics_res, adjoint_res, stationarity_res}); }

double hamiltonian(const ProblemSpec& p, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double psi0,
                   const Eigen::VectorXd& psi) {
  return hamiltonian<double>(p, k, x, u, psi0, psi);
}

Eigen::VectorXd adjoint_step(const ProblemSpec& p, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             double psi0, const Eigen::VectorXd& psi_next) {
  return hamiltonian_grad_x<double>(p, k, x, u, psi0, psi_next);
}

Eigen::VectorXd stationarity_residual(const ProblemSpec& p, int k, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u, double psi0, const Eigen::VectorXd& psi_next) {
  return stationarity<double>(p, k, x, u, psi0, psi_next);
}

ResidualReport extremal_residuals(const ProblemSpec& p, const Extremal& e, double tol) {
  const Trajectory& t = e.trajectory;
  check_shape(p, t);
  const int M = p.horizon().first;
  ResidualReport rep;
  double worst = -1.0;
  auto note = [&](double value, int k) {
    if (value > worst) {
      worst = value;
      rep.worst_k = k;
    }
  };
  for (int k = M; k <= p.horizon().last_control(); ++k) {
    const Eigen::VectorXd gap = t.state(k + 1) - p.dynamics<double>(k, t.state(k), t.control(k));
    const double dyn = gap.cwiseAbs().maxCoeff();
    rep.dynamics_res = std::max(rep.dynamics_res, dyn);
    note(dyn, k);
    const Eigen::VectorXd psi_next = e.costate(k + 1);
    const double stat = stationarity_residual(p, k, t.state(k), t.control(k), e.psi0, psi_next).cwiseAbs().maxCoeff();
    rep.stationarity_res = std::max(rep.stationarity_res, stat);
    note(stat, k);
    if (k >= M + 1) {
      const Eigen::VectorXd adj = e.costate(k) - adjoint_step(p, k, t.state(k), t.control(k), e.psi0, psi_next);
      const double a = adj.cwiseAbs().maxCoeff();
      rep.adjoint_res = std::max(rep.adjoint_res, a);
      note(a, k);
    }
  }
  const double boundary = admissibility_residual(p, t);
  if (boundary > rep.dynamics_res) {
    rep.dynamics_res = boundary;
    note(boundary, M);
  }
  rep.maximality_ok = rep.stationarity_res <= tol;
  return rep;
}

MaximalityReport maximality_check(const ProblemSpec& p, const Extremal& e, const SolverOptions& opts, double tol) {
  const Trajectory& t = e.trajectory;
  check_shape(p, t);
  MaximalityReport rep;
  const ControlSet& omega = p.control_set();
  const bool grid = opts.maximality_grid_points > 0 && omega.is_box() && omega.lower.allFinite() &&
                    omega.upper.allFinite();
  rep.grid_checked = grid;
  const int r = p.r();
  for (int k = p.horizon().first; k <= p.horizon().last_control(); ++k) {
    const Eigen::VectorXd x = t.state(k);
    const Eigen::VectorXd u = t.control(k);
    const Eigen::VectorXd psi_next = e.costate(k + 1);
    const double stat = stationarity_residual(p, k, x, u, e.psi0, psi_next).cwiseAbs().maxCoeff();
    if (stat > rep.worst_stationarity) {
      rep.worst_stationarity = stat;
      rep.worst_k = k;
    }
    if (!grid) continue;
    const double h_here = hamiltonian(p, k, x, u, e.psi0, psi_next);
    const int g = std::max(opts.maximality_grid_points, 2);
    std::vector<int> index(static_cast<std::size_t>(r), 0);
    for (;;) {
      Eigen::VectorXd v(r);
      for (int j = 0; j < r; ++j) {
        const double frac = static_cast<double>(index[static_cast<std::size_t>(j)]) / (g - 1);
        v[j] = omega.lower[j] + frac * (omega.upper[j] - omega.lower[j]);
      }
      rep.grid_excess = std::max(rep.grid_excess, hamiltonian(p, k, x, v, e.psi0, psi_next) - h_here);
      int j = 0;
      while (j < r && ++index[static_cast<std::size_t>(j)] == g) index[static_cast<std::size_t>(j++)] = 0;
      if (j == r) break;
    }
  }
  rep.ok = rep.worst_stationarity <= tol && rep.grid_excess <= tol;
  return rep;
}

// ---------------------------------------------------------------------------

NewtonSystem::NewtonSystem(const ProblemSpec& p, double psi0, bool normalize_costate)
    : p_(p), psi0_(psi0), normalize_(normalize_costate), x_start_(p.x_start()), x_end_(p.x_end_fixed()) {
  const int n = p.n();
  const int r = p.r();
  const int N = p.horizon().periods;
  unknowns_ = (N - 1) * n + N * r + N * n;
  equations_ = N * n + N * r + (N - 1) * n + (normalize_ ? 1 : 0);
}

int NewtonSystem::block_offset(int period) const { return period * (p_.r() + 2 * p_.n()); }

int NewtonSystem::row_offset(int period) const {
  if (period == 0) return 0;
  return p_.n() + p_.r() + (period - 1) * (2 * p_.n() + p_.r());
}

int NewtonSystem::u_index(int k) const { return block_offset(k - p_.horizon().first); }

int NewtonSystem::psi_index(int k) const {
  const int period = k - p_.horizon().first - 1;
  if (period < 0) return -1;
  return block_offset(period) + p_.r();
}

int NewtonSystem::x_index(int k) const {
  const int M = p_.horizon().first;
  if (k <= M || k >= p_.horizon().last_state()) return -1;
  return block_offset(k - M - 1) + p_.r() + p_.n();
}

Eigen::VectorXd NewtonSystem::pack(const Extremal& e) const {
  Eigen::VectorXd z(unknowns_);
  const int M = p_.horizon().first;
  for (int k = M; k <= p_.horizon().last_control(); ++k) {
    z.segment(u_index(k), p_.r()) = e.trajectory.control(k);
    z.segment(psi_index(k + 1), p_.n()) = e.costate(k + 1);
    if (x_index(k + 1) >= 0) z.segment(x_index(k + 1), p_.n()) = e.trajectory.state(k + 1);
  }
  return z;
}

Extremal NewtonSystem::unpack(const Eigen::VectorXd& z) const {
  const int M = p_.horizon().first;
  const int N = p_.horizon().periods;
  Extremal e;
  e.psi0 = psi0_;
  e.trajectory.first = M;
  e.trajectory.x.resize(p_.n(), N + 1);
  e.trajectory.u.resize(p_.r(), N);
  e.psi.resize(p_.n(), N);
  e.trajectory.x.col(0) = x_start_;
  e.trajectory.x.col(N) = x_end_;
  for (int idx = 0; idx < N; ++idx) {
    const int k = M + idx;
    e.trajectory.u.col(idx) = z.segment(u_index(k), p_.r());
    e.psi.col(idx) = z.segment(psi_index(k + 1), p_.n());
    if (x_index(k + 1) >= 0) e.trajectory.x.col(idx + 1) = z.segment(x_index(k + 1), p_.n());
  }
  return e;
}

Eigen::VectorXd NewtonSystem::initial_guess(const std::optional<Trajectory>& seed, double costate_fill) const {
  const int N = p_.horizon().periods;
  Extremal e;
  e.psi0 = psi0_;
  if (seed) {
    check_shape(p_, *seed);
    e.trajectory = *seed;
  } else {
    e.trajectory.first = p_.horizon().first;
    e.trajectory.x.resize(p_.n(), N + 1);
    for (int idx = 0; idx <= N; ++idx) {
      const double w = static_cast<double>(idx) / N;
      e.trajectory.x.col(idx) = (1.0 - w) * x_start_ + w * x_end_;
    }
    e.trajectory.u = p_.control_set().center(p_.r()).replicate(1, N);
  }
  e.psi = Eigen::MatrixXd::Constant(p_.n(), N, costate_fill);
  return pack(e);
}

template <typename T>
VectorX<T> NewtonSystem::stage(int k, const VectorX<T>& x, const VectorX<T>& u, const VectorX<T>& psi,
                               const VectorX<T>& psi_next, const VectorX<T>& x_next) const {
  const int n = p_.n();
  const int r = p_.r();
  const bool has_adjoint = k > p_.horizon().first;
  VectorX<T> out(n + r + (has_adjoint ? n : 0));
  const T psi0(psi0_);
  out.head(n) = x_next - p_.dynamics<T>(k, x, u);
  out.segment(n, r) = stationarity<T>(p_, k, x, u, psi0, psi_next);
  if (has_adjoint) out.tail(n) = psi - hamiltonian_grad_x<T>(p_, k, x, u, psi0, psi_next);
  return out;
}

Eigen::VectorXd NewtonSystem::residual(const Eigen::VectorXd& z) const {
  const Extremal e = unpack(z);
  const int M = p_.horizon().first;
  Eigen::VectorXd F(equations_);
  for (int k = M; k <= p_.horizon().last_control(); ++k) {
    const Eigen::VectorXd psi = k > M ? e.costate(k) : Eigen::VectorXd();
    const Eigen::VectorXd block = stage<double>(k, e.trajectory.state(k), e.trajectory.control(k), psi,
                                                e.costate(k + 1), e.trajectory.state(k + 1));
    F.segment(row_offset(k - M), block.size()) = block;
  }
  if (normalize_) F[equations_ - 1] = e.costate(M + 1).squaredNorm() - 1.0;
  return F;
}

Eigen::SparseMatrix<double> NewtonSystem::jacobian(const Eigen::VectorXd& z) const {
  const Extremal e = unpack(z);
  const int M = p_.horizon().first;
  const int n = p_.n();
  const int r = p_.r();
  std::vector<Eigen::Triplet<double>> entries;
  for (int k = M; k <= p_.horizon().last_control(); ++k) {
    const bool has_adjoint = k > M;
    // Local variables [x(k), u(k), psi(k), psi(k+1), x(k+1)] and their global indices.
    std::vector<int> global;
    Eigen::VectorXd local(4 * n + r);
    local << e.trajectory.state(k), e.trajectory.control(k),
        (has_adjoint ? e.costate(k) : Eigen::VectorXd::Zero(n)), e.costate(k + 1), e.trajectory.state(k + 1);
    auto push_block = [&](int start, int size) {
      for (int i = 0; i < size; ++i) global.push_back(start < 0 ? -1 : start + i);
    };
    push_block(x_index(k), n);
    push_block(u_index(k), r);
    push_block(has_adjoint ? psi_index(k) : -1, n);
    push_block(psi_index(k + 1), n);
    push_block(x_index(k + 1), n);

    VectorX<Dual<double>> vars = lift(local);
    const int row0 = row_offset(k - M);
    for (int j = 0; j < vars.size(); ++j) {
      if (global[static_cast<std::size_t>(j)] < 0) continue;
      vars[j].inf = 1.0;
      const VectorX<Dual<double>> out =
          stage<Dual<double>>(k, vars.segment(0, n), vars.segment(n, r),
                              has_adjoint ? VectorX<Dual<double>>(vars.segment(n + r, n)) : VectorX<Dual<double>>(),
                              vars.segment(2 * n + r, n), vars.segment(3 * n + r, n));
      vars[j].inf = 0.0;
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out[i].inf != 0.0) {
          entries.emplace_back(row0 + static_cast<int>(i), global[static_cast<std::size_t>(j)], out[i].inf);
        }
      }
    }
  }
  if (normalize_) {
    const Eigen::VectorXd psi1 = e.costate(M + 1);
    for (int i = 0; i < n; ++i) entries.emplace_back(equations_ - 1, psi_index(M + 1) + i, 2.0 * psi1[i]);
  }
  Eigen::SparseMatrix<double> J(equations_, unknowns_);
  J.setFromTriplets(entries.begin(), entries.end());
  J.makeCompressed();
  return J;
}

// ---------------------------------------------------------------------------

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

SolveResult solve_branch(const ProblemSpec& p, Branch branch, const SolverOptions& opts,
                         const std::optional<Trajectory>& seed) {
  if (!(opts.newton_tol > 0.0) || !(opts.min_step > 0.0) || !(opts.backtrack > 0.0 && opts.backtrack < 1.0)) {
    throw ModelError("solver tolerances must be positive and backtracking factor in (0, 1)");
  }
  const bool abnormal = branch == Branch::Abnormal;
  const NewtonSystem sys(p, abnormal ? 0.0 : -1.0, abnormal);
  Eigen::VectorXd z = sys.initial_guess(seed, abnormal ? 1.0 / std::sqrt(static_cast<double>(p.n())) : 0.0);

  SolveResult result;
  Eigen::VectorXd F = sys.residual(z);
  std::ostringstream why;
  int it = 0;
  for (; it < opts.max_newton_iters; ++it) {
    if (inf_norm(F) <= opts.newton_tol) {
      result.converged = true;
      break;
    }
    const Eigen::SparseMatrix<double> J = sys.jacobian(z);
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.compute(J);
    const int rank = qr.info() == Eigen::Success ? static_cast<int>(qr.rank()) : 0;
    {
      const Eigen::VectorXd diag = Eigen::VectorXd(qr.matrixR().diagonal()).head(rank).cwiseAbs();
      const double lo = rank == sys.unknowns() && rank > 0 ? diag.minCoeff() : 0.0;
      result.condition_estimate = lo > 0.0 ? diag.maxCoeff() / lo : std::numeric_limits<double>::infinity();
    }
    Eigen::VectorXd step;
    if (rank < sys.unknowns()) {
      // Extremals are not isolated here (or the system is inconsistent): take
      // the minimum-norm least-squares step and keep going.
      if (!result.singular_iteration) result.singular_iteration = it;
      const Eigen::MatrixXd dense(J);
      step = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(dense).solve(Eigen::VectorXd(-F));
    } else {
      step = qr.solve(Eigen::VectorXd(-F));
    }
    const double merit = F.squaredNorm();
    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_step) {
      const Eigen::VectorXd trial = z + t * step;
      try {
        const Eigen::VectorXd Ft = sys.residual(trial);
        if (Ft.allFinite() && Ft.squaredNorm() <= (1.0 - 1e-4 * t) * merit) {
          z = trial;
          F = Ft;
          accepted = true;
          break;
        }
      } catch (const DomainError&) {
        // Step left the expressions' domain; shorten it.
      }
      t *= opts.backtrack;
    }
    if (!accepted) {
      why << "line search stalled at iteration " << it << " (residual " << inf_norm(F) << ")";
      break;
    }
  }
  if (!result.converged && inf_norm(F) <= opts.newton_tol) result.converged = true;
  if (!result.converged && why.str().empty()) {
    why << "no convergence after " << it << " iterations (residual " << inf_norm(F) << ")";
  }
  if (!result.converged && result.singular_iteration) {
    why << "; Newton matrix rank-deficient from iteration " << *result.singular_iteration
        << " (condition estimate " << result.condition_estimate << ")";
  }
  result.iterations = it;
  result.extremal = sys.unpack(z);
  result.report = extremal_residuals(p, result.extremal, std::max(opts.newton_tol, 1e-8));
  result.abnormal_fallback_engaged = abnormal;
  if (result.converged && !result.extremal.nontrivial()) {
    result.converged = false;
    why << "converged to the trivial multiplier pair";
  }
  result.message = result.converged ? "converged" : why.str();
  return result;
}

SolveResult solve_extremal(const ProblemSpec& p, const SolverOptions& opts, const std::optional<Trajectory>& seed) {
  if (!p.terminal_fixed()) {
    throw ModelError("solve_extremal requires every terminal coordinate to be fixed");
  }
  SolveResult normal = solve_branch(p, Branch::Normal, opts, seed);
  if (normal.converged || !opts.abnormal_fallback) return normal;

  SolveResult abnormal = solve_branch(p, Branch::Abnormal, opts, seed);
  if (abnormal.converged) {
    abnormal.message = "normal branch failed (" + normal.message + "); converged on the abnormal branch";
    return abnormal;
  }
  // Report the normal branch's best iterate, flagged.
  normal.abnormal_fallback_engaged = true;
  normal.message = "normal branch: " + normal.message + "; abnormal branch: " + abnormal.message;
  return normal;
}

}  // namespace noether
