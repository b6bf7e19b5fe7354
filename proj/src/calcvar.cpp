#include "noether/calcvar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/LU>

namespace noether {
namespace {

using D = Dual<double>;

std::string stencil_name(int j, int i) { return "x" + std::to_string(j) + "_" + std::to_string(i); }

Eigen::VectorXd window(const StateSequence& s, int k, int m) {
  const Eigen::Index n = s.x.rows();
  if (k < s.first || k + m > s.last()) throw ModelError("stencil reaches outside the state sequence");
  Eigen::VectorXd w(n * (m + 1));
  for (int j = 0; j <= m; ++j) w.segment(j * n, n) = s.at(k + j);
  return w;
}

/// dL/dx^l at the window starting at k, all blocks at once.
Eigen::VectorXd window_gradient(const HOProblem& ho, const StateSequence& s, int k) {
  return gradient([&](const VectorX<D>& w) { return ho.lagrangian<D>(k, w); }, window(s, k, ho.m()));
}

void require_variational_family(const SymmetryFamily& fam, int n, int m) {
  using C = SymmetryFamily::Context;
  const bool ok = fam.n() == n && fam.m() == m &&
                  (fam.context() == C::HigherOrder || (fam.context() == C::FirstOrder && m == 1));
  if (!ok) throw ModelError("symmetry family does not match the variational problem");
  if (fam.argument_count() != (m + 1) * n) throw ModelError("symmetry family has the wrong stencil");
}

/// dX/ds_i and dPhi/ds_i at the window starting at k.
struct Generator {
  Eigen::VectorXd dX;
  double dPhi;
};

Generator generator(const SymmetryFamily& fam, const StateSequence& s, int k, int m, int i) {
  if (i < 0 || i >= fam.rho()) throw ModelError("parameter index out of range");
  const std::vector<D> slots = fam.seeded_slots<double>(k, window(s, k, m), i);
  const std::span<const D> view(slots);
  const VectorX<D> X = fam.transform<D>(view);
  Generator g{Eigen::VectorXd(X.size()), fam.gauge<D>(view).inf};
  for (Eigen::Index c = 0; c < X.size(); ++c) g.dX[c] = X[c].inf;
  return g;
}

double variational_residual_derivative(const HOProblem& ho, const SymmetryFamily& fam, const StateSequence& s,
                                       int k, int i) {
  const int m = ho.m();
  const int n = ho.n();
  VectorX<D> moved(n * (m + 1));
  std::vector<D> here;
  for (int j = 0; j <= m; ++j) {
    std::vector<D> slots = fam.seeded_slots<double>(k + j, window(s, k + j, m), i);
    moved.segment(j * n, n) = fam.transform<D>(std::span<const D>(slots));
    if (j == 0) here = std::move(slots);
  }
  const std::vector<D> next = fam.seeded_slots<double>(k + 1, window(s, k + 1, m), i);
  const D gauge_step = fam.gauge<D>(std::span<const D>(next)) - fam.gauge<D>(std::span<const D>(here));
  // L(k, x(k..k+m)) carries no s-dependence.
  return (ho.lagrangian<D>(k, moved) - gauge_step).inf;
}

InvarianceReport variational_invariance(const HOProblem& ho, const SymmetryFamily& fam,
                                        const std::vector<StateSequence>& samples, double tol) {
  require_variational_family(fam, ho.n(), ho.m());
  InvarianceReport report;
  report.tol = tol;
  report.parameters.resize(static_cast<std::size_t>(fam.rho()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const StateSequence& s = samples[j];
    if (s.x.rows() != ho.n()) throw ModelError("state sequence has the wrong dimension");
    for (int k = s.first; k + 2 * ho.m() <= s.last(); ++k) {
      for (int i = 0; i < fam.rho(); ++i) {
        auto& par = report.parameters[static_cast<std::size_t>(i)];
        const double d = std::abs(variational_residual_derivative(ho, fam, s, k, i));
        if (d > report.max_abs) {
          report.max_abs = d;
          par.worst_trajectory = static_cast<int>(j);
          par.worst_k = k;
        }
        par.lagrangian_residual_deriv = std::max(par.lagrangian_residual_deriv, d);
      }
    }
  }
  report.pass = report.max_abs <= tol;
  return report;
}

}  // namespace

HOProblem::HOProblem(Horizon horizon, int n, int m, Expr lagrangian, Eigen::VectorXd x_start,
                     Eigen::VectorXd x_end)
    : horizon_(horizon),
      n_(n),
      m_(m),
      lagrangian_(std::move(lagrangian)),
      x_start_(std::move(x_start)),
      x_end_(std::move(x_end)) {
  if (horizon_.periods < 1) throw ModelError("empty horizon: N must be positive");
  if (n_ < 1) throw ModelError("dimension n must be positive");
  if (m_ < 1) throw ModelError("order m must be at least 1");
  if (x_start_.size() != m_ * n_ || x_end_.size() != m_ * n_) {
    throw ModelError("boundary data must hold m*n values at each end");
  }
  layout_.push_back("k");
  for (int j = 0; j <= m_; ++j) {
    for (int i = 1; i <= n_; ++i) layout_.push_back(stencil_name(j, i));
  }
  require_vocabulary(lagrangian_, layout_, "L");
  program_ = Program::compile(lagrangian_, layout_);
}

namespace {

Expr cv_as_stencil(const Expr& L, int n) {
  std::map<std::string, std::string, std::less<>> names;
  for (int i = 1; i <= n; ++i) {
    names["x" + std::to_string(i)] = stencil_name(0, i);
    names["xp" + std::to_string(i)] = stencil_name(1, i);
  }
  return rename(L, names);
}

const Expr& checked_cv_lagrangian(const Expr& L, int n) {
  std::vector<std::string> allowed{"k"};
  for (const auto& prefix : {"x", "xp"}) {
    for (auto& name : indexed_names(prefix, n)) allowed.push_back(std::move(name));
  }
  require_vocabulary(L, allowed, "L");
  return L;
}

}  // namespace

CVProblem::CVProblem(Horizon horizon, int n, Expr lagrangian, Eigen::VectorXd x_start, Eigen::VectorXd x_end)
    : horizon_(horizon),
      n_(n),
      lagrangian_(std::move(lagrangian)),
      x_start_(std::move(x_start)),
      x_end_(std::move(x_end)),
      as_higher_order_(horizon_, n_, 1, cv_as_stencil(checked_cv_lagrangian(lagrangian_, n_), n_), x_start_,
                       x_end_) {}

ProblemSpec ho_to_oc(const HOProblem& ho) {
  const int n = ho.n();
  const int m = ho.m();
  std::map<std::string, std::string, std::less<>> names;
  for (int j = 0; j <= m; ++j) {
    for (int i = 1; i <= n; ++i) {
      names[stencil_name(j, i)] = j < m ? "x" + std::to_string(j * n + i) : "u" + std::to_string(i);
    }
  }
  std::vector<Expr> dynamics;
  for (int j = 0; j < m; ++j) {
    for (int i = 1; i <= n; ++i) {
      dynamics.push_back(Expr::variable(j + 1 < m ? "x" + std::to_string((j + 1) * n + i) : "u" + std::to_string(i)));
    }
  }
  std::vector<std::optional<double>> x_end(ho.x_end().begin(), ho.x_end().end());
  return ProblemSpec(ho.horizon(), n * m, n, rename(ho.lagrangian_expr(), names), std::move(dynamics),
                     ControlSet::free_set(), ho.x_start(), std::move(x_end));
}

ProblemSpec cv_to_oc(const CVProblem& cv) {
  std::map<std::string, std::string, std::less<>> names;
  std::vector<Expr> dynamics;
  for (int i = 1; i <= cv.n(); ++i) {
    names["xp" + std::to_string(i)] = "u" + std::to_string(i);
    dynamics.push_back(Expr::variable("u" + std::to_string(i)));
  }
  std::vector<std::optional<double>> x_end(cv.x_end().begin(), cv.x_end().end());
  return ProblemSpec(cv.horizon(), cv.n(), cv.n(), rename(cv.lagrangian_expr(), names), std::move(dynamics),
                     ControlSet::free_set(), cv.x_start(), std::move(x_end));
}

StateSequence sequence_from_oc(const Trajectory& t, int n, int m) {
  if (t.x.rows() != n * m || t.u.rows() != n) throw ModelError("trajectory is not an order-m reduction");
  const int N = t.periods();
  StateSequence s;
  s.first = t.first;
  s.x.resize(n, N + m);
  for (int idx = 0; idx <= N; ++idx) s.x.col(idx) = t.x.col(idx).head(n);
  for (int j = 1; j < m; ++j) s.x.col(N + j) = t.x.col(N).segment(j * n, n);
  return s;
}

Trajectory oc_from_sequence(const StateSequence& s, int m, int periods) {
  const Eigen::Index n = s.x.rows();
  if (s.x.cols() < periods + m) throw ModelError("state sequence is too short for the horizon");
  Trajectory t;
  t.first = s.first;
  t.x.resize(n * m, periods + 1);
  t.u.resize(n, periods);
  for (int idx = 0; idx <= periods; ++idx) {
    for (int j = 0; j < m; ++j) t.x.col(idx).segment(j * n, n) = s.x.col(idx + j);
    if (idx < periods) t.u.col(idx) = s.x.col(idx + m);
  }
  return t;
}

Eigen::VectorXd el_residual(const CVProblem& cv, const StateSequence& s, int k) {
  if (k < s.first || k + 2 > s.last()) throw ModelError("Euler-Lagrange residual needs x(k..k+2)");
  const Eigen::VectorXd x0 = s.at(k), x1 = s.at(k + 1), x2 = s.at(k + 2);
  const VectorX<D> x2d = lift(x2), x0d = lift(x0);
  const Eigen::VectorXd dx =
      gradient([&](const VectorX<D>& v) { return cv.lagrangian<D>(k + 1, v, x2d); }, x1);
  const Eigen::VectorXd dxp =
      gradient([&](const VectorX<D>& v) { return cv.lagrangian<D>(k, x0d, v); }, x1);
  return dx + dxp;
}

Eigen::VectorXd euler_poisson_residual(const HOProblem& ho, const StateSequence& s, int k) {
  const int m = ho.m();
  const int n = ho.n();
  if (k < s.first || k + 2 * m > s.last()) throw ModelError("Euler-Poisson residual needs x(k..k+2m)");
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (int j = 0; j <= m; ++j) total += window_gradient(ho, s, k + m - j).segment(j * n, n);
  return total;
}

double cv_noether_integral(const CVProblem& cv, const SymmetryFamily& fam, const StateSequence& s, int k, int i) {
  require_variational_family(fam, cv.n(), 1);
  if (k - 1 < s.first || k + 1 > s.last()) throw ModelError("first-order Noether integral needs x(k-1..k+1)");
  const Eigen::VectorXd prev = s.at(k - 1);
  const VectorX<D> prevd = lift(prev);
  const Eigen::VectorXd momentum =
      gradient([&](const VectorX<D>& v) { return cv.lagrangian<D>(k - 1, prevd, v); }, s.at(k));
  const Generator g = generator(fam, s, k, 1, i);
  return momentum.dot(g.dX) - g.dPhi;
}

double ho_noether_integral(const HOProblem& ho, const SymmetryFamily& fam, const StateSequence& s, int k, int i) {
  const int m = ho.m();
  const int n = ho.n();
  require_variational_family(fam, n, m);
  if (k < s.first || k + 2 * m - 1 > s.last()) throw ModelError("order-m Noether integral needs x(k..k+2m-1)");
  double value = generator(fam, s, k, m, i).dPhi;
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd dX = generator(fam, s, k + j, m, i).dX;
    for (int l = 0; l <= j; ++l) value += window_gradient(ho, s, k + j - l).segment(l * n, n).dot(dX);
  }
  return value;
}

InvarianceReport check_quasi_invariance(const CVProblem& cv, const SymmetryFamily& fam,
                                        const std::vector<StateSequence>& samples, double tol) {
  return variational_invariance(cv.as_higher_order(), fam, samples, tol);
}

InvarianceReport check_quasi_invariance(const HOProblem& ho, const SymmetryFamily& fam,
                                        const std::vector<StateSequence>& samples, double tol) {
  return variational_invariance(ho, fam, samples, tol);
}

std::vector<StateSequence> sample_sequences(const Horizon& h, int n, int m, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<StateSequence> out;
  for (int c = 0; c < count; ++c) {
    StateSequence s;
    s.first = h.first;
    s.x.resize(n, h.periods + m);
    for (Eigen::Index col = 0; col < s.x.cols(); ++col) {
      for (Eigen::Index row = 0; row < n; ++row) s.x(row, col) = unit(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

StateSequence integrate_el(const CVProblem& cv, const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, int first,
                           int states) {
  const int n = cv.n();
  if (x0.size() != n || x1.size() != n) throw ModelError("initial states must have n entries");
  if (states < 2) throw ModelError("need at least two states");
  StateSequence s;
  s.first = first;
  s.x.resize(n, states);
  s.x.col(0) = x0;
  s.x.col(1) = x1;
  for (int col = 2; col < states; ++col) {
    const int k = first + col - 2;
    const Eigen::VectorXd a = s.x.col(col - 2), b = s.x.col(col - 1);
    const VectorX<D> ad = lift(a);
    const Eigen::VectorXd tail = gradient([&](const VectorX<D>& v) { return cv.lagrangian<D>(k, ad, v); }, b);
    // Residual in the unknown z = x(k+2): dL/dx(k+1, b, z) + tail.
    auto residual = [&](const VectorX<D>& z) {
      const VectorX<Dual<D>> zd = lift(z);
      return VectorX<D>(gradient([&](const VectorX<Dual<D>>& v) { return cv.lagrangian<Dual<D>>(k + 1, v, zd); },
                                 VectorX<D>(lift(b))) +
                        lift(tail));
    };
    Eigen::VectorXd z = 2.0 * b - a;
    bool converged = false;
    for (int it = 0; it < 50 && !converged; ++it) {
      VectorX<D> zd = lift(z);
      const VectorX<D> r = residual(zd);
      Eigen::VectorXd F(n);
      for (int c = 0; c < n; ++c) F[c] = r[c].real;
      const Eigen::MatrixXd J = jacobian(residual, z);
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
      if (!lu.isInvertible()) throw ModelError("Euler-Lagrange step is singular at k = " + std::to_string(k));
      const Eigen::VectorXd dz = lu.solve(-F);
      z += dz;
      converged = dz.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + z.cwiseAbs().maxCoeff()) ||
                  F.cwiseAbs().maxCoeff() <= 1e-15;
    }
    if (!converged) throw ModelError("Euler-Lagrange step did not converge at k = " + std::to_string(k));
    s.x.col(col) = z;
  }
  return s;
}

}  // namespace noether
