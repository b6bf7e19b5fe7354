#include "noether/noether.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace noether {
namespace {

using D = Dual<double>;

void require_control_family(const ProblemSpec& p, const SymmetryFamily& fam) {
  if (fam.context() != SymmetryFamily::Context::Control || fam.n() != p.n() || fam.r() != p.r()) {
    throw ModelError("symmetry family does not match the control problem's dimensions");
  }
}

void require_parameter(const SymmetryFamily& fam, int i) {
  if (i < 0 || i >= fam.rho()) throw ModelError("parameter index out of range");
}

void require_invariance_period(const ProblemSpec& p, int k) {
  const Horizon& h = p.horizon();
  if (k < h.first || k > h.last_control() - 1) {
    throw ModelError("quasi-invariance residuals are defined for k = M..M+N-2 only");
  }
}

Eigen::VectorXd stacked(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

std::vector<D> slots_at(const SymmetryFamily& fam, const Trajectory& t, int k, int i) {
  return fam.seeded_slots<double>(k, stacked(t.state(k), t.control(k)), i);
}

VectorX<D> to_dual(const Eigen::VectorXd& v) { return lift(v); }

}  // namespace

double lagrangian_residual_derivative(const ProblemSpec& p, const SymmetryFamily& fam, const Trajectory& t, int k,
                                      int i) {
  require_control_family(p, fam);
  require_parameter(fam, i);
  require_invariance_period(p, k);
  const std::vector<D> here = slots_at(fam, t, k, i);
  const std::vector<D> next = slots_at(fam, t, k + 1, i);
  const std::span<const D> h(here), nx(next);
  const D moved = p.lagrangian<D>(k, fam.transform<D>(h), fam.control_deformation<D>(h));
  const D base = p.lagrangian<D>(k, to_dual(t.state(k)), to_dual(t.control(k)));
  const D gauge_step = fam.gauge<D>(nx) - fam.gauge<D>(h);
  return (moved - base - gauge_step).inf;
}

Eigen::VectorXd dynamics_residual_derivative(const ProblemSpec& p, const SymmetryFamily& fam, const Trajectory& t,
                                             int k, int i) {
  require_control_family(p, fam);
  require_parameter(fam, i);
  require_invariance_period(p, k);
  const std::vector<D> here = slots_at(fam, t, k, i);
  const std::vector<D> next = slots_at(fam, t, k + 1, i);
  const std::span<const D> h(here), nx(next);
  const VectorX<D> gap =
      p.dynamics<D>(k, fam.transform<D>(h), fam.control_deformation<D>(h)) - fam.transform<D>(nx);
  Eigen::VectorXd out(gap.size());
  for (Eigen::Index c = 0; c < gap.size(); ++c) out[c] = gap[c].inf;
  return out;
}

InvarianceReport check_quasi_invariance(const ProblemSpec& p, const SymmetryFamily& fam,
                                        const std::vector<Trajectory>& trajectories, double tol) {
  require_control_family(p, fam);
  InvarianceReport report;
  report.tol = tol;
  report.parameters.resize(static_cast<std::size_t>(fam.rho()));
  for (auto& par : report.parameters) par.dynamics_residual_deriv = Eigen::VectorXd::Zero(p.n());

  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    const Trajectory& t = trajectories[j];
    check_shape(p, t);
    const double scale = 1.0 + t.x.cwiseAbs().maxCoeff();
    const double gap = dynamics_residual(p, t);
    if (gap > 1e-9 * scale) {
      throw ModelError("trajectory " + std::to_string(j) + " violates the dynamics (residual " +
                       std::to_string(gap) + ")");
    }
    for (int k = p.horizon().first; k <= p.horizon().last_control() - 1; ++k) {
      for (int i = 0; i < fam.rho(); ++i) {
        auto& par = report.parameters[static_cast<std::size_t>(i)];
        const double dl = std::abs(lagrangian_residual_derivative(p, fam, t, k, i));
        const Eigen::VectorXd dd = dynamics_residual_derivative(p, fam, t, k, i).cwiseAbs();
        const double worst_here = std::max(dl, dd.size() ? dd.maxCoeff() : 0.0);
        if (worst_here > report.max_abs) {
          report.max_abs = worst_here;
          par.worst_trajectory = static_cast<int>(j);
          par.worst_k = k;
        }
        par.lagrangian_residual_deriv = std::max(par.lagrangian_residual_deriv, dl);
        par.dynamics_residual_deriv = par.dynamics_residual_deriv.cwiseMax(dd);
      }
    }
  }
  report.pass = report.max_abs <= tol;
  return report;
}

double noether_integral(const SymmetryFamily& fam, const Extremal& e, int k, int i) {
  require_parameter(fam, i);
  const Trajectory& t = e.trajectory;
  if (fam.context() != SymmetryFamily::Context::Control || fam.n() != t.x.rows() || fam.r() != t.u.rows()) {
    throw ModelError("symmetry family does not match the extremal's dimensions");
  }
  const int last = t.first + t.periods();
  if (k < t.first + 1 || k > last) throw ModelError("Noether integral index out of range");
  // At k = M+N the control slot is filled with u(M+N-1); callers only do this
  // for control-free families.
  const Eigen::VectorXd u = t.control(std::min(k, last - 1));
  const std::vector<D> slots = fam.seeded_slots<double>(k, stacked(t.state(k), u), i);
  const std::span<const D> view(slots);
  const VectorX<D> X = fam.transform<D>(view);
  double value = e.psi0 * fam.gauge<D>(view).inf;
  const Eigen::VectorXd psi = e.costate(k);
  for (Eigen::Index c = 0; c < X.size(); ++c) value += psi[c] * X[c].inf;
  return value;
}

ConservationReport::Parameter summarize_sequence(std::vector<double> values, double rel_tol) {
  ConservationReport::Parameter par;
  par.values = std::move(values);
  if (!par.values.empty()) {
    const auto [lo, hi] = std::minmax_element(par.values.begin(), par.values.end());
    par.drift = *hi - *lo;
    double biggest = 0.0;
    for (double v : par.values) biggest = std::max(biggest, std::abs(v));
    par.tol = rel_tol * (1.0 + biggest);
  }
  par.pass = par.drift <= par.tol;
  return par;
}

ConservationReport conservation_report(const SymmetryFamily& fam, const Extremal& e, double rel_tol) {
  ConservationReport report;
  const Trajectory& t = e.trajectory;
  report.first_k = t.first + 1;
  report.last_k = t.first + t.periods() - 1;
  if (fam.transform_control_free()) {
    report.last_k += 1;
  } else {
    report.note = "k = M+N skipped: X or Phi depends on the control";
  }
  for (int i = 0; i < fam.rho(); ++i) {
    std::vector<double> values;
    for (int k = report.first_k; k <= report.last_k; ++k) values.push_back(noether_integral(fam, e, k, i));
    report.parameters.push_back(summarize_sequence(std::move(values), rel_tol));
    report.pass = report.pass && report.parameters.back().pass;
  }
  return report;
}

}  // namespace noether
