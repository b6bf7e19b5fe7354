#include "noether/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace noether {

ControlSet ControlSet::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size()) throw ModelError("box bounds have different lengths");
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j]) {
      throw ModelError("box bound " + std::to_string(j + 1) + " has lower > upper");
    }
  }
  ControlSet c;
  c.kind = Kind::Box;
  c.lower = std::move(lower);
  c.upper = std::move(upper);
  return c;
}

bool ControlSet::contains(const Eigen::VectorXd& u) const {
  if (!is_box()) return true;
  return ((u.array() >= lower.array()) && (u.array() <= upper.array())).all();
}

Eigen::VectorXd ControlSet::center(int r) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(r);
  if (!is_box()) return c;
  for (int j = 0; j < r; ++j) {
    const bool lo = std::isfinite(lower[j]);
    const bool hi = std::isfinite(upper[j]);
    if (lo && hi) {
      c[j] = 0.5 * (lower[j] + upper[j]);
    } else if (lo) {
      c[j] = std::max(0.0, lower[j]);
    } else if (hi) {
      c[j] = std::min(0.0, upper[j]);
    }
  }
  return c;
}

std::vector<std::string> indexed_names(const std::string& prefix, int count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

void require_vocabulary(const Expr& e, std::span<const std::string> allowed, const std::string& where) {
  for (const std::string& name : free_vars(e)) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      std::ostringstream msg;
      msg << "variable '" << name << "' is not allowed in " << where << " (allowed:";
      for (const auto& a : allowed) msg << ' ' << a;
      msg << ')';
      throw ModelError(msg.str());
    }
  }
}

namespace {

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

ProblemSpec::ProblemSpec(Horizon horizon, int n, int r, Expr lagrangian, std::vector<Expr> dynamics,
                         ControlSet omega, Eigen::VectorXd x_start, std::vector<std::optional<double>> x_end)
    : horizon_(horizon),
      n_(n),
      r_(r),
      lagrangian_(std::move(lagrangian)),
      dynamics_(std::move(dynamics)),
      omega_(std::move(omega)),
      x_start_(std::move(x_start)),
      x_end_(std::move(x_end)) {
  if (horizon_.periods < 1) throw ModelError("empty horizon: N must be positive");
  if (n_ < 1 || r_ < 1) throw ModelError("state and control dimensions must be positive");
  if (static_cast<int>(dynamics_.size()) != n_) throw ModelError("dynamics must have n components");
  if (x_start_.size() != n_) throw ModelError("x_start must have n entries");
  if (static_cast<int>(x_end_.size()) != n_) throw ModelError("x_end must have n entries");
  if (omega_.is_box() && (omega_.lower.size() != r_)) throw ModelError("box bounds must have r entries");

  layout_ = concat({{"k"}, indexed_names("x", n_), indexed_names("u", r_)});
  require_vocabulary(lagrangian_, layout_, "the lagrangian");
  lagrangian_program_ = Program::compile(lagrangian_, layout_);
  for (int i = 0; i < n_; ++i) {
    require_vocabulary(dynamics_[static_cast<std::size_t>(i)], layout_, "phi" + std::to_string(i + 1));
    dynamics_programs_.push_back(Program::compile(dynamics_[static_cast<std::size_t>(i)], layout_));
  }
}

bool ProblemSpec::terminal_fixed() const {
  return std::all_of(x_end_.begin(), x_end_.end(), [](const auto& v) { return v.has_value(); });
}

Eigen::VectorXd ProblemSpec::x_end_fixed() const {
  if (!terminal_fixed()) throw ModelError("terminal state has free coordinates");
  Eigen::VectorXd out(n_);
  for (int i = 0; i < n_; ++i) out[i] = *x_end_[static_cast<std::size_t>(i)];
  return out;
}

bool Extremal::nontrivial() const {
  const double psi_max = psi.size() == 0 ? 0.0 : psi.cwiseAbs().maxCoeff();
  return std::abs(psi0) + psi_max > 0.0;
}

// ---------------------------------------------------------------------------

SymmetryFamily SymmetryFamily::control(int n, int r, int rho, std::vector<Expr> transform, Expr gauge,
                                       std::vector<Expr> control_deformation, std::optional<double> epsilon) {
  if (static_cast<int>(control_deformation.size()) != r) {
    throw ModelError("control deformation must have r components");
  }
  if (epsilon && !(*epsilon > 0.0)) throw ModelError("epsilon must be positive");
  SymmetryFamily f;
  f.context_ = Context::Control;
  f.n_ = n;
  f.r_ = r;
  f.rho_ = rho;
  f.epsilon_ = epsilon;
  f.transform_ = std::move(transform);
  f.gauge_ = std::move(gauge);
  f.control_deformation_ = std::move(control_deformation);
  f.control_slots_ = indexed_names("u", r);
  f.finish(concat({indexed_names("x", n), indexed_names("u", r)}), indexed_names("x", n), indexed_names("u", r));
  return f;
}

SymmetryFamily SymmetryFamily::first_order(int n, int rho, std::vector<Expr> transform, Expr gauge) {
  SymmetryFamily f;
  f.context_ = Context::FirstOrder;
  f.n_ = n;
  f.m_ = 1;
  f.rho_ = rho;
  f.transform_ = std::move(transform);
  f.gauge_ = std::move(gauge);
  f.control_slots_ = indexed_names("xp", n);
  f.finish(concat({indexed_names("x", n), indexed_names("xp", n)}), indexed_names("x", n), {});
  return f;
}

SymmetryFamily SymmetryFamily::higher_order(int n, int m, int rho, std::vector<Expr> transform, Expr gauge) {
  if (m < 1) throw ModelError("order m must be at least 1");
  SymmetryFamily f;
  f.context_ = Context::HigherOrder;
  f.n_ = n;
  f.m_ = m;
  f.rho_ = rho;
  f.transform_ = std::move(transform);
  f.gauge_ = std::move(gauge);
  std::vector<std::string> args;
  for (int j = 0; j <= m; ++j) {
    auto block = indexed_names("x" + std::to_string(j) + "_", n);
    if (j > 0) f.control_slots_.insert(f.control_slots_.end(), block.begin(), block.end());
    args.insert(args.end(), block.begin(), block.end());
  }
  f.finish(std::move(args), indexed_names("x0_", n), {});
  return f;
}

SymmetryFamily SymmetryFamily::identity_control(int n, int r) {
  std::vector<Expr> transform;
  for (const auto& name : indexed_names("x", n)) transform.push_back(Expr::variable(name));
  std::vector<Expr> deformation;
  for (const auto& name : indexed_names("u", r)) deformation.push_back(Expr::variable(name));
  return control(n, r, 1, std::move(transform), Expr::number(0.0), std::move(deformation));
}

bool SymmetryFamily::transform_control_free() const {
  auto uses_control = [&](const Expr& e) {
    const auto vars = free_vars(e);
    return std::any_of(control_slots_.begin(), control_slots_.end(),
                       [&](const std::string& name) { return vars.count(name) > 0; });
  };
  if (uses_control(gauge_)) return false;
  return std::none_of(transform_.begin(), transform_.end(), uses_control);
}

void SymmetryFamily::finish(std::vector<std::string> arguments, std::vector<std::string> identity_slots,
                            std::vector<std::string> deformation_identity) {
  if (n_ < 1) throw ModelError("family dimension must be positive");
  if (rho_ < 1) throw ModelError("rho must be positive");
  if (static_cast<int>(transform_.size()) != n_) throw ModelError("transformation must have n components");

  layout_ = concat({{"k"}, arguments, indexed_names("s", rho_)});
  for (int i = 0; i < n_; ++i) {
    require_vocabulary(transform_[static_cast<std::size_t>(i)], layout_, "X" + std::to_string(i + 1));
    transform_programs_.push_back(Program::compile(transform_[static_cast<std::size_t>(i)], layout_));
  }
  require_vocabulary(gauge_, layout_, "Phi");
  gauge_program_ = Program::compile(gauge_, layout_);
  for (std::size_t j = 0; j < control_deformation_.size(); ++j) {
    require_vocabulary(control_deformation_[j], layout_, "u" + std::to_string(j + 1) + "(k,s)");
    deformation_programs_.push_back(Program::compile(control_deformation_[j], layout_));
  }

  // X(k, ., 0) = x and u(k, 0) = u must hold exactly; checked on seeded samples.
  auto slot_of = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(layout_.begin(), layout_.end(), name) - layout_.begin());
  };
  std::mt19937_64 rng(0x1DE7);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_int_distribution<int> period(0, 9);
  constexpr int kSamples = 32;
  for (int sample = 0; sample < kSamples; ++sample) {
    std::vector<double> slots(layout_.size(), 0.0);
    slots[0] = period(rng);
    for (std::size_t a = 1; a < 1 + arguments.size(); ++a) slots[a] = coord(rng);
    try {
      const VectorX<double> X = transform<double>(slots);
      for (int i = 0; i < n_; ++i) {
        if (X[i] != slots[slot_of(identity_slots[static_cast<std::size_t>(i)])]) {
          throw ModelError("X" + std::to_string(i + 1) + " does not reduce to the identity at s = 0");
        }
      }
      if (!deformation_identity.empty()) {
        const VectorX<double> U = control_deformation<double>(slots);
        for (int j = 0; j < r_; ++j) {
          if (U[j] != slots[slot_of(deformation_identity[static_cast<std::size_t>(j)])]) {
            throw ModelError("u" + std::to_string(j + 1) + "(k,s) does not reduce to u at s = 0");
          }
        }
      }
    } catch (const DomainError&) {
      // Sample outside the expressions' domain; skip it.
    }
  }
}

// ---------------------------------------------------------------------------

void check_shape(const ProblemSpec& p, const Trajectory& t) {
  const int N = p.horizon().periods;
  if (t.first != p.horizon().first || t.x.rows() != p.n() || t.x.cols() != N + 1 || t.u.rows() != p.r() ||
      t.u.cols() != N) {
    throw ModelError("trajectory does not match the problem's horizon and dimensions");
  }
}

double cost(const ProblemSpec& p, const Trajectory& t) {
  check_shape(p, t);
  double total = 0.0;
  for (int k = p.horizon().first; k <= p.horizon().last_control(); ++k) {
    total += p.lagrangian<double>(k, t.state(k), t.control(k));
  }
  return total;
}

Trajectory rollout(const ProblemSpec& p, const Eigen::MatrixXd& controls, const Eigen::VectorXd& x_start) {
  const int N = p.horizon().periods;
  if (controls.rows() != p.r() || controls.cols() != N) {
    throw ModelError("control sequence must be r x N");
  }
  if (x_start.size() != p.n()) throw ModelError("x_start must have n entries");
  Trajectory t;
  t.first = p.horizon().first;
  t.u = controls;
  t.x.resize(p.n(), N + 1);
  t.x.col(0) = x_start;
  for (int idx = 0; idx < N; ++idx) {
    const int k = t.first + idx;
    try {
      t.x.col(idx + 1) = p.dynamics<double>(k, t.x.col(idx), t.u.col(idx));
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (rollout at k = " + std::to_string(k) + ")");
    }
  }
  return t;
}

double dynamics_residual(const ProblemSpec& p, const Trajectory& t) {
  check_shape(p, t);
  double worst = 0.0;
  for (int k = p.horizon().first; k <= p.horizon().last_control(); ++k) {
    const Eigen::VectorXd gap = t.state(k + 1) - p.dynamics<double>(k, t.state(k), t.control(k));
    worst = std::max(worst, gap.cwiseAbs().maxCoeff());
  }
  return worst;
}

double admissibility_residual(const ProblemSpec& p, const Trajectory& t) {
  double worst = dynamics_residual(p, t);
  worst = std::max(worst, (t.state(p.horizon().first) - p.x_start()).cwiseAbs().maxCoeff());
  const Eigen::VectorXd last = t.state(p.horizon().last_state());
  for (int i = 0; i < p.n(); ++i) {
    if (const auto& fixed = p.x_end()[static_cast<std::size_t>(i)]) {
      worst = std::max(worst, std::abs(last[i] - *fixed));
    }
  }
  return worst;
}

std::vector<Trajectory> sample_trajectories(const ProblemSpec& p, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Eigen::VectorXd start = p.x_start();
    for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += unit(rng);
    Eigen::MatrixXd controls(p.r(), p.horizon().periods);
    for (Eigen::Index idx = 0; idx < controls.cols(); ++idx) {
      Eigen::VectorXd u(p.r());
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = unit(rng);
      controls.col(idx) = p.control_set().project<double>(u);
    }
    out.push_back(rollout(p, controls, start));
  }
  return out;
}

}  // namespace noether
