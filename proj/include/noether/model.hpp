#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "noether/derivatives.hpp"
#include "noether/expr.hpp"

namespace noether {

/// Invalid problem data: dimension mismatch, out-of-context variable, bad bounds.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Periods k = first .. first + periods - 1 carry controls; states live on
/// k = first .. first + periods.
struct Horizon {
  int first = 0;
  int periods = 1;

  int last_state() const { return first + periods; }
  int last_control() const { return first + periods - 1; }
};

/// Admissible control set: all of R^r, or a (possibly unbounded) box.
struct ControlSet {
  enum class Kind { Free, Box };
  Kind kind = Kind::Free;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static ControlSet free_set() { return {}; }
  static ControlSet box(Eigen::VectorXd lower, Eigen::VectorXd upper);

  bool is_box() const { return kind == Kind::Box; }
  bool contains(const Eigen::VectorXd& u) const;
  /// Midpoint of the box, clipped to finite values; zero for free sets.
  Eigen::VectorXd center(int r) const;

  template <typename T>
  VectorX<T> project(const VectorX<T>& u) const {
    if (!is_box()) return u;
    VectorX<T> out = u;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      if (value_of(u[j]) < lower[j]) out[j] = T(lower[j]);
      if (value_of(u[j]) > upper[j]) out[j] = T(upper[j]);
    }
    return out;
  }
};

/// `prefix1 .. prefix<count>`, e.g. x1, x2, x3.
std::vector<std::string> indexed_names(const std::string& prefix, int count);

/// Rejects any free variable of `e` not listed in `allowed`.
void require_vocabulary(const Expr& e, std::span<const std::string> allowed, const std::string& where);

/// Discrete-time optimal control problem: minimise sum_k L(k, x(k), u(k))
/// subject to x(k+1) = phi(k, x(k), u(k)), u(k) in the control set and the
/// boundary data. Terminal coordinates may individually be left free.
class ProblemSpec {
 public:
  ProblemSpec(Horizon horizon, int n, int r, Expr lagrangian, std::vector<Expr> dynamics,
              ControlSet omega, Eigen::VectorXd x_start, std::vector<std::optional<double>> x_end);

  const Horizon& horizon() const { return horizon_; }
  int n() const { return n_; }
  int r() const { return r_; }
  const Expr& lagrangian_expr() const { return lagrangian_; }
  const std::vector<Expr>& dynamics_exprs() const { return dynamics_; }
  const ControlSet& control_set() const { return omega_; }
  const Eigen::VectorXd& x_start() const { return x_start_; }
  const std::vector<std::optional<double>>& x_end() const { return x_end_; }

  bool terminal_fixed() const;
  /// Terminal state; throws ModelError when some coordinate is free.
  Eigen::VectorXd x_end_fixed() const;

  /// Slot names for stage functions: k, x1..xn, u1..ur.
  const std::vector<std::string>& layout() const { return layout_; }

  template <typename T>
  T lagrangian(int k, const VectorX<T>& x, const VectorX<T>& u) const {
    const std::vector<T> slots = pack(k, x, u);
    return lagrangian_program_(std::span<const T>(slots));
  }

  template <typename T>
  VectorX<T> dynamics(int k, const VectorX<T>& x, const VectorX<T>& u) const {
    const std::vector<T> slots = pack(k, x, u);
    VectorX<T> next(n_);
    for (int i = 0; i < n_; ++i) next[i] = dynamics_programs_[static_cast<std::size_t>(i)](std::span<const T>(slots));
    return next;
  }

 private:
  template <typename T>
  std::vector<T> pack(int k, const VectorX<T>& x, const VectorX<T>& u) const {
    if (x.size() != n_ || u.size() != r_) throw ModelError("state/control dimension mismatch");
    std::vector<T> slots;
    slots.reserve(static_cast<std::size_t>(1 + n_ + r_));
    slots.emplace_back(static_cast<double>(k));
    for (int i = 0; i < n_; ++i) slots.push_back(x[i]);
    for (int j = 0; j < r_; ++j) slots.push_back(u[j]);
    return slots;
  }

  Horizon horizon_;
  int n_;
  int r_;
  Expr lagrangian_;
  std::vector<Expr> dynamics_;
  ControlSet omega_;
  Eigen::VectorXd x_start_;
  std::vector<std::optional<double>> x_end_;
  std::vector<std::string> layout_;
  Program lagrangian_program_;
  std::vector<Program> dynamics_programs_;
};

/// States as columns k = first..first+N, controls as columns k = first..first+N-1.
struct Trajectory {
  int first = 0;
  Eigen::MatrixXd x;
  Eigen::MatrixXd u;

  int periods() const { return static_cast<int>(u.cols()); }
  Eigen::VectorXd state(int k) const { return x.col(k - first); }
  Eigen::VectorXd control(int k) const { return u.col(k - first); }
};

/// Candidate extremal: trajectory, abnormality multiplier psi0 <= 0 and
/// co-states psi(k) stored as columns k = first+1..first+N.
struct Extremal {
  Trajectory trajectory;
  double psi0 = -1.0;
  Eigen::MatrixXd psi;

  int first() const { return trajectory.first; }
  Eigen::VectorXd costate(int k) const { return psi.col(k - trajectory.first - 1); }
  bool normal() const { return psi0 != 0.0; }
  /// |psi0| + max_k ||psi(k)||_inf > 0.
  bool nontrivial() const;
};

/// Parametric transformation family with gauge term.
///
/// Every stage function takes the slot vector [k, arguments..., s1..s_rho].
/// The argument list depends on where the family is used:
///   control problems:       x1..xn, u1..ur  (with control deformation u(k, s))
///   first-order variations: x1..xn, xp1..xpn
///   order-m variations:     x0_1..x0_n, ..., xm_1..xm_n
class SymmetryFamily {
 public:
  enum class Context { Control, FirstOrder, HigherOrder };

  static SymmetryFamily control(int n, int r, int rho, std::vector<Expr> transform, Expr gauge,
                                std::vector<Expr> control_deformation,
                                std::optional<double> epsilon = std::nullopt);
  static SymmetryFamily first_order(int n, int rho, std::vector<Expr> transform, Expr gauge);
  static SymmetryFamily higher_order(int n, int m, int rho, std::vector<Expr> transform, Expr gauge);
  /// X = x, Phi = 0, u(k, s) = u.
  static SymmetryFamily identity_control(int n, int r);

  Context context() const { return context_; }
  int n() const { return n_; }
  int r() const { return r_; }
  int m() const { return m_; }
  int rho() const { return rho_; }
  std::optional<double> epsilon() const { return epsilon_; }
  const std::vector<Expr>& transform_exprs() const { return transform_; }
  const Expr& gauge_expr() const { return gauge_; }
  const std::vector<Expr>& control_deformation_exprs() const { return control_deformation_; }
  /// [k, arguments..., s1..s_rho]
  const std::vector<std::string>& layout() const { return layout_; }
  int argument_count() const { return static_cast<int>(layout_.size()) - 1 - rho_; }

  /// True when neither X nor Phi reads any control (or next-state) slot.
  bool transform_control_free() const;

  template <typename T>
  VectorX<T> transform(std::span<const T> slots) const {
    VectorX<T> out(n_);
    for (int i = 0; i < n_; ++i) out[i] = transform_programs_[static_cast<std::size_t>(i)](slots);
    return out;
  }
  template <typename T>
  T gauge(std::span<const T> slots) const {
    return gauge_program_(slots);
  }
  template <typename T>
  VectorX<T> control_deformation(std::span<const T> slots) const {
    VectorX<T> out(r_);
    for (int j = 0; j < r_; ++j) out[j] = deformation_programs_[static_cast<std::size_t>(j)](slots);
    return out;
  }

  /// Builds the slot vector [k, args..., s] with s_i seeded by `seed_param`
  /// (infinitesimal 1 on that parameter, all parameters zero).
  template <typename T>
  std::vector<Dual<T>> seeded_slots(int k, const VectorX<T>& args, int seed_param) const {
    if (args.size() != argument_count()) throw ModelError("family argument count mismatch");
    std::vector<Dual<T>> slots;
    slots.reserve(layout_.size());
    slots.emplace_back(static_cast<double>(k));
    for (Eigen::Index a = 0; a < args.size(); ++a) slots.emplace_back(args[a]);
    for (int i = 0; i < rho_; ++i) {
      slots.emplace_back(T(0.0), T(i == seed_param ? 1.0 : 0.0));
    }
    return slots;
  }

 private:
  SymmetryFamily() = default;
  void finish(std::vector<std::string> arguments, std::vector<std::string> identity_slots,
              std::vector<std::string> deformation_identity);

  Context context_ = Context::Control;
  int n_ = 0;
  int r_ = 0;
  int m_ = 0;
  int rho_ = 0;
  std::optional<double> epsilon_;
  std::vector<Expr> transform_;
  Expr gauge_;
  std::vector<Expr> control_deformation_;
  std::vector<std::string> layout_;
  std::vector<Program> transform_programs_;
  Program gauge_program_;
  std::vector<Program> deformation_programs_;
  std::vector<std::string> control_slots_;
};

/// sum_{k} L(k, x(k), u(k)) over the horizon.
double cost(const ProblemSpec& p, const Trajectory& t);

/// Forward recursion of the dynamics. `controls` has one column per period.
/// Throws DomainError naming the period where evaluation failed.
Trajectory rollout(const ProblemSpec& p, const Eigen::MatrixXd& controls, const Eigen::VectorXd& x_start);

/// max_k ||x(k+1) - phi(k, x(k), u(k))||_inf.
double dynamics_residual(const ProblemSpec& p, const Trajectory& t);

/// Dynamics residual plus the largest mismatch against fixed boundary coordinates.
double admissibility_residual(const ProblemSpec& p, const Trajectory& t);

/// Rollouts of uniform random controls in [-1, 1]^r (projected into the
/// control set) from uniformly perturbed copies of x_start.
std::vector<Trajectory> sample_trajectories(const ProblemSpec& p, int count, std::uint64_t seed);

inline constexpr std::uint64_t kDefaultSampleSeed = 0x5EED;

void check_shape(const ProblemSpec& p, const Trajectory& t);

}  // namespace noether
