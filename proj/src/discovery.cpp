#include "noether/discovery.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "noether/derivatives.hpp"

namespace noether {

GeneratorAnsatz GeneratorAnsatz::standard(int n, int r, int max_size) {
  const auto xs = indexed_names("x", n);
  const auto us = indexed_names("u", r);
  std::vector<Expr> basis{Expr::number(1.0)};
  for (const auto& x : xs) basis.push_back(Expr::variable(x));
  for (const auto& u : us) basis.push_back(Expr::variable(u));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i; j < xs.size(); ++j) basis.push_back(Expr::variable(xs[i]) * Expr::variable(xs[j]));
  }
  for (const auto& x : xs) {
    for (const auto& u : us) basis.push_back(Expr::variable(x) * Expr::variable(u));
  }
  if (static_cast<int>(basis.size()) > max_size) basis.resize(static_cast<std::size_t>(std::max(max_size, 0)));
  return {std::move(basis)};
}

GeneratorAnsatz GeneratorAnsatz::custom(std::vector<Expr> basis) { return {std::move(basis)}; }

namespace {

using D = Dual<double>;

Expr combination(const std::vector<Expr>& basis, const std::vector<int>& which, const Eigen::VectorXd& coef) {
  std::optional<Expr> sum;
  for (std::size_t b = 0; b < which.size(); ++b) {
    const double c = coef[static_cast<Eigen::Index>(b)];
    if (c == 0.0) continue;
    const Expr& f = basis[static_cast<std::size_t>(which[b])];
    Expr term = f.is_number() ? Expr::number(c * std::get<NumberNode>(f.node().value).value) : Expr::number(c) * f;
    sum = sum ? *sum + term : term;
  }
  return sum ? *sum : Expr::number(0.0);
}

}  // namespace

DiscoveryResult discover(const ProblemSpec& p, const GeneratorAnsatz& ansatz, const std::vector<Trajectory>& samples) {
  const int n = p.n();
  const int r = p.r();
  const auto& basis = ansatz.basis;
  if (basis.empty()) throw ModelError("generator ansatz has no basis functions");
  for (std::size_t b = 0; b < basis.size(); ++b) require_vocabulary(basis[b], p.layout(), "basis function");

  std::vector<Program> programs;
  for (const auto& f : basis) programs.push_back(Program::compile(f, p.layout()));
  std::vector<int> all, gauge;
  for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
    all.push_back(b);
    // A constant gauge has zero forward difference: a trivial symmetry.
    if (!basis[static_cast<std::size_t>(b)].is_number()) gauge.push_back(b);
  }
  const int nb = static_cast<int>(all.size());
  const int ng = static_cast<int>(gauge.size());
  const int cols = (n + r) * nb + ng;

  auto basis_values = [&](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    std::vector<double> slots{static_cast<double>(k)};
    slots.insert(slots.end(), x.data(), x.data() + x.size());
    slots.insert(slots.end(), u.data(), u.data() + u.size());
    Eigen::VectorXd v(nb);
    for (int b = 0; b < nb; ++b) v[b] = programs[static_cast<std::size_t>(b)](std::span<const double>(slots));
    return v;
  };

  std::vector<Eigen::MatrixXd> blocks;
  for (const Trajectory& t : samples) {
    check_shape(p, t);
    for (int k = p.horizon().first; k <= p.horizon().last_control() - 1; ++k) {
      const Eigen::VectorXd x = t.state(k), u = t.control(k);
      const VectorX<D> xd = lift(x), ud = lift(u);
      const Eigen::VectorXd Lx = gradient([&](const VectorX<D>& v) { return p.lagrangian<D>(k, v, ud); }, x);
      const Eigen::VectorXd Lu = gradient([&](const VectorX<D>& v) { return p.lagrangian<D>(k, xd, v); }, u);
      const Eigen::MatrixXd Fx = jacobian([&](const VectorX<D>& v) { return p.dynamics<D>(k, v, ud); }, x);
      const Eigen::MatrixXd Fu = r > 0 ? Eigen::MatrixXd(jacobian(
                                             [&](const VectorX<D>& v) { return p.dynamics<D>(k, xd, v); }, u))
                                       : Eigen::MatrixXd(n, 0);
      const Eigen::VectorXd b0 = basis_values(k, x, u);
      const Eigen::VectorXd b1 = basis_values(k + 1, t.state(k + 1), t.control(k + 1));

      Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(1 + n, cols);
      for (int i = 0; i < n; ++i) rows.block(0, i * nb, 1, nb) = Lx[i] * b0.transpose();
      for (int j = 0; j < r; ++j) rows.block(0, (n + j) * nb, 1, nb) = Lu[j] * b0.transpose();
      for (int g = 0; g < ng; ++g) rows(0, (n + r) * nb + g) = -(b1[gauge[g]] - b0[gauge[g]]);
      for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) rows.block(1 + c, i * nb, 1, nb) += Fx(c, i) * b0.transpose();
        for (int j = 0; j < r; ++j) rows.block(1 + c, (n + j) * nb, 1, nb) += Fu(c, j) * b0.transpose();
        rows.block(1 + c, c * nb, 1, nb) -= b1.transpose();
      }
      blocks.push_back(std::move(rows));
    }
  }

  Eigen::MatrixXd A(static_cast<Eigen::Index>(blocks.size()) * (1 + n), cols);
  for (std::size_t b = 0; b < blocks.size(); ++b) A.middleRows(static_cast<Eigen::Index>(b) * (1 + n), 1 + n) = blocks[b];

  DiscoveryResult result(SymmetryFamily::identity_control(n, r));
  if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0) {
    result.degenerate = true;
    result.discovered = true;
    result.null_dimension = cols;
    result.message = "degenerate system: everything is a symmetry";
    return result;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(cols);
  sigma.head(svd.singularValues().size()) = svd.singularValues();
  const double top = sigma[0];
  result.residual = sigma[cols - 1] / top;
  for (Eigen::Index c = 0; c < cols; ++c) result.null_dimension += sigma[c] / top <= kNullThreshold ? 1 : 0;

  Eigen::VectorXd coef = svd.matrixV().col(cols - 1);
  const double biggest = coef.cwiseAbs().maxCoeff();
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (std::abs(coef[c]) < 1e-13 * biggest) coef[c] = 0.0;
  }
  coef.normalize();
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (coef[c] != 0.0) {
      if (coef[c] < 0.0) coef = -coef;
      break;
    }
  }
  result.coefficients = coef;

  const Expr s = Expr::variable("s1");
  auto deformed = [&](const std::string& name, const Expr& generator) {
    if (generator.is_number() && std::get<NumberNode>(generator.node().value).value == 0.0) {
      return Expr::variable(name);
    }
    return Expr::variable(name) + s * generator;
  };
  std::vector<Expr> X, U;
  for (int i = 0; i < n; ++i) {
    X.push_back(deformed("x" + std::to_string(i + 1), combination(basis, all, coef.segment(i * nb, nb))));
  }
  for (int j = 0; j < r; ++j) {
    U.push_back(deformed("u" + std::to_string(j + 1), combination(basis, all, coef.segment((n + j) * nb, nb))));
  }
  const Expr g = combination(basis, gauge, coef.tail(ng));
  const Expr Phi = g.is_number() ? Expr::number(0.0) : s * g;
  result.family = SymmetryFamily::control(n, r, 1, std::move(X), Phi, std::move(U));
  result.discovered = result.residual <= kDiscoveryThreshold;
  result.message = result.discovered ? "symmetry found" : "no symmetry in the ansatz span";
  if (result.null_dimension > 1) {
    result.message += " (null space of dimension " + std::to_string(result.null_dimension) + ")";
  }
  return result;
}

}  // namespace noether
