#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "noether/dual.hpp"

namespace noether {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Lift a vector into duals with the given direction as infinitesimal part.
template <typename Scalar, typename Derived>
VectorX<Dual<Scalar>> lift(const VectorX<Scalar>& point, const Eigen::MatrixBase<Derived>& direction) {
  VectorX<Dual<Scalar>> z(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) z[i] = Dual<Scalar>(point[i], direction[i]);
  return z;
}

/// Lift a vector into duals with zero infinitesimal part.
template <typename Scalar>
VectorX<Dual<Scalar>> lift(const VectorX<Scalar>& point) {
  VectorX<Dual<Scalar>> z(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) z[i] = Dual<Scalar>(point[i]);
  return z;
}

/// grad f(point) . direction, in one dual pass. `f` must accept a dual vector.
template <typename Scalar, typename F>
Scalar directional_derivative(F&& f, const VectorX<Scalar>& point, const VectorX<Scalar>& direction) {
  if (point.size() != direction.size()) {
    throw std::invalid_argument("direction length does not match point length");
  }
  return f(lift(point, direction)).inf;
}

/// Gradient by one dual pass per coordinate.
template <typename Scalar, typename F>
VectorX<Scalar> gradient(F&& f, const VectorX<Scalar>& point) {
  VectorX<Scalar> g(point.size());
  VectorX<Dual<Scalar>> z = lift(point);
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    z[i].inf = Scalar(1.0);
    g[i] = f(z).inf;
    z[i].inf = Scalar(0.0);
  }
  return g;
}

/// Jacobian of a vector function; row i is the gradient of component i.
template <typename Scalar, typename F>
MatrixX<Scalar> jacobian(F&& f, const VectorX<Scalar>& point) {
  MatrixX<Scalar> jac;
  VectorX<Dual<Scalar>> z = lift(point);
  for (Eigen::Index j = 0; j < point.size(); ++j) {
    z[j].inf = Scalar(1.0);
    const VectorX<Dual<Scalar>> column = f(z);
    if (j == 0) jac.resize(column.size(), point.size());
    for (Eigen::Index i = 0; i < column.size(); ++i) jac(i, j) = column[i].inf;
    z[j].inf = Scalar(0.0);
  }
  return jac;
}

/// Central difference (f(p + h d) - f(p - h d)) / (2h). Used as a test oracle.
template <typename F>
double fd_derivative(F&& f, const Eigen::VectorXd& point, const Eigen::VectorXd& direction,
                     double h = 1e-6) {
  if (point.size() != direction.size()) {
    throw std::invalid_argument("direction length does not match point length");
  }
  const Eigen::VectorXd plus = point + h * direction;
  const Eigen::VectorXd minus = point - h * direction;
  return (f(plus) - f(minus)) / (2.0 * h);
}

}  // namespace noether
