#pragma once

// Reference computations used by the test suite. Nothing here calls into the
// library's numerics: each helper is a direct, slow, textbook version.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian(std::mt19937& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  }
  return m;
}

inline Vector gaussian_vector(std::mt19937& rng, Eigen::Index n) { return gaussian(rng, n, 1).col(0); }

/// Orthonormal basis of range(m) by modified Gram-Schmidt.
inline Matrix gram_schmidt(const Matrix& m) {
  Matrix q = m;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    q.col(j).normalize();
  }
  return q;
}

/// Orthogonal projector onto range(m) via the normal equations.
inline Matrix projector(const Matrix& m) {
  return m * (m.transpose() * m).inverse() * m.transpose();
}

inline double projector_distance(const Matrix& a, const Matrix& b) { return (projector(a) - projector(b)).norm(); }

/// Random orthogonal r x r matrix.
inline Matrix orthogonal(std::mt19937& rng, Eigen::Index r) { return gram_schmidt(gaussian(rng, r, r)); }

/// Random invertible r x r matrix with condition number kept moderate.
inline Matrix invertible(std::mt19937& rng, Eigen::Index r) {
  return Matrix::Identity(r, r) + 0.3 * gaussian(rng, r, r);
}

inline double central_difference(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double relative_error(double approx, double exact) {
  return std::abs(approx - exact) / std::max(std::abs(exact), 1e-300);
}

/// Grassmann geodesic from orthonormal `q` along horizontal `h` by the matrix
/// exponential of the skew block [[0, -B^T], [B, 0]] with h = Q_perp B.
inline Matrix grassmann_exp(const Matrix& q, const Matrix& h, double t) {
  const Eigen::Index n = q.rows();
  const Eigen::Index r = q.cols();
  Eigen::HouseholderQR<Matrix> qr(q);
  const Matrix full = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix perp = full.rightCols(n - r);
  const Matrix b = perp.transpose() * h;
  Matrix skew = Matrix::Zero(n, n);
  skew.block(r, 0, n - r, r) = b;
  skew.block(0, r, r, n - r) = -b.transpose();
  const Matrix e = (t * skew).exp();
  Matrix basis(n, n);
  basis << q, perp;
  return basis * e.leftCols(r);
}

/// Toy benchmark written out by hand.
inline Vector toy_rhs(const Vector& x, double u) {
  Vector f(3);
  f(0) = -x(0) + 20.0 * x(0) * x(2) + u;
  f(1) = -2.0 * x(1) + 20.0 * x(1) * x(2) + u;
  f(2) = -5.0 * x(2) + u;
  return f;
}

inline double toy_output(const Vector& x) { return x.sum(); }

/// Plain RK4 loop with `steps` equal steps on [t0, t1].
inline Vector rk4(const std::function<Vector(double, const Vector&)>& f, Vector x, double t0, double t1,
                  int steps) {
  const double h = (t1 - t0) / steps;
  double t = t0;
  for (int k = 0; k < steps; ++k) {
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = f(t + h, x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return x;
}

/// Closed-form weak Wolfe interval of J(a) = (a - 1)^2 with c1 = 0.01, c2 = 0.1:
/// curvature gives a >= 0.9, sufficient decrease gives a <= 1.98.
inline constexpr double kQuadraticWolfeLo = 0.9;
inline constexpr double kQuadraticWolfeHi = 1.98;

/// Euclidean Dai-Yuan on f(x) = x^T diag(1, 10) x from (1, 1), first step exact.
struct EuclideanDaiYuan {
  Vector g0, d0, x1, g1;
  double alpha0 = 0.0;
  double beta = 0.0;
};

inline EuclideanDaiYuan euclidean_dai_yuan() {
  EuclideanDaiYuan out;
  const Eigen::Vector2d diag(1.0, 10.0);
  const Eigen::Vector2d x0(1.0, 1.0);
  out.g0 = 2.0 * diag.cwiseProduct(x0);
  out.d0 = -out.g0;
  // argmin_a f(x0 + a d0) = -(g0.d0) / (2 d0^T D d0) = 404 / 8008.
  out.alpha0 = 404.0 / 8008.0;
  out.x1 = x0 + out.alpha0 * out.d0;
  out.g1 = 2.0 * diag.cwiseProduct(out.x1);
  out.beta = out.g1.squaredNorm() / (out.g1.dot(out.d0) - out.g0.dot(out.d0));
  return out;
}

/// Principal-angle form of the pairing penalty for two lines in the plane.
inline double planar_penalty(double theta) { return -2.0 * std::log(std::cos(theta)); }

}  // namespace oracle
