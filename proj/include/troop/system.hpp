#pragma once

#include <memory>
#include <string>
#include <vector>

#include "troop/manifold.hpp"

namespace troop::system {

/// Full-order model  dx/dt = f(x, u, t),  y = g(x).
///
/// Implementations are immutable after construction; every method may be
/// called concurrently.
class DynamicalSystem {
 public:
  virtual ~DynamicalSystem() = default;

  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Eigen::Index input_dim() const = 0;

  virtual Vector rhs(const Vector& x, const Vector& u, double t) const = 0;
  /// (df/dx) v
  virtual Vector jvp(const Vector& x, const Vector& u, double t, const Vector& v) const = 0;
  /// (df/dx)^T w
  virtual Vector jtvp(const Vector& x, const Vector& u, double t, const Vector& w) const = 0;

  virtual Vector obs(const Vector& x) const = 0;
  /// (dg/dx) v
  virtual Vector obs_jvp(const Vector& x, const Vector& v) const = 0;
  /// (dg/dx)^T w
  virtual Vector obs_jtvp(const Vector& x, const Vector& w) const = 0;
};

/// Sparse quadratic coefficient: dx_i/dt += value * x_j * x_k.
struct QuadraticTerm {
  Eigen::Index i;
  Eigen::Index j;
  Eigen::Index k;
  double value;
};

/// dx/dt = A x + H (x (x) x) + B u,  y = C x.
///
/// The quadratic term is stored as triplets, symmetrized on construction so
/// that (i, j, k) and (i, k, j) carry equal weight. A model with no quadratic
/// terms is an LTI system.
class QuadraticBilinearModel final : public DynamicalSystem {
 public:
  QuadraticBilinearModel(Matrix a, std::vector<QuadraticTerm> h, Matrix b, Matrix c);

  Eigen::Index state_dim() const override { return a_.rows(); }
  Eigen::Index output_dim() const override { return c_.rows(); }
  Eigen::Index input_dim() const override { return b_.cols(); }

  Vector rhs(const Vector& x, const Vector& u, double t) const override;
  Vector jvp(const Vector& x, const Vector& u, double t, const Vector& v) const override;
  Vector jtvp(const Vector& x, const Vector& u, double t, const Vector& w) const override;
  Vector obs(const Vector& x) const override { return c_ * x; }
  Vector obs_jvp(const Vector&, const Vector& v) const override { return c_ * v; }
  Vector obs_jtvp(const Vector&, const Vector& w) const override { return c_.transpose() * w; }

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& c() const noexcept { return c_; }
  /// Symmetrized triplets, sorted by (i, j, k).
  const std::vector<QuadraticTerm>& quadratic_terms() const noexcept { return h_; }
  bool is_linear() const noexcept { return h_.empty(); }

  /// H (x (x) y) for the symmetrized tensor.
  Vector quadratic(const Vector& x, const Vector& y) const;

 private:
  Matrix a_;
  std::vector<QuadraticTerm> h_;
  Matrix b_;
  Matrix c_;
};

/// Linear time-invariant realization (A, B, C).
struct LtiSystem {
  Matrix a;
  Matrix b;
  Matrix c;
};

/// The three-state benchmark
///   x1' = -x1 + 20 x1 x3 + u,  x2' = -2 x2 + 20 x2 x3 + u,  x3' = -5 x3 + u,
///   y = x1 + x2 + x3.
std::shared_ptr<const QuadraticBilinearModel> toy_model();

/// Impulse of magnitude u0 realized as the initial state u0 * (1, ..., 1).
Vector toy_impulse_state(double u0);

std::shared_ptr<const QuadraticBilinearModel> make_lti(const LtiSystem& sys);

/// A = df/dx(x0, 0) assembled column-by-column from jvp, B from the input
/// response of the rhs (exact for input-affine models), C from obs_jvp.
LtiSystem linearize(const DynamicalSystem& sys, const Vector& x0);

/// Input signal u(t) shared by all input channels.
struct InputSignal {
  enum class Kind { zero, sinusoid };
  Kind kind = Kind::zero;
  double amplitude = 0.0;
  double frequency = 1.0;

  static InputSignal none() { return {}; }
  static InputSignal sine(double amplitude, double frequency) {
    return {Kind::sinusoid, amplitude, frequency};
  }
  /// Parses "none" or "sin:<amplitude>:<frequency>".
  static InputSignal parse(const std::string& text);
  std::string to_string() const;

  bool is_zero() const noexcept { return kind == Kind::zero || amplitude == 0.0; }
  Vector operator()(double t, Eigen::Index channels) const;
};

}  // namespace troop::system
