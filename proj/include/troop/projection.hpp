#pragma once

#include "troop/manifold.hpp"
#include "troop/system.hpp"

namespace troop::projection {

using manifold::RepresentativePair;

/// phi (psi^T phi)^{-1} psi^T x
Vector project(const RepresentativePair& pair, const Vector& x);

/// (psi^T phi)^{-1} psi^T x, so that phi * z == project(pair, x).
Vector reduce_to_coords(const RepresentativePair& pair, const Vector& x);

/// Petrov-Galerkin reduced model
///   dz/dt = (psi^T phi)^{-1} psi^T f(phi z, u, t),   y = g(phi z).
///
/// Quadratic-bilinear full-order models get precomputed reduced operators
/// (the fast path); any other model is evaluated by lifting z, calling the
/// full-order model and projecting back. The full-order model must outlive
/// the reduced one.
class ReducedModel {
 public:
  enum class Path { automatic, generic };

  ReducedModel(const system::DynamicalSystem& sys, RepresentativePair pair, Path path = Path::automatic);

  const RepresentativePair& pair() const noexcept { return pair_; }
  const system::DynamicalSystem& full_model() const noexcept { return *sys_; }
  /// (psi^T phi)^{-1}
  const Matrix& pairing_inverse() const noexcept { return pairing_inv_; }
  /// (psi^T phi)^{-1} psi^T, the r x n left factor of the projector.
  const Matrix& left() const noexcept { return left_; }
  double pairing_condition() const noexcept { return condition_; }
  bool uses_fast_path() const noexcept { return fast_; }
  Eigen::Index rank() const noexcept { return pair_.r(); }

  Vector rhs(const Vector& z, const Vector& u, double t) const;
  Vector jvp(const Vector& z, const Vector& u, double t, const Vector& v) const;
  Vector jtvp(const Vector& z, const Vector& u, double t, const Vector& w) const;
  /// Reduced Jacobian d f~/dz as a dense r x r matrix.
  Matrix jacobian(const Vector& z, const Vector& u, double t) const;

  Vector obs(const Vector& z) const;
  /// (d g~/dz)^T w = phi^T (dg/dx)^T w
  Vector obs_jtvp(const Vector& z, const Vector& w) const;

  Vector initial_state(const Vector& x0) const { return left_ * x0; }
  Vector lift(const Vector& z) const { return pair_.phi().cols() * z; }

 private:
  Vector quadratic(const Vector& a, const Vector& b) const;

  const system::DynamicalSystem* sys_;
  RepresentativePair pair_;
  Matrix pairing_inv_;
  Matrix left_;
  double condition_ = 1.0;

  bool fast_ = false;
  Matrix a_red_;
  Matrix b_red_;
  Matrix c_red_;
  /// r x r^2 with column j * r + k holding the coefficient of z_j z_k.
  Matrix h_red_;
};

ReducedModel assemble_rom(const system::DynamicalSystem& sys, const RepresentativePair& pair);

}  // namespace troop::projection
