#pragma once

#include <functional>
#include <span>
#include <vector>

#include "troop/manifold.hpp"

namespace troop::integrate {

/// Piecewise cubic Hermite interpolant through stored states and their time
/// derivatives. Reproduces the stored states exactly at the grid nodes.
class DenseTrajectory {
 public:
  DenseTrajectory() = default;
  DenseTrajectory(std::vector<double> times, std::vector<Vector> states, std::vector<Vector> derivatives);

  Vector eval(double t) const;

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<Vector>& states() const noexcept { return states_; }
  const std::vector<Vector>& derivatives() const noexcept { return derivs_; }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  const Vector& front() const { return states_.front(); }
  const Vector& back() const { return states_.back(); }
  std::size_t size() const noexcept { return times_.size(); }

  /// Index k of the grid interval [t_k, t_{k+1}] containing t (clamped).
  std::size_t interval(double t) const;

 private:
  std::vector<double> times_;
  std::vector<Vector> states_;
  std::vector<Vector> derivs_;
};

using RhsFn = std::function<Vector(double t, const Vector& x)>;

/// Classical fixed-step RK4 on [t0, t1]; the last step is shortened to land on
/// t1. Throws NonFiniteState if the state stops being finite.
DenseTrajectory integrate_forward(const RhsFn& rhs, const Vector& x0, double t0, double t1, double step);

/// RK4 through a list of increasing nodes, one step per node interval.
DenseTrajectory integrate_on_grid(const RhsFn& rhs, const Vector& x0, std::span<const double> nodes);

/// Uniform substeps per interval of `samples`: every sample time is a node.
std::vector<double> refine_grid(std::span<const double> samples, int substeps);

/// Uniform nodes on [t0, t1] with spacing at most `step`, the last one shortened.
std::vector<double> uniform_grid(double t0, double t1, double step);

/// Right-hand side G(t, lambda) of the adjoint equation  -dlambda/dt = G(t, lambda).
using AdjointRhsFn = std::function<Vector(double t, const Vector& lambda)>;

/// Solves -dlambda/dt = G(t, lambda) backward from lambda(t_hi) = lambda_end
/// to t_lo with RK4 of spacing at most `step`. The result stores increasing times.
DenseTrajectory integrate_adjoint_backward(const AdjointRhsFn& rhs, const Vector& lambda_end, double t_hi,
                                           double t_lo, double step);

/// Backward RK4 through the given increasing nodes (integrated from the last node down).
DenseTrajectory integrate_adjoint_on_grid(const AdjointRhsFn& rhs, const Vector& lambda_end,
                                          std::span<const double> nodes);

/// q-point Gauss-Legendre rule on [-1, 1], 1 <= q <= 10.
class QuadratureRule {
 public:
  explicit QuadratureRule(int order = 2);

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Sum of w_i f(t_i) with the rule mapped to [lo, hi]. Works for any value
  /// type closed under addition and scalar multiplication.
  template <class F>
  auto integrate(F&& f, double lo, double hi) const {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    auto acc = (half * weights_[0]) * f(mid + half * nodes_[0]);
    for (std::size_t i = 1; i < nodes_.size(); ++i) acc = acc + (half * weights_[i]) * f(mid + half * nodes_[i]);
    return acc;
  }

  /// Mapped nodes and weights on [lo, hi].
  void map(double lo, double hi, std::vector<double>& t, std::vector<double>& w) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

double quad_integrate(const QuadratureRule& rule, const std::function<double(double)>& f, double t_lo,
                      double t_hi);

}  // namespace troop::integrate
