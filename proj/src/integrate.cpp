#include "troop/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace troop::integrate {

DenseTrajectory::DenseTrajectory(std::vector<double> times, std::vector<Vector> states,
                                 std::vector<Vector> derivatives)
    : times_(std::move(times)), states_(std::move(states)), derivs_(std::move(derivatives)) {
  if (times_.empty() || times_.size() != states_.size() || times_.size() != derivs_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "dense trajectory needs matching, non-empty node data");
  }
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) {
      throw Error(ErrorKind::InvalidArgument, "dense trajectory times must be strictly increasing");
    }
  }
}

std::size_t DenseTrajectory::interval(double t) const {
  if (times_.size() < 2 || t <= times_.front()) return 0;
  if (t >= times_.back()) return times_.size() - 2;
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

Vector DenseTrajectory::eval(double t) const {
  if (times_.size() == 1) return states_.front();
  const std::size_t k = interval(t);
  const double t0 = times_[k];
  const double h = times_[k + 1] - t0;
  const double s = (t - t0) / h;
  if (s == 0.0) return states_[k];
  if (s == 1.0) return states_[k + 1];
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * states_[k] + (h10 * h) * derivs_[k] + h01 * states_[k + 1] + (h11 * h) * derivs_[k + 1];
}

namespace {

void require_finite(const Vector& x, double t) {
  if (!x.allFinite()) {
    throw Error(ErrorKind::NonFiniteState, "state became non-finite at t = " + std::to_string(t));
  }
}

Vector rk4_step(const RhsFn& rhs, double t, const Vector& x, const Vector& k1, double h) {
  const Vector k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1);
  const Vector k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2);
  const Vector k4 = rhs(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::vector<double> uniform_grid(double t0, double t1, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "integration step must be positive");
  if (!(t1 >= t0)) throw Error(ErrorKind::InvalidArgument, "integration interval is reversed");
  std::vector<double> nodes{t0};
  if (t1 == t0) return nodes;
  // Steps that would leave a remainder below 1e-9 of a step are merged.
  const auto count = static_cast<long>(std::ceil((t1 - t0) / step - 1e-9));
  for (long k = 1; k < count; ++k) nodes.push_back(t0 + static_cast<double>(k) * step);
  nodes.push_back(t1);
  return nodes;
}

std::vector<double> refine_grid(std::span<const double> samples, int substeps) {
  if (substeps < 1) throw Error(ErrorKind::InvalidArgument, "substeps must be >= 1");
  std::vector<double> nodes;
  if (samples.empty()) return nodes;
  nodes.reserve((samples.size() - 1) * static_cast<std::size_t>(substeps) + 1);
  nodes.push_back(samples[0]);
  for (std::size_t l = 0; l + 1 < samples.size(); ++l) {
    const double lo = samples[l];
    const double h = (samples[l + 1] - lo) / substeps;
    for (int k = 1; k < substeps; ++k) nodes.push_back(lo + k * h);
    nodes.push_back(samples[l + 1]);
  }
  return nodes;
}

DenseTrajectory integrate_on_grid(const RhsFn& rhs, const Vector& x0, std::span<const double> nodes) {
  if (nodes.empty()) throw Error(ErrorKind::InvalidArgument, "empty integration grid");
  std::vector<double> times(nodes.begin(), nodes.end());
  std::vector<Vector> states;
  std::vector<Vector> derivs;
  states.reserve(times.size());
  derivs.reserve(times.size());
  Vector x = x0;
  require_finite(x, times[0]);
  Vector dx = rhs(times[0], x);
  require_finite(dx, times[0]);
  states.push_back(x);
  derivs.push_back(dx);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    x = rk4_step(rhs, times[k], x, dx, times[k + 1] - times[k]);
    require_finite(x, times[k + 1]);
    dx = rhs(times[k + 1], x);
    require_finite(dx, times[k + 1]);
    states.push_back(x);
    derivs.push_back(dx);
  }
  return DenseTrajectory(std::move(times), std::move(states), std::move(derivs));
}

DenseTrajectory integrate_forward(const RhsFn& rhs, const Vector& x0, double t0, double t1, double step) {
  const std::vector<double> nodes = uniform_grid(t0, t1, step);
  return integrate_on_grid(rhs, x0, nodes);
}

DenseTrajectory integrate_adjoint_on_grid(const AdjointRhsFn& rhs, const Vector& lambda_end,
                                          std::span<const double> nodes) {
  if (nodes.empty()) throw Error(ErrorKind::InvalidArgument, "empty integration grid");
  const std::size_t count = nodes.size();
  std::vector<Vector> states(count);
  std::vector<Vector> derivs(count);
  // In reversed time s = -t the equation reads dlambda/ds = G(t, lambda).
  Vector lam = lambda_end;
  require_finite(lam, nodes[count - 1]);
  Vector g = rhs(nodes[count - 1], lam);
  require_finite(g, nodes[count - 1]);
  states[count - 1] = lam;
  derivs[count - 1] = -g;
  for (std::size_t k = count - 1; k > 0; --k) {
    const double t = nodes[k];
    const double h = nodes[k] - nodes[k - 1];
    const Vector k1 = g;
    const Vector k2 = rhs(t - 0.5 * h, lam + (0.5 * h) * k1);
    const Vector k3 = rhs(t - 0.5 * h, lam + (0.5 * h) * k2);
    const Vector k4 = rhs(t - h, lam + h * k3);
    lam = lam + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    require_finite(lam, nodes[k - 1]);
    g = rhs(nodes[k - 1], lam);
    require_finite(g, nodes[k - 1]);
    states[k - 1] = lam;
    derivs[k - 1] = -g;
  }
  return DenseTrajectory(std::vector<double>(nodes.begin(), nodes.end()), std::move(states), std::move(derivs));
}

DenseTrajectory integrate_adjoint_backward(const AdjointRhsFn& rhs, const Vector& lambda_end, double t_hi,
                                           double t_lo, double step) {
  if (!(t_lo < t_hi)) throw Error(ErrorKind::InvalidArgument, "adjoint solve needs t_lo < t_hi");
  const std::vector<double> nodes = uniform_grid(t_lo, t_hi, step);
  return integrate_adjoint_on_grid(rhs, lambda_end, nodes);
}

QuadratureRule::QuadratureRule(int order) {
  if (order < 1 || order > 10) throw Error(ErrorKind::InvalidArgument, "quadrature order must be in [1, 10]");
  const auto q = static_cast<std::size_t>(order);
  nodes_.resize(q);
  weights_.resize(q);
  // Newton iteration on the Legendre polynomial P_q from Chebyshev guesses.
  for (std::size_t i = 0; i < q; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(q) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= order; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    nodes_[q - 1 - i] = x;
    weights_[q - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

void QuadratureRule::map(double lo, double hi, std::vector<double>& t, std::vector<double>& w) const {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  t.resize(nodes_.size());
  w.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    t[i] = mid + half * nodes_[i];
    w[i] = half * weights_[i];
  }
}

double quad_integrate(const QuadratureRule& rule, const std::function<double(double)>& f, double t_lo,
                      double t_hi) {
  if (!(t_lo <= t_hi)) throw Error(ErrorKind::InvalidArgument, "quadrature interval is reversed");
  return rule.integrate(f, t_lo, t_hi);
}

}  // namespace troop::integrate
