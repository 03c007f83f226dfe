#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "troop/integrate.hpp"
#include "troop/manifold.hpp"
#include "troop/projection.hpp"
#include "troop/system.hpp"

namespace troop::objective {

using manifold::RepresentativePair;
using manifold::TangentLift;

/// Output samples y_l = y(t_l) of one full-order trajectory.
struct Trajectory {
  std::string label;
  Vector x0;
  std::vector<double> times;
  /// L x m, row l holds y(t_l).
  Matrix observations;
  system::InputSignal input;

  std::size_t samples() const noexcept { return times.size(); }
  /// E = L^{-1} sum_l ||y_l||^2
  double energy() const;
};

/// Collection of trajectories sharing state and output dimensions. Times are
/// validated to be strictly increasing on construction.
class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;
  TrajectoryDataset(Eigen::Index n, Eigen::Index m, std::vector<Trajectory> trajectories);

  Eigen::Index state_dim() const noexcept { return n_; }
  Eigen::Index output_dim() const noexcept { return m_; }
  std::size_t size() const noexcept { return trajectories_.size(); }
  const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
  const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }

  /// Dataset restricted to the listed trajectories (in that order).
  TrajectoryDataset subset(const std::vector<std::size_t>& indices) const;

 private:
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  std::vector<Trajectory> trajectories_;
};

/// Continuous-time output signal y(t) on [t0, tf] of one full-order trajectory.
struct SignalTrajectory {
  std::string label;
  Vector x0;
  integrate::DenseTrajectory output;
  system::InputSignal input;

  /// (tf - t0)^{-1} times the integral of ||y||^2, by Gauss-Legendre on the signal grid.
  double energy() const;
};

/// Simulates the full-order model and returns its output as a dense signal.
SignalTrajectory make_signal(const system::DynamicalSystem& sys, const Vector& x0,
                             const system::InputSignal& input, double t0, double tf, double step,
                             std::string label = {});

/// Per-sample output penalty L_y and its gradient.
struct OutputLoss {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  /// ||e||^2 with gradient 2 e.
  static OutputLoss squared_error();
};

/// How per-trajectory misfits are combined.
///   mean: (1/M) sum_m w_m   (sampled w_m = 1/(L E_m), integrated w_m = 1/E_m)
///   sum:  sum_m w_m
enum class Weighting { mean, sum };

enum class ObjectiveMode { sampled, integrated };

struct ObjectiveConfig {
  double gamma = 0.0;
  OutputLoss loss = OutputLoss::squared_error();
  bool normalize_by_energy = true;
  Weighting weighting = Weighting::mean;
  ObjectiveMode mode = ObjectiveMode::sampled;
  /// Gauss-Legendre points per integrator step.
  int quadrature_order = 2;
  /// RK4 steps per sampling interval (sampled objective).
  int substeps = 200;
  /// RK4 step for the integrated objective.
  double integrated_step = 0.005;
  /// Worker threads for per-trajectory solves.
  int threads = 1;

  void validate() const;
};

struct GradientResult {
  double value = 0.0;
  /// Horizontal lift of the Riemannian gradient at the evaluation pair.
  TangentLift grad;
  std::vector<double> per_trajectory_costs;
};

/// -log[det(psi^T phi)^2 / (det(phi^T phi) det(psi^T psi))]
double regularization(const RepresentativePair& pair);
double regularization(const Matrix& phi, const Matrix& psi);

/// 2 (phi - psi A^T, psi - phi A) with A = (psi^T phi)^{-1}, horizontally projected.
TangentLift regularization_gradient(const RepresentativePair& pair);

/// Sampled objective; +infinity when the reduced model diverges on any trajectory.
double evaluate(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                const TrajectoryDataset& data, const ObjectiveConfig& cfg);

/// Sampled objective and its adjoint gradient. Throws BlowUpError.
GradientResult gradient_sampled(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                                const TrajectoryDataset& data, const ObjectiveConfig& cfg);

/// Integrated objective; +infinity on divergence.
double evaluate_integrated(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                           const std::vector<SignalTrajectory>& signals, const ObjectiveConfig& cfg);

/// Integrated objective and its adjoint gradient. Throws BlowUpError.
GradientResult gradient_integrated(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                                   const std::vector<SignalTrajectory>& signals, const ObjectiveConfig& cfg);

/// Reduced-model outputs at `times` (L x m), RK4 with `substeps` steps per interval.
Matrix simulate_outputs(const projection::ReducedModel& rom, const Vector& x0, const std::vector<double>& times,
                        const system::InputSignal& input, int substeps = 200);

/// Full-order outputs at `times` (L x m).
Matrix simulate_full_outputs(const system::DynamicalSystem& sys, const Vector& x0,
                             const std::vector<double>& times, const system::InputSignal& input,
                             int substeps = 200);

/// Objective bound to a model and data, as consumed by the optimizer.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const RepresentativePair& pair) const = 0;
  virtual GradientResult value_and_gradient(const RepresentativePair& pair) const = 0;
};

class SampledObjective final : public Objective {
 public:
  SampledObjective(const system::DynamicalSystem& sys, TrajectoryDataset data, ObjectiveConfig cfg);
  double value(const RepresentativePair& pair) const override;
  GradientResult value_and_gradient(const RepresentativePair& pair) const override;

 private:
  const system::DynamicalSystem* sys_;
  TrajectoryDataset data_;
  ObjectiveConfig cfg_;
};

class IntegratedObjective final : public Objective {
 public:
  IntegratedObjective(const system::DynamicalSystem& sys, std::vector<SignalTrajectory> signals,
                      ObjectiveConfig cfg);
  double value(const RepresentativePair& pair) const override;
  GradientResult value_and_gradient(const RepresentativePair& pair) const override;

 private:
  const system::DynamicalSystem* sys_;
  std::vector<SignalTrajectory> signals_;
  ObjectiveConfig cfg_;
};

/// Dense output signals for every trajectory of a sampled dataset, simulated
/// with the full-order model over [t_0, t_{L-1}].
std::vector<SignalTrajectory> signals_from_dataset(const system::DynamicalSystem& sys,
                                                   const TrajectoryDataset& data, double step);

}  // namespace troop::objective
