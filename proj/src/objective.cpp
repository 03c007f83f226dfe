#include "troop/objective.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace troop::objective {

using integrate::DenseTrajectory;
using integrate::QuadratureRule;
using projection::ReducedModel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Runs job(i) for i in [0, count) on up to `threads` workers. Results are
// written by index, so the caller reduces them in a fixed order.
template <class Job>
void for_each_index(std::size_t count, int threads, Job&& job) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double log_abs_det(const Matrix& m) {
  const Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix& packed = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double d = std::abs(packed(i, i));
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorKind::SingularPairing, "determinant underflows");
    }
    acc += std::log(d);
  }
  return acc;
}

// Forward ROM solve at `nodes`; NonFiniteState becomes BlowUpError(index).
DenseTrajectory solve_rom(const ReducedModel& rom, const Vector& z0, std::span<const double> nodes,
                          const system::InputSignal& input, Eigen::Index channels, std::size_t index) {
  const bool forced = !input.is_zero();
  const Vector no_input = Vector::Zero(channels);
  try {
    return integrate::integrate_on_grid(
        [&](double t, const Vector& z) { return rom.rhs(z, forced ? input(t, channels) : no_input, t); }, z0,
        nodes);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NonFiniteState) throw BlowUpError(index);
    throw;
  }
}

// Pieces of the gradient evaluated along one trajectory.
class GradientTerms {
 public:
  GradientTerms(const system::DynamicalSystem& sys, const ReducedModel& rom, const system::InputSignal& input)
      : sys_(sys), rom_(rom), input_(input), phi_(rom.pair().phi().cols()), a_(rom.pairing_inverse()) {}

  Vector input_at(double t) const {
    return input_.is_zero() ? Vector::Zero(sys_.input_dim()) : input_(t, sys_.input_dim());
  }

  // S(t)^* lambda
  TangentLift s_adjoint(double t, const Vector& z, const Vector& lambda) const {
    const Vector x = phi_ * z;
    const Vector u = input_at(t);
    const Vector f = sys_.rhs(x, u, t);
    const Vector f_red = rom_.left() * f;
    const Vector w = rom_.left().transpose() * lambda;
    TangentLift out;
    out.x = sys_.jtvp(x, u, t, w) * z.transpose() - w * f_red.transpose();
    out.y = (f - phi_ * f_red) * (lambda.transpose() * a_);
    return out;
  }

  // T(t)^* g; only the phi component is non-zero.
  Matrix t_adjoint(const Vector& z, const Vector& g) const {
    return sys_.obs_jtvp(phi_ * z, g) * z.transpose();
  }

  // (dz(t0)/dtheta)^* lambda
  TangentLift initial_adjoint(const Vector& x0, const Vector& z0, const Vector& lambda) const {
    const Vector w = rom_.left().transpose() * lambda;
    TangentLift out;
    out.x = -w * z0.transpose();
    out.y = (x0 - phi_ * z0) * (lambda.transpose() * a_);
    return out;
  }

 private:
  const system::DynamicalSystem& sys_;
  const ReducedModel& rom_;
  const system::InputSignal& input_;
  const Matrix& phi_;
  const Matrix& a_;
};

struct TrajectoryGradient {
  double cost = 0.0;
  TangentLift grad;
};

void check_dims(const system::DynamicalSystem& sys, const RepresentativePair& pair, Eigen::Index n,
                Eigen::Index m) {
  if (pair.n() != sys.state_dim() || n != sys.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "state dimension of pair, model and data disagree");
  }
  if (m != sys.output_dim()) throw Error(ErrorKind::DimensionMismatch, "output dimension of model and data disagree");
}

double sampled_weight(const Trajectory& traj, std::size_t count, const ObjectiveConfig& cfg) {
  double w = 1.0 / static_cast<double>(traj.samples());
  if (cfg.normalize_by_energy) {
    const double e = traj.energy();
    if (!(e > 0.0)) throw Error(ErrorKind::InvalidArgument, "trajectory '" + traj.label + "' has zero output energy");
    w /= e;
  }
  if (cfg.weighting == Weighting::mean) w /= static_cast<double>(count);
  return w;
}

double integrated_weight(const SignalTrajectory& sig, std::size_t count, const ObjectiveConfig& cfg) {
  double w = 1.0;
  if (cfg.normalize_by_energy) {
    const double e = sig.energy();
    if (!(e > 0.0)) throw Error(ErrorKind::InvalidArgument, "signal '" + sig.label + "' has zero output energy");
    w /= e;
  }
  if (cfg.weighting == Weighting::mean) w /= static_cast<double>(count);
  return w;
}

double sampled_cost(const ReducedModel& rom, const Trajectory& traj, const ObjectiveConfig& cfg, double weight,
                    std::size_t index) {
  const std::vector<double> nodes = integrate::refine_grid(traj.times, cfg.substeps);
  const DenseTrajectory z =
      solve_rom(rom, rom.initial_state(traj.x0), nodes, traj.input, rom.full_model().input_dim(), index);
  double acc = 0.0;
  for (std::size_t l = 0; l < traj.samples(); ++l) {
    const Vector& zl = z.states()[l * static_cast<std::size_t>(cfg.substeps)];
    acc += cfg.loss.value(rom.obs(zl) - traj.observations.row(static_cast<Eigen::Index>(l)).transpose());
  }
  return weight * acc;
}

TrajectoryGradient sampled_trajectory_gradient(const system::DynamicalSystem& sys, const ReducedModel& rom,
                                               const Trajectory& traj, const ObjectiveConfig& cfg, double weight,
                                               std::size_t index) {
  const auto s = static_cast<std::size_t>(cfg.substeps);
  const std::vector<double> nodes = integrate::refine_grid(traj.times, cfg.substeps);
  const Vector z0 = rom.initial_state(traj.x0);
  const DenseTrajectory z = solve_rom(rom, z0, nodes, traj.input, sys.input_dim(), index);
  const GradientTerms terms(sys, rom, traj.input);
  const QuadratureRule rule(cfg.quadrature_order);

  const std::size_t samples = traj.samples();
  std::vector<Vector> g(samples);
  TrajectoryGradient out;
  out.grad = TangentLift::zero(rom.pair().n(), rom.rank());
  for (std::size_t l = 0; l < samples; ++l) {
    const Vector residual =
        rom.obs(z.states()[l * s]) - traj.observations.row(static_cast<Eigen::Index>(l)).transpose();
    out.cost += weight * cfg.loss.value(residual);
    g[l] = weight * cfg.loss.gradient(residual);
  }

  const auto adjoint_rhs = [&](double t, const Vector& lam) {
    return rom.jtvp(z.eval(t), terms.input_at(t), t, lam);
  };

  std::size_t l = samples - 1;
  Vector lambda = rom.obs_jtvp(z.states()[l * s], g[l]);
  out.grad.x += terms.t_adjoint(z.states()[l * s], g[l]);
  while (l > 0) {
    --l;
    const std::span<const double> interval(nodes.data() + l * s, s + 1);
    const DenseTrajectory adj = integrate::integrate_adjoint_on_grid(adjoint_rhs, lambda, interval);
    for (std::size_t k = 0; k < s; ++k) {
      out.grad += rule.integrate(
          [&](double t) { return terms.s_adjoint(t, z.eval(t), adj.eval(t)); }, interval[k], interval[k + 1]);
    }
    const Vector& zl = z.states()[l * s];
    lambda = adj.front() + rom.obs_jtvp(zl, g[l]);
    out.grad.x += terms.t_adjoint(zl, g[l]);
  }
  out.grad += terms.initial_adjoint(traj.x0, z0, lambda);
  return out;
}

double integrated_cost(const ReducedModel& rom, const SignalTrajectory& sig, const ObjectiveConfig& cfg,
                       double weight, std::size_t index) {
  const std::vector<double> nodes =
      integrate::uniform_grid(sig.output.t_begin(), sig.output.t_end(), cfg.integrated_step);
  const DenseTrajectory z =
      solve_rom(rom, rom.initial_state(sig.x0), nodes, sig.input, rom.full_model().input_dim(), index);
  const QuadratureRule rule(cfg.quadrature_order);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    acc += rule.integrate([&](double t) { return cfg.loss.value(rom.obs(z.eval(t)) - sig.output.eval(t)); },
                          nodes[k], nodes[k + 1]);
  }
  return weight * acc;
}

TrajectoryGradient integrated_trajectory_gradient(const system::DynamicalSystem& sys, const ReducedModel& rom,
                                                  const SignalTrajectory& sig, const ObjectiveConfig& cfg,
                                                  double weight, std::size_t index) {
  const std::vector<double> nodes =
      integrate::uniform_grid(sig.output.t_begin(), sig.output.t_end(), cfg.integrated_step);
  const Vector z0 = rom.initial_state(sig.x0);
  const DenseTrajectory z = solve_rom(rom, z0, nodes, sig.input, sys.input_dim(), index);
  const GradientTerms terms(sys, rom, sig.input);
  const QuadratureRule rule(cfg.quadrature_order);

  const auto output_grad = [&](double t, const Vector& zt) {
    return Vector(weight * cfg.loss.gradient(rom.obs(zt) - sig.output.eval(t)));
  };
  const auto adjoint_rhs = [&](double t, const Vector& lam) {
    const Vector zt = z.eval(t);
    return Vector(rom.jtvp(zt, terms.input_at(t), t, lam) + rom.obs_jtvp(zt, output_grad(t, zt)));
  };
  const DenseTrajectory adj =
      integrate::integrate_adjoint_on_grid(adjoint_rhs, Vector::Zero(rom.rank()), nodes);

  TrajectoryGradient out;
  out.grad = TangentLift::zero(rom.pair().n(), rom.rank());
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    out.cost += weight * rule.integrate(
                             [&](double t) { return cfg.loss.value(rom.obs(z.eval(t)) - sig.output.eval(t)); },
                             nodes[k], nodes[k + 1]);
    out.grad += rule.integrate(
        [&](double t) {
          const Vector zt = z.eval(t);
          TangentLift v = terms.s_adjoint(t, zt, adj.eval(t));
          v.x += terms.t_adjoint(zt, output_grad(t, zt));
          return v;
        },
        nodes[k], nodes[k + 1]);
  }
  out.grad += terms.initial_adjoint(sig.x0, z0, adj.front());
  return out;
}

GradientResult finish(const RepresentativePair& pair, const ObjectiveConfig& cfg,
                      std::vector<TrajectoryGradient>& parts) {
  GradientResult res;
  res.grad = TangentLift::zero(pair.n(), pair.r());
  res.per_trajectory_costs.reserve(parts.size());
  for (const TrajectoryGradient& p : parts) {
    res.value += p.cost;
    res.grad += p.grad;
    res.per_trajectory_costs.push_back(p.cost);
  }
  if (cfg.gamma > 0.0) {
    res.value += cfg.gamma * regularization(pair);
    res.grad += cfg.gamma * regularization_gradient(pair);
  }
  res.grad = manifold::horizontal_project(pair, res.grad);
  return res;
}

}  // namespace

double Trajectory::energy() const {
  if (samples() == 0) return 0.0;
  return observations.squaredNorm() / static_cast<double>(samples());
}

TrajectoryDataset::TrajectoryDataset(Eigen::Index n, Eigen::Index m, std::vector<Trajectory> trajectories)
    : n_(n), m_(m), trajectories_(std::move(trajectories)) {
  if (n_ < 1 || m_ < 1) throw Error(ErrorKind::InvalidArgument, "dataset dimensions must be positive");
  for (const Trajectory& t : trajectories_) {
    const std::string who = "trajectory '" + t.label + "': ";
    if (t.x0.size() != n_) throw Error(ErrorKind::DimensionMismatch, who + "x0 has wrong length");
    if (t.times.empty()) throw Error(ErrorKind::InvalidArgument, who + "no samples");
    for (std::size_t l = 1; l < t.times.size(); ++l) {
      if (!(t.times[l] > t.times[l - 1])) {
        throw Error(ErrorKind::InvalidArgument, who + "times must be strictly increasing");
      }
    }
    if (t.observations.rows() != static_cast<Eigen::Index>(t.times.size()) || t.observations.cols() != m_) {
      throw Error(ErrorKind::DimensionMismatch, who + "observations must be L x m");
    }
    if (!t.x0.allFinite() || !t.observations.allFinite()) {
      throw Error(ErrorKind::InvalidArgument, who + "non-finite values");
    }
  }
}

TrajectoryDataset TrajectoryDataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Trajectory> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(trajectories_.at(i));
  return TrajectoryDataset(n_, m_, std::move(picked));
}

double SignalTrajectory::energy() const {
  const QuadratureRule rule(3);
  const std::vector<double>& nodes = output.times();
  if (nodes.size() < 2) return output.front().squaredNorm();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    acc += rule.integrate([&](double t) { return output.eval(t).squaredNorm(); }, nodes[k], nodes[k + 1]);
  }
  return acc / (nodes.back() - nodes.front());
}

SignalTrajectory make_signal(const system::DynamicalSystem& sys, const Vector& x0, const system::InputSignal& input,
                             double t0, double tf, double step, std::string label) {
  const Eigen::Index channels = sys.input_dim();
  const auto u = [&](double t) { return input.is_zero() ? Vector::Zero(channels) : input(t, channels); };
  const DenseTrajectory x =
      integrate::integrate_forward([&](double t, const Vector& s) { return sys.rhs(s, u(t), t); }, x0, t0, tf, step);
  std::vector<Vector> ys;
  std::vector<Vector> dys;
  ys.reserve(x.size());
  dys.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    ys.push_back(sys.obs(x.states()[k]));
    dys.push_back(sys.obs_jvp(x.states()[k], x.derivatives()[k]));
  }
  return SignalTrajectory{std::move(label), x0, DenseTrajectory(x.times(), std::move(ys), std::move(dys)), input};
}

std::vector<SignalTrajectory> signals_from_dataset(const system::DynamicalSystem& sys, const TrajectoryDataset& data,
                                                   double step) {
  std::vector<SignalTrajectory> out;
  out.reserve(data.size());
  for (const Trajectory& t : data.trajectories()) {
    out.push_back(make_signal(sys, t.x0, t.input, t.times.front(), t.times.back(), step, t.label));
  }
  return out;
}

OutputLoss OutputLoss::squared_error() {
  return OutputLoss{[](const Vector& e) { return e.squaredNorm(); }, [](const Vector& e) { return Vector(2.0 * e); }};
}

void ObjectiveConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::InvalidArgument, "gamma must be >= 0");
  if (!loss.value || !loss.gradient) throw Error(ErrorKind::InvalidArgument, "loss must provide value and gradient");
  if (quadrature_order < 1 || quadrature_order > 10) {
    throw Error(ErrorKind::InvalidArgument, "quadrature order must be in [1, 10]");
  }
  if (substeps < 1) throw Error(ErrorKind::InvalidArgument, "substeps must be >= 1");
  if (!(integrated_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "integrated step must be positive");
  if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
}

double regularization(const Matrix& phi, const Matrix& psi) {
  if (phi.rows() != psi.rows() || phi.cols() != psi.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "phi and psi must have equal shape");
  }
  const double pairing = log_abs_det(psi.transpose() * phi);
  const double gram_phi = log_abs_det(phi.transpose() * phi);
  const double gram_psi = log_abs_det(psi.transpose() * psi);
  // Round-off can push the exact-zero case slightly negative.
  return std::max(0.0, gram_phi + gram_psi - 2.0 * pairing);
}

double regularization(const RepresentativePair& pair) {
  return regularization(pair.phi().cols(), pair.psi().cols());
}

TangentLift regularization_gradient(const RepresentativePair& pair) {
  const Matrix& phi = pair.phi().cols();
  const Matrix& psi = pair.psi().cols();
  const Matrix pairing = pair.pairing();
  manifold::pairing_sign(pair.phi(), pair.psi());
  const Matrix a = pairing.partialPivLu().solve(Matrix::Identity(pair.r(), pair.r()));
  TangentLift g;
  g.x = 2.0 * (phi - psi * a.transpose());
  g.y = 2.0 * (psi - phi * a);
  return manifold::horizontal_project(pair, g);
}

double evaluate(const system::DynamicalSystem& sys, const RepresentativePair& pair, const TrajectoryDataset& data,
                const ObjectiveConfig& cfg) {
  cfg.validate();
  check_dims(sys, pair, data.state_dim(), data.output_dim());
  const ReducedModel rom(sys, pair);
  std::vector<double> costs(data.size(), 0.0);
  std::vector<double> weights(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) weights[i] = sampled_weight(data[i], data.size(), cfg);
  for_each_index(data.size(), cfg.threads, [&](std::size_t i) {
    try {
      costs[i] = sampled_cost(rom, data[i], cfg, weights[i], i);
    } catch (const BlowUpError&) {
      costs[i] = kInf;
    }
  });
  double total = 0.0;
  for (double c : costs) total += c;
  if (cfg.gamma > 0.0) total += cfg.gamma * regularization(pair);
  return std::isnan(total) ? kInf : total;
}

GradientResult gradient_sampled(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                                const TrajectoryDataset& data, const ObjectiveConfig& cfg) {
  cfg.validate();
  check_dims(sys, pair, data.state_dim(), data.output_dim());
  const ReducedModel rom(sys, pair);
  std::vector<double> weights(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) weights[i] = sampled_weight(data[i], data.size(), cfg);
  std::vector<TrajectoryGradient> parts(data.size());
  for_each_index(data.size(), cfg.threads, [&](std::size_t i) {
    parts[i] = sampled_trajectory_gradient(sys, rom, data[i], cfg, weights[i], i);
  });
  return finish(pair, cfg, parts);
}

double evaluate_integrated(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                           const std::vector<SignalTrajectory>& signals, const ObjectiveConfig& cfg) {
  cfg.validate();
  if (signals.empty()) throw Error(ErrorKind::InvalidArgument, "no signals");
  check_dims(sys, pair, signals.front().x0.size(), signals.front().output.front().size());
  const ReducedModel rom(sys, pair);
  std::vector<double> costs(signals.size(), 0.0);
  std::vector<double> weights(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) weights[i] = integrated_weight(signals[i], signals.size(), cfg);
  for_each_index(signals.size(), cfg.threads, [&](std::size_t i) {
    try {
      costs[i] = integrated_cost(rom, signals[i], cfg, weights[i], i);
    } catch (const BlowUpError&) {
      costs[i] = kInf;
    }
  });
  double total = 0.0;
  for (double c : costs) total += c;
  if (cfg.gamma > 0.0) total += cfg.gamma * regularization(pair);
  return std::isnan(total) ? kInf : total;
}

GradientResult gradient_integrated(const system::DynamicalSystem& sys, const RepresentativePair& pair,
                                   const std::vector<SignalTrajectory>& signals, const ObjectiveConfig& cfg) {
  cfg.validate();
  if (signals.empty()) throw Error(ErrorKind::InvalidArgument, "no signals");
  check_dims(sys, pair, signals.front().x0.size(), signals.front().output.front().size());
  const ReducedModel rom(sys, pair);
  std::vector<double> weights(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) weights[i] = integrated_weight(signals[i], signals.size(), cfg);
  std::vector<TrajectoryGradient> parts(signals.size());
  for_each_index(signals.size(), cfg.threads, [&](std::size_t i) {
    parts[i] = integrated_trajectory_gradient(sys, rom, signals[i], cfg, weights[i], i);
  });
  return finish(pair, cfg, parts);
}

Matrix simulate_outputs(const ReducedModel& rom, const Vector& x0, const std::vector<double>& times,
                        const system::InputSignal& input, int substeps) {
  const std::vector<double> nodes = integrate::refine_grid(times, substeps);
  const DenseTrajectory z = solve_rom(rom, rom.initial_state(x0), nodes, input, rom.full_model().input_dim(), 0);
  Matrix out(static_cast<Eigen::Index>(times.size()), rom.full_model().output_dim());
  for (std::size_t l = 0; l < times.size(); ++l) {
    out.row(static_cast<Eigen::Index>(l)) = rom.obs(z.states()[l * static_cast<std::size_t>(substeps)]).transpose();
  }
  return out;
}

Matrix simulate_full_outputs(const system::DynamicalSystem& sys, const Vector& x0, const std::vector<double>& times,
                             const system::InputSignal& input, int substeps) {
  const Eigen::Index channels = sys.input_dim();
  const std::vector<double> nodes = integrate::refine_grid(times, substeps);
  const DenseTrajectory x = integrate::integrate_on_grid(
      [&](double t, const Vector& s) {
        return sys.rhs(s, input.is_zero() ? Vector::Zero(channels) : input(t, channels), t);
      },
      x0, nodes);
  Matrix out(static_cast<Eigen::Index>(times.size()), sys.output_dim());
  for (std::size_t l = 0; l < times.size(); ++l) {
    out.row(static_cast<Eigen::Index>(l)) = sys.obs(x.states()[l * static_cast<std::size_t>(substeps)]).transpose();
  }
  return out;
}

SampledObjective::SampledObjective(const system::DynamicalSystem& sys, TrajectoryDataset data, ObjectiveConfig cfg)
    : sys_(&sys), data_(std::move(data)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

double SampledObjective::value(const RepresentativePair& pair) const { return evaluate(*sys_, pair, data_, cfg_); }

GradientResult SampledObjective::value_and_gradient(const RepresentativePair& pair) const {
  return gradient_sampled(*sys_, pair, data_, cfg_);
}

IntegratedObjective::IntegratedObjective(const system::DynamicalSystem& sys, std::vector<SignalTrajectory> signals,
                                         ObjectiveConfig cfg)
    : sys_(&sys), signals_(std::move(signals)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

double IntegratedObjective::value(const RepresentativePair& pair) const {
  return evaluate_integrated(*sys_, pair, signals_, cfg_);
}

GradientResult IntegratedObjective::value_and_gradient(const RepresentativePair& pair) const {
  return gradient_integrated(*sys_, pair, signals_, cfg_);
}

}  // namespace troop::objective
