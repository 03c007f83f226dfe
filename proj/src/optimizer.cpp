#include "troop/optimizer.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <variant>

namespace troop::optimizer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One component's search curve, exponential or retraction based.
class Curve {
 public:
  Curve(const manifold::OrthoRep& base, const Matrix& dir, TransportMode mode) : curve_(make(base, dir, mode)) {}

  manifold::OrthoRep point(double alpha) const {
    return std::visit([&](const auto& c) { return c.point(alpha); }, curve_);
  }
  Matrix translate(double alpha, const Matrix& v) const {
    return std::visit([&](const auto& c) { return c.translate(alpha, v); }, curve_);
  }

 private:
  using Variant = std::variant<manifold::Geodesic, manifold::RetractionCurve>;

  static Variant make(const manifold::OrthoRep& base, const Matrix& dir, TransportMode mode) {
    if (mode == TransportMode::exponential) return Variant(std::in_place_type<manifold::Geodesic>, base, dir);
    return Variant(std::in_place_type<manifold::RetractionCurve>, base, dir);
  }

  Variant curve_;
};

// The pair along the search direction, sign-fixed, with transported lifts
// adjusted to the sign-fixed representative.
struct Candidate {
  RepresentativePair pair;
  double sign;
};

class SearchLine {
 public:
  SearchLine(const RepresentativePair& base, const TangentLift& dir, TransportMode mode)
      : phi_(base.phi(), dir.x, mode), psi_(base.psi(), dir.y, mode), dir_(dir) {}

  Candidate at(double alpha) const {
    const manifold::OrthoRep phi = phi_.point(alpha);
    const manifold::OrthoRep psi = psi_.point(alpha);
    const double sign = manifold::pairing_sign(phi, psi);
    return {manifold::fix_sign(phi, psi), sign};
  }

  TangentLift transport(double alpha, double sign, const TangentLift& v) const {
    TangentLift out{phi_.translate(alpha, v.x), psi_.translate(alpha, v.y)};
    if (sign < 0.0) out.x.col(0) *= -1.0;
    return out;
  }

  const TangentLift& direction() const noexcept { return dir_; }

 private:
  Curve phi_;
  Curve psi_;
  TangentLift dir_;
};

bool is_domain_failure(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::SingularPairing:
    case ErrorKind::RankDeficient:
    case ErrorKind::BlowUp:
    case ErrorKind::NonFiniteState:
      return true;
    default:
      return false;
  }
}

}  // namespace

void CgConfig::validate() const {
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "Wolfe constants must satisfy 0 < c1 < c2 < 1");
  }
  if (!(eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be >= 0");
  if (max_iters < 0) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 0");
  if (max_line_search_bisections < 1) {
    throw Error(ErrorKind::InvalidArgument, "max_line_search_bisections must be >= 1");
  }
}

LineSearchResult wolfe_bisection(const std::function<double(double)>& value,
                                 const std::function<double(double)>& slope, double value0, double slope0,
                                 const CgConfig& cfg) {
  cfg.validate();
  if (!(slope0 < 0.0)) throw Error(ErrorKind::InvalidArgument, "line search needs a descent direction");
  if (!std::isfinite(value0)) throw Error(ErrorKind::InvalidArgument, "line search needs a finite starting value");
  double lo = 0.0;
  double hi = kInf;
  double alpha = 1.0;
  int bisections = 0;
  int doublings = 0;
  LineSearchResult res;
  while (true) {
    const double v = value(alpha);
    ++res.evals;
    if (!std::isfinite(v) || v > value0 + cfg.c1 * alpha * slope0) {
      hi = alpha;
    } else {
      const double d = slope(alpha);
      ++res.evals;
      if (d >= cfg.c2 * slope0) {
        res.alpha = alpha;
        res.value = v;
        res.slope = d;
        return res;
      }
      lo = alpha;
    }
    if (hi == kInf) {
      if (++doublings > cfg.max_line_search_bisections) {
        throw Error(ErrorKind::LineSearchFailed, "step kept growing; objective appears unbounded below");
      }
      alpha = 2.0 * lo;
    } else {
      if (++bisections > cfg.max_line_search_bisections) {
        throw Error(ErrorKind::LineSearchFailed,
                    "no Wolfe step after " + std::to_string(cfg.max_line_search_bisections) + " bisections");
      }
      alpha = 0.5 * (lo + hi);
    }
  }
}

LineSearchResult wolfe_bisection(const std::function<double(double)>& value,
                                 const std::function<double(double)>& slope, const CgConfig& cfg) {
  LineSearchResult res = wolfe_bisection(value, slope, value(0.0), slope(0.0), cfg);
  res.evals += 2;
  return res;
}

std::optional<double> dai_yuan_beta(double grad_next_sq, double next_dot_transported, double prev_dot_dir) {
  if (!(grad_next_sq > 0.0)) return grad_next_sq == 0.0 ? std::optional<double>(0.0) : std::nullopt;
  const double denom = next_dot_transported - prev_dot_dir;
  if (!std::isfinite(denom) || !(denom > 0.0)) return std::nullopt;
  const double beta = grad_next_sq / denom;
  if (!std::isfinite(beta)) return std::nullopt;
  return beta;
}

std::optional<double> dai_yuan_beta(const TangentLift& grad_next, const TangentLift& grad_prev,
                                    const TangentLift& dir_prev_transported, const TangentLift& dir_prev,
                                    const RepresentativePair& pair_next, const RepresentativePair& pair_prev) {
  return dai_yuan_beta(manifold::norm_sq(pair_next, grad_next),
                       manifold::metric(pair_next, grad_next, dir_prev_transported),
                       manifold::metric(pair_prev, grad_prev, dir_prev));
}

OptimizeResult optimize(const objective::Objective& objective, const RepresentativePair& init, const CgConfig& cfg,
                        const IterationCallback& on_iteration) {
  cfg.validate();
  OptimizeResult out{init, {}, false};
  objective::GradientResult current = objective.value_and_gradient(init);
  double grad_sq = manifold::norm_sq(init, current.grad);

  CgRecord first;
  first.objective = current.value;
  first.grad_norm_sq = grad_sq;
  first.line_search_evals = 1;
  out.trace.push_back(first);
  if (on_iteration) on_iteration(0, first);

  TangentLift dir = -current.grad;
  double beta = 0.0;
  for (int k = 0; k < cfg.max_iters; ++k) {
    if (grad_sq <= cfg.eps) break;
    double slope0 = manifold::metric(out.pair, current.grad, dir);
    if (!(slope0 < 0.0)) {
      dir = -current.grad;
      beta = 0.0;
      slope0 = -grad_sq;
    }
    out.trace.back().beta = beta;

    const SearchLine line(out.pair, dir, cfg.transport);
    // Gradient evaluations are cached so the accepted step's gradient is reused.
    struct Probe {
      double alpha = -1.0;
      std::optional<Candidate> cand;
      objective::GradientResult result;
    };
    auto probe = std::make_unique<Probe>();

    const auto value_at = [&](double alpha) {
      try {
        return objective.value(line.at(alpha).pair);
      } catch (const Error& e) {
        if (is_domain_failure(e)) return kInf;
        throw;
      }
    };
    const auto slope_at = [&](double alpha) {
      Candidate cand = line.at(alpha);
      objective::GradientResult res = objective.value_and_gradient(cand.pair);
      const double d = manifold::metric(cand.pair, res.grad, line.transport(alpha, cand.sign, line.direction()));
      probe->alpha = alpha;
      probe->cand = std::move(cand);
      probe->result = std::move(res);
      return d;
    };

    LineSearchResult ls;
    try {
      ls = wolfe_bisection(value_at, slope_at, current.value, slope0, cfg);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::LineSearchFailed) {
        throw LineSearchFailedError(std::string(e.what()) + " at iteration " + std::to_string(k + 1), out.trace);
      }
      throw;
    }
    if (probe->alpha != ls.alpha) slope_at(ls.alpha);

    const RepresentativePair prev_pair = out.pair;
    const TangentLift prev_grad = current.grad;
    const TangentLift moved = line.transport(ls.alpha, probe->cand->sign, dir);
    out.pair = probe->cand->pair;
    current = std::move(probe->result);
    grad_sq = manifold::norm_sq(out.pair, current.grad);

    const std::optional<double> dy = dai_yuan_beta(current.grad, prev_grad, moved, dir, out.pair, prev_pair);
    beta = dy.value_or(0.0);
    dir = manifold::horizontal_project(out.pair, -current.grad + beta * moved);
    if (!(manifold::metric(out.pair, current.grad, dir) < 0.0)) {
      dir = -current.grad;
      beta = 0.0;
    }

    CgRecord rec;
    rec.objective = current.value;
    rec.grad_norm_sq = grad_sq;
    rec.step_alpha = ls.alpha;
    rec.beta = beta;
    rec.line_search_evals = ls.evals;
    rec.slope_start = slope0;
    rec.slope_accepted = ls.slope;
    out.trace.push_back(rec);
    if (on_iteration) on_iteration(out.trace.size() - 1, rec);
  }
  out.converged = grad_sq <= cfg.eps;
  return out;
}

OptimizeResult optimize(const system::DynamicalSystem& sys, const RepresentativePair& init,
                        const objective::TrajectoryDataset& data, const objective::ObjectiveConfig& obj_cfg,
                        const CgConfig& cfg, const IterationCallback& on_iteration) {
  if (obj_cfg.mode == objective::ObjectiveMode::integrated) {
    const double step = obj_cfg.integrated_step;
    const objective::IntegratedObjective obj(sys, objective::signals_from_dataset(sys, data, step), obj_cfg);
    return optimize(obj, init, cfg, on_iteration);
  }
  const objective::SampledObjective obj(sys, data, obj_cfg);
  return optimize(obj, init, cfg, on_iteration);
}

}  // namespace troop::optimizer
