#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "troop/manifold.hpp"
#include "troop/objective.hpp"

namespace troop::optimizer {

using manifold::RepresentativePair;
using manifold::TangentLift;

enum class TransportMode { exponential, retraction };

struct CgConfig {
  double c1 = 0.01;
  double c2 = 0.1;
  /// Stop once the squared gradient metric-norm is <= eps.
  double eps = 1e-8;
  int max_iters = 500;
  int max_line_search_bisections = 60;
  TransportMode transport = TransportMode::exponential;

  /// Throws InvalidArgument unless 0 < c1 < c2 < 1 and the limits are sane.
  void validate() const;
};

/// State after iteration k. Record 0 is the initial point; for k > 0,
/// step_alpha is the step that produced it and beta the coefficient used to
/// build the search direction leaving it.
struct CgRecord {
  double objective = 0.0;
  double grad_norm_sq = 0.0;
  double step_alpha = 0.0;
  double beta = 0.0;
  int line_search_evals = 0;
  /// Directional derivative along the direction that produced this iterate,
  /// at alpha = 0 and at the accepted alpha. Kept in memory for checks only.
  double slope_start = 0.0;
  double slope_accepted = 0.0;
};

using CgTrace = std::vector<CgRecord>;

/// Raised when bisection exhausts its budget; carries the iterations so far.
class LineSearchFailedError : public Error {
 public:
  LineSearchFailedError(const std::string& what, CgTrace trace)
      : Error(ErrorKind::LineSearchFailed, what), trace_(std::move(trace)) {}
  const CgTrace& trace() const noexcept { return trace_; }

 private:
  CgTrace trace_;
};

struct LineSearchResult {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;
  int evals = 0;
};

/// Weak Wolfe step by expansion and bisection, starting at alpha = 1.
/// `value` may return +inf, which counts as a sufficient-decrease failure.
LineSearchResult wolfe_bisection(const std::function<double(double)>& value,
                                 const std::function<double(double)>& slope, double value0, double slope0,
                                 const CgConfig& cfg);

LineSearchResult wolfe_bisection(const std::function<double(double)>& value,
                                 const std::function<double(double)>& slope, const CgConfig& cfg);

/// Dai-Yuan coefficient
///   <g_next, g_next> / (<g_next, T dir_prev> - <g_prev, dir_prev>)
/// with dir_prev the search direction (a descent direction) at pair_prev and
/// T dir_prev its transport to pair_next. Empty when the denominator is not
/// a finite positive number, which signals a steepest-descent restart.
std::optional<double> dai_yuan_beta(const TangentLift& grad_next, const TangentLift& grad_prev,
                                    const TangentLift& dir_prev_transported, const TangentLift& dir_prev,
                                    const RepresentativePair& pair_next, const RepresentativePair& pair_prev);

/// Same coefficient from precomputed inner products.
std::optional<double> dai_yuan_beta(double grad_next_sq, double next_dot_transported, double prev_dot_dir);

struct OptimizeResult {
  RepresentativePair pair;
  CgTrace trace;
  bool converged = false;
};

using IterationCallback = std::function<void(std::size_t iteration, const CgRecord&)>;

OptimizeResult optimize(const objective::Objective& objective, const RepresentativePair& init,
                        const CgConfig& cfg, const IterationCallback& on_iteration = {});

/// Builds the sampled or integrated objective from `obj_cfg.mode` and runs `optimize`.
OptimizeResult optimize(const system::DynamicalSystem& sys, const RepresentativePair& init,
                        const objective::TrajectoryDataset& data, const objective::ObjectiveConfig& obj_cfg,
                        const CgConfig& cfg, const IterationCallback& on_iteration = {});

}  // namespace troop::optimizer
