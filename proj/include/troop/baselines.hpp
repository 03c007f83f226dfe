#pragma once

#include "troop/manifold.hpp"
#include "troop/objective.hpp"
#include "troop/system.hpp"

namespace troop::baselines {

using manifold::RepresentativePair;

/// n x K state snapshots (one per column) with optional per-column weights.
struct SnapshotMatrix {
  Matrix data;
  /// Empty means unit weights; otherwise K non-negative entries.
  Vector weights;

  void validate() const;
};

/// Phi = Psi = leading r left singular vectors of the (weighted) snapshots.
RepresentativePair pod(const SnapshotMatrix& snapshots, Eigen::Index r);

/// Which full-order states become snapshots.
///   samples:    the states at the sample times, unit weights
///   trajectory: every integrator node, with trapezoidal weights, so that the
///               POD approximates the time-continuous trajectory covariance
enum class SnapshotSampling { samples, trajectory };

/// Full-order snapshots of every trajectory in `data`, simulated with RK4 at
/// `substeps` steps per sampling interval.
SnapshotMatrix collect_snapshots(const system::DynamicalSystem& sys, const objective::TrajectoryDataset& data,
                                 int substeps = 200, SnapshotSampling sampling = SnapshotSampling::samples);

bool is_hurwitz(const Matrix& a);

/// Solves A X + X A^T + Q = 0 through the Kronecker-vectorized dense system.
/// Intended for small n (the linear system has n^2 unknowns).
Matrix lyapunov_solve(const Matrix& a, const Matrix& q);

/// Symmetric square-root factor F with G = F F^T, computed from the
/// eigendecomposition of G. Eigenvalues down to -1e-12 max|eig| are clamped to 0.
Matrix gramian_factor(const Matrix& gramian);

/// Reachability and observability Gramians with the balancing transform.
/// `to_balanced` (k x n) and `from_balanced` (n x k) keep the k Hankel singular
/// values above 1e-12 sigma_1, so to_balanced * from_balanced = I_k and both
/// transformed Gramians equal diag(hankel(0:k)).
struct BalancedRealization {
  Matrix reachability;
  Matrix observability;
  Vector hankel;
  Matrix to_balanced;
  Matrix from_balanced;
};

BalancedRealization balance(const system::LtiSystem& sys);

/// Balanced-truncation subspaces of a stable LTI system, orthonormalized and
/// sign-fixed; the oblique projector is the one of the balanced truncation.
RepresentativePair balanced_truncation(const system::LtiSystem& sys, Eigen::Index r);

/// Balanced truncation of the linearization of `sys` at the origin.
RepresentativePair bt_init_for(const system::DynamicalSystem& sys, Eigen::Index r);

}  // namespace troop::baselines
