#include "troop/baselines.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace troop::baselines {

namespace {

constexpr double kRankTol = 1e-12;

void check_lti(const system::LtiSystem& sys) {
  const Eigen::Index n = sys.a.rows();
  if (n == 0 || sys.a.cols() != n || sys.b.rows() != n || sys.c.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "LTI matrices have inconsistent shapes");
  }
}

}  // namespace

void SnapshotMatrix::validate() const {
  if (data.cols() < 1 || data.rows() < 1) throw Error(ErrorKind::InvalidArgument, "snapshot matrix is empty");
  if (!data.allFinite()) throw Error(ErrorKind::InvalidArgument, "snapshot matrix has non-finite entries");
  if (weights.size() != 0) {
    if (weights.size() != data.cols()) throw Error(ErrorKind::DimensionMismatch, "one weight per snapshot expected");
    if (!weights.allFinite() || (weights.array() < 0.0).any()) {
      throw Error(ErrorKind::InvalidArgument, "snapshot weights must be finite and non-negative");
    }
  }
}

RepresentativePair pod(const SnapshotMatrix& snapshots, Eigen::Index r) {
  snapshots.validate();
  const Eigen::Index n = snapshots.data.rows();
  if (r < 1 || r > n) throw Error(ErrorKind::InvalidArgument, "rank must lie in [1, n]");
  Matrix scaled = snapshots.data;
  if (snapshots.weights.size() != 0) scaled = scaled * snapshots.weights.cwiseSqrt().asDiagonal();
  const Eigen::BDCSVD<Matrix> svd(scaled, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  if (r > sv.size() || !(sv(r - 1) > kRankTol * sv(0))) {
    throw Error(ErrorKind::RankDeficient, "snapshots have rank below " + std::to_string(r));
  }
  const manifold::OrthoRep basis = manifold::orthonormalize(svd.matrixU().leftCols(r));
  return manifold::fix_sign(basis, basis);
}

SnapshotMatrix collect_snapshots(const system::DynamicalSystem& sys, const objective::TrajectoryDataset& data,
                                 int substeps, SnapshotSampling sampling) {
  if (data.size() == 0) throw Error(ErrorKind::InvalidArgument, "no trajectories to take snapshots from");
  std::vector<Vector> columns;
  std::vector<double> weights;
  const Eigen::Index channels = sys.input_dim();
  for (const objective::Trajectory& traj : data.trajectories()) {
    const std::vector<double> nodes = integrate::refine_grid(traj.times, substeps);
    const integrate::DenseTrajectory x = integrate::integrate_on_grid(
        [&](double t, const Vector& s) {
          return sys.rhs(s, traj.input.is_zero() ? Vector::Zero(channels) : traj.input(t, channels), t);
        },
        traj.x0, nodes);
    if (sampling == SnapshotSampling::samples) {
      for (std::size_t l = 0; l < traj.samples(); ++l) {
        columns.push_back(x.states()[l * static_cast<std::size_t>(substeps)]);
      }
      continue;
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double lo = nodes[k == 0 ? 0 : k - 1];
      const double hi = nodes[k + 1 == nodes.size() ? k : k + 1];
      columns.push_back(x.states()[k]);
      weights.push_back(0.5 * (hi - lo));
    }
  }
  SnapshotMatrix out;
  out.data.resize(sys.state_dim(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) out.data.col(static_cast<Eigen::Index>(k)) = columns[k];
  if (!weights.empty()) out.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return out;
}

bool is_hurwitz(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  const Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff() < 0.0;
}

Matrix lyapunov_solve(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "Lyapunov operands must be n x n");
  }
  // vec(A X + X A^T) = (I (x) A + A (x) I) vec(X), column-major vec.
  const Eigen::Index nn = n * n;
  Matrix kron = Matrix::Zero(nn, nn);
  for (Eigen::Index j = 0; j < n; ++j) {
    kron.block(j * n, j * n, n, n) += a;
    for (Eigen::Index i = 0; i < n; ++i) {
      kron.block(i * n, j * n, n, n).diagonal().array() += a(i, j);
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(Matrix(q).data(), nn);
  const Vector sol = kron.partialPivLu().solve(rhs);
  Matrix x = Eigen::Map<const Matrix>(sol.data(), n, n);
  return 0.5 * (x + x.transpose());
}

Matrix gramian_factor(const Matrix& gramian) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (gramian + gramian.transpose()));
  Vector ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-12 * scale) throw Error(ErrorKind::NearSingularGramian, "Gramian is indefinite");
      ev(i) = 0.0;
    }
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

BalancedRealization balance(const system::LtiSystem& sys) {
  check_lti(sys);
  if (!is_hurwitz(sys.a)) throw Error(ErrorKind::NotHurwitz, "state matrix has an eigenvalue with Re >= 0");
  BalancedRealization out;
  out.reachability = lyapunov_solve(sys.a, sys.b * sys.b.transpose());
  out.observability = lyapunov_solve(sys.a.transpose(), sys.c.transpose() * sys.c);
  const Matrix lf = gramian_factor(out.reachability);
  const Matrix rf = gramian_factor(out.observability);
  const Eigen::JacobiSVD<Matrix> svd(rf.transpose() * lf, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.hankel = svd.singularValues();
  Eigen::Index k = 0;
  while (k < out.hankel.size() && out.hankel(k) > kRankTol * out.hankel(0)) ++k;
  if (k == 0) throw Error(ErrorKind::NearSingularGramian, "all Hankel singular values vanish");
  const Vector inv_sqrt = out.hankel.head(k).cwiseSqrt().cwiseInverse();
  out.from_balanced = lf * svd.matrixV().leftCols(k) * inv_sqrt.asDiagonal();
  out.to_balanced = inv_sqrt.asDiagonal() * svd.matrixU().leftCols(k).transpose() * rf.transpose();
  return out;
}

RepresentativePair balanced_truncation(const system::LtiSystem& sys, Eigen::Index r) {
  check_lti(sys);
  if (r < 1 || r > sys.a.rows()) throw Error(ErrorKind::InvalidArgument, "rank must lie in [1, n]");
  const BalancedRealization bal = balance(sys);
  if (r > bal.from_balanced.cols()) {
    throw Error(ErrorKind::NearSingularGramian,
                "Hankel singular value " + std::to_string(r) + " is below 1e-12 of the largest");
  }
  const manifold::OrthoRep phi = manifold::orthonormalize(bal.from_balanced.leftCols(r));
  const manifold::OrthoRep psi = manifold::orthonormalize(bal.to_balanced.topRows(r).transpose());
  return manifold::fix_sign(phi, psi);
}

RepresentativePair bt_init_for(const system::DynamicalSystem& sys, Eigen::Index r) {
  return balanced_truncation(system::linearize(sys, Vector::Zero(sys.state_dim())), r);
}

}  // namespace troop::baselines
