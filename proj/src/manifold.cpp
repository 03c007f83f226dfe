#include "troop/manifold.hpp"

#include <cmath>
#include <sstream>

namespace troop {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularPairing: return "SingularPairing";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::BlowUp: return "BlowUp";
    case ErrorKind::LineSearchFailed: return "LineSearchFailed";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::NearSingularGramian: return "NearSingularGramian";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace manifold {

struct OrthoRepAccess {
  static OrthoRep make(Matrix cols) { return OrthoRep(std::move(cols)); }
};

namespace {

constexpr double kRankTol = 1e-12;
constexpr double kDriftTol = 1e-12;
constexpr double kPairingTol = 1e-12;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

}  // namespace

OrthoRep OrthoRep::adopt(Matrix cols, double tol) {
  if (cols.cols() == 0 || cols.cols() > cols.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "representative must be n x r with 1 <= r <= n");
  }
  OrthoRep rep(std::move(cols));
  if (!(rep.orthonormality_defect() <= tol)) {
    throw Error(ErrorKind::InvalidArgument, "columns are not orthonormal");
  }
  return rep;
}

double OrthoRep::orthonormality_defect() const {
  const Eigen::Index r = cols_.cols();
  return (cols_.transpose() * cols_ - Matrix::Identity(r, r)).norm();
}

OrthoRep OrthoRep::with_flipped_column(Eigen::Index j) const {
  Matrix c = cols_;
  c.col(j) *= -1.0;
  return OrthoRep(std::move(c));
}

QrFactors orthonormalize_with_factor(const Matrix& m) {
  const Eigen::Index n = m.rows();
  const Eigen::Index r = m.cols();
  if (r == 0 || r > n) {
    throw Error(ErrorKind::DimensionMismatch, "orthonormalize expects n x r with 1 <= r <= n");
  }
  if (!m.allFinite()) {
    throw Error(ErrorKind::RankDeficient, "matrix has non-finite entries");
  }
  const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  if (!(sv(r - 1) > kRankTol * sv(0))) {
    throw Error(ErrorKind::RankDeficient, "columns are linearly dependent");
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  Matrix rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (rr(j, j) < 0.0) {
      q.col(j) *= -1.0;
      rr.row(j) *= -1.0;
    }
  }
  return {OrthoRepAccess::make(std::move(q)), std::move(rr)};
}

OrthoRep orthonormalize(const Matrix& m) { return orthonormalize_with_factor(m).q; }

double pairing_sign(const OrthoRep& phi, const OrthoRep& psi) {
  require_same_shape(phi.cols(), psi.cols(), "pairing");
  const double det = (psi.cols().transpose() * phi.cols()).determinant();
  if (!(std::abs(det) > kPairingTol)) {
    throw Error(ErrorKind::SingularPairing, "det(psi^T phi) vanishes; subspaces define no projector");
  }
  return det > 0.0 ? 1.0 : -1.0;
}

RepresentativePair fix_sign(const OrthoRep& phi, const OrthoRep& psi) {
  if (pairing_sign(phi, psi) < 0.0) return RepresentativePair(phi.with_flipped_column(0), psi);
  return RepresentativePair(phi, psi);
}

double component_inner(const Matrix& base, const Matrix& a, const Matrix& b) {
  require_same_shape(base, a, "metric");
  require_same_shape(base, b, "metric");
  const Matrix gram = base.transpose() * base;
  return gram.ldlt().solve(a.transpose() * b).trace();
}

double metric(const RepresentativePair& pair, const TangentLift& a, const TangentLift& b) {
  const Matrix& phi = pair.phi().cols();
  require_same_shape(phi, a.x, "metric");
  require_same_shape(phi, a.y, "metric");
  require_same_shape(phi, b.x, "metric");
  require_same_shape(phi, b.y, "metric");
  // Orthonormal representatives: the Gram factors are identities.
  return (a.x.array() * b.x.array()).sum() + (a.y.array() * b.y.array()).sum();
}

Matrix horizontal_project(const OrthoRep& base, const Matrix& m) {
  require_same_shape(base.cols(), m, "horizontal_project");
  return m - base.cols() * (base.cols().transpose() * m);
}

Matrix horizontal_project(const Matrix& base, const Matrix& m) {
  require_same_shape(base, m, "horizontal_project");
  const Matrix gram = base.transpose() * base;
  return m - base * gram.ldlt().solve(base.transpose() * m);
}

TangentLift horizontal_project(const RepresentativePair& pair, const TangentLift& v) {
  return {horizontal_project(pair.phi(), v.x), horizontal_project(pair.psi(), v.y)};
}

Geodesic::Geodesic(OrthoRep base, const Matrix& dir) : base_(std::move(base)), dir_(dir) {
  require_same_shape(base_.cols(), dir, "geodesic");
  Eigen::JacobiSVD<Matrix> svd(dir, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  sigma_ = svd.singularValues();
  v_ = svd.matrixV();
}

OrthoRep Geodesic::point(double alpha) const {
  if (alpha == 0.0 || sigma_.size() == 0 || sigma_(0) == 0.0) return base_;
  const Vector c = (alpha * sigma_).array().cos();
  const Vector s = (alpha * sigma_).array().sin();
  Matrix p = (base_.cols() * v_ * c.asDiagonal() + u_ * s.asDiagonal()) * v_.transpose();
  const Eigen::Index r = p.cols();
  if ((p.transpose() * p - Matrix::Identity(r, r)).norm() > kDriftTol) return orthonormalize(p);
  return OrthoRepAccess::make(std::move(p));
}

Matrix Geodesic::translate(double alpha, const Matrix& v) const {
  require_same_shape(base_.cols(), v, "parallel_translate");
  if (alpha == 0.0) return v;
  const Vector c = (alpha * sigma_).array().cos();
  const Vector s = (alpha * sigma_).array().sin();
  const Matrix utv = u_.transpose() * v;
  return (-base_.cols() * v_ * s.asDiagonal() + u_ * c.asDiagonal()) * utv + v - u_ * utv;
}

OrthoRep geodesic_step(const OrthoRep& base, const Matrix& dir, double alpha) {
  return Geodesic(base, dir).point(alpha);
}

Matrix parallel_translate(const OrthoRep& base, const Matrix& dir, double alpha, const Matrix& v) {
  return Geodesic(base, dir).translate(alpha, v);
}

OrthoRep retract(const OrthoRep& base, const Matrix& v) {
  require_same_shape(base.cols(), v, "retract");
  return orthonormalize(base.cols() + v);
}

Matrix transport_by_projection(const OrthoRep& base, const Matrix& dir, const Matrix& v) {
  require_same_shape(base.cols(), dir, "transport");
  const Matrix target = base.cols() + dir;
  // Validates the rank of the retracted representative.
  const QrFactors f = orthonormalize_with_factor(target);
  return v - f.q.cols() * (f.q.cols().transpose() * v);
}

RetractionCurve::RetractionCurve(OrthoRep base, Matrix dir) : base_(std::move(base)), dir_(std::move(dir)) {
  require_same_shape(base_.cols(), dir_, "retraction");
}

OrthoRep RetractionCurve::point(double alpha) const {
  if (alpha == 0.0) return base_;
  return orthonormalize(base_.cols() + alpha * dir_);
}

Matrix RetractionCurve::translate(double alpha, const Matrix& v) const {
  if (alpha == 0.0) return v;
  const QrFactors f = orthonormalize_with_factor(base_.cols() + alpha * dir_);
  const Matrix projected = v - f.q.cols() * (f.q.cols().transpose() * v);
  // Lift at Q = (base + alpha dir) R^{-1} is the lift at base + alpha dir times R^{-1}.
  return f.r.transpose().triangularView<Eigen::Lower>().solve(projected.transpose()).transpose();
}

Matrix range_projector(const Matrix& m) {
  const Matrix q = orthonormalize(m).cols();
  return q * q.transpose();
}

double subspace_distance(const Matrix& a, const Matrix& b) {
  return (range_projector(a) - range_projector(b)).norm();
}

Matrix oblique_projector(const Matrix& phi, const Matrix& psi) {
  require_same_shape(phi, psi, "oblique_projector");
  const Matrix pairing = psi.transpose() * phi;
  return phi * pairing.partialPivLu().solve(psi.transpose());
}

}  // namespace manifold
}  // namespace troop
