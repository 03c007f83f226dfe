#pragma once

#include <Eigen/Dense>

#include "troop/errors.hpp"

namespace troop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace manifold {

/// An n x r matrix with orthonormal columns, used as the canonical
/// representative of a point on the Grassmann manifold G(n, r).
class OrthoRep {
 public:
  OrthoRep() = default;

  /// Adopts `cols` after checking ||cols^T cols - I||_F <= tol.
  static OrthoRep adopt(Matrix cols, double tol = 1e-10);

  const Matrix& cols() const noexcept { return cols_; }
  Eigen::Index n() const noexcept { return cols_.rows(); }
  Eigen::Index r() const noexcept { return cols_.cols(); }

  /// ||Q^T Q - I||_F
  double orthonormality_defect() const;

  /// Returns the representative with column `j` negated (same subspace).
  OrthoRep with_flipped_column(Eigen::Index j) const;

 private:
  explicit OrthoRep(Matrix cols) : cols_(std::move(cols)) {}
  friend struct OrthoRepAccess;

  Matrix cols_;
};

/// Orthonormal representatives (phi, psi) of the subspaces (V, W) defining the
/// oblique projector phi (psi^T phi)^{-1} psi^T. Always has det(psi^T phi) > 0.
class RepresentativePair {
 public:
  RepresentativePair() = default;

  const OrthoRep& phi() const noexcept { return phi_; }
  const OrthoRep& psi() const noexcept { return psi_; }
  Eigen::Index n() const noexcept { return phi_.n(); }
  Eigen::Index r() const noexcept { return phi_.r(); }

  /// psi^T phi
  Matrix pairing() const { return psi_.cols().transpose() * phi_.cols(); }

 private:
  RepresentativePair(OrthoRep phi, OrthoRep psi) : phi_(std::move(phi)), psi_(std::move(psi)) {}
  friend RepresentativePair fix_sign(const OrthoRep&, const OrthoRep&);

  OrthoRep phi_;
  OrthoRep psi_;
};

/// Pair of n x r matrices lifting a tangent vector at a RepresentativePair.
struct TangentLift {
  Matrix x;
  Matrix y;

  static TangentLift zero(Eigen::Index n, Eigen::Index r) {
    return {Matrix::Zero(n, r), Matrix::Zero(n, r)};
  }

  TangentLift& operator+=(const TangentLift& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  TangentLift& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend TangentLift operator+(TangentLift a, const TangentLift& b) { return a += b; }
  friend TangentLift operator*(double s, TangentLift a) { return a *= s; }
  friend TangentLift operator-(const TangentLift& a) { return {-a.x, -a.y}; }
};

/// QR with positive R diagonal. Throws RankDeficient when the smallest
/// singular value is <= 1e-12 times the largest.
OrthoRep orthonormalize(const Matrix& m);

/// As `orthonormalize`, also returning the triangular factor: m = Q R.
struct QrFactors {
  OrthoRep q;
  Matrix r;
};
QrFactors orthonormalize_with_factor(const Matrix& m);

/// Negates the first column of phi if det(psi^T phi) < 0. Throws
/// SingularPairing when |det(psi^T phi)| <= 1e-12.
RepresentativePair fix_sign(const OrthoRep& phi, const OrthoRep& psi);

/// sgn det(psi^T phi); throws SingularPairing as `fix_sign` does.
double pairing_sign(const OrthoRep& phi, const OrthoRep& psi);

/// Quotient metric for one component at an arbitrary full-rank representative:
/// Tr[(B^T B)^{-1} a^T b].
double component_inner(const Matrix& base, const Matrix& a, const Matrix& b);

/// Product metric at the pair. Orthonormal representatives reduce it to
/// Tr[a.x^T b.x] + Tr[a.y^T b.y].
double metric(const RepresentativePair& pair, const TangentLift& a, const TangentLift& b);

inline double norm_sq(const RepresentativePair& pair, const TangentLift& a) {
  return metric(pair, a, a);
}

/// m - base (base^T m): orthogonal projection onto the horizontal space.
Matrix horizontal_project(const OrthoRep& base, const Matrix& m);

/// Same as above for a non-orthonormal representative: m - B (B^T B)^{-1} B^T m.
Matrix horizontal_project(const Matrix& base, const Matrix& m);

TangentLift horizontal_project(const RepresentativePair& pair, const TangentLift& v);

/// Grassmann geodesic t -> exp_base(t dir), with the thin SVD of the
/// direction computed once so that a line search can query many step sizes.
class Geodesic {
 public:
  Geodesic(OrthoRep base, const Matrix& dir);

  OrthoRep point(double alpha) const;

  /// Parallel translation of a horizontal `v` from base to point(alpha).
  Matrix translate(double alpha, const Matrix& v) const;

  /// Velocity at point(alpha); equals translate(alpha, dir).
  Matrix velocity(double alpha) const { return translate(alpha, dir_); }

  const OrthoRep& base() const noexcept { return base_; }

 private:
  OrthoRep base_;
  Matrix dir_;
  Matrix u_;
  Vector sigma_;
  Matrix v_;
};

OrthoRep geodesic_step(const OrthoRep& base, const Matrix& dir, double alpha);

Matrix parallel_translate(const OrthoRep& base, const Matrix& dir, double alpha, const Matrix& v);

/// span(base + v), orthonormalized.
OrthoRep retract(const OrthoRep& base, const Matrix& v);

/// Lift of the differentiated-retraction transport, expressed at the
/// (non-orthonormal) representative base + dir: P^h_{base+dir}(v).
Matrix transport_by_projection(const OrthoRep& base, const Matrix& dir, const Matrix& v);

/// The retraction curve t -> span(base + t dir) with transport, expressed at
/// the orthonormalized representative Q(t) of base + t dir = Q(t) R(t).
class RetractionCurve {
 public:
  RetractionCurve(OrthoRep base, Matrix dir);

  OrthoRep point(double alpha) const;

  /// Lift at point(alpha) of the transported horizontal vector `v`.
  Matrix translate(double alpha, const Matrix& v) const;

  Matrix velocity(double alpha) const { return translate(alpha, dir_); }

 private:
  OrthoRep base_;
  Matrix dir_;
};

/// Frobenius distance between the orthogonal projectors onto range(a) and range(b).
double subspace_distance(const Matrix& a, const Matrix& b);

/// Orthogonal projector onto range(m) for a full-rank m.
Matrix range_projector(const Matrix& m);

/// Oblique projector phi (psi^T phi)^{-1} psi^T for arbitrary full-rank representatives.
Matrix oblique_projector(const Matrix& phi, const Matrix& psi);

}  // namespace manifold
}  // namespace troop
