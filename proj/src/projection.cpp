#include "troop/projection.hpp"

#include <spdlog/spdlog.h>

namespace troop::projection {

namespace {

constexpr double kConditionWarn = 1e8;

Matrix pairing_inverse_of(const RepresentativePair& pair, double& condition) {
  const Matrix pairing = pair.pairing();
  const Vector sv = Eigen::JacobiSVD<Matrix>(pairing).singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 0.0)) throw Error(ErrorKind::SingularPairing, "psi^T phi is singular");
  condition = sv(0) / smallest;
  const Eigen::Index r = pairing.rows();
  return pairing.partialPivLu().solve(Matrix::Identity(r, r));
}

}  // namespace

Vector reduce_to_coords(const RepresentativePair& pair, const Vector& x) {
  if (x.size() != pair.n()) throw Error(ErrorKind::DimensionMismatch, "state has wrong size");
  return pair.pairing().partialPivLu().solve(pair.psi().cols().transpose() * x);
}

Vector project(const RepresentativePair& pair, const Vector& x) {
  return pair.phi().cols() * reduce_to_coords(pair, x);
}

ReducedModel::ReducedModel(const system::DynamicalSystem& sys, RepresentativePair pair, Path path)
    : sys_(&sys), pair_(std::move(pair)) {
  if (pair_.n() != sys.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "representatives do not match the model state dimension");
  }
  pairing_inv_ = pairing_inverse_of(pair_, condition_);
  if (condition_ > kConditionWarn) {
    spdlog::warn("oblique projector is ill-conditioned: cond(psi^T phi) = {:.3e}", condition_);
  }
  left_ = pairing_inv_ * pair_.psi().cols().transpose();

  const auto* qb = dynamic_cast<const system::QuadraticBilinearModel*>(&sys);
  if (path == Path::automatic && qb != nullptr) {
    fast_ = true;
    const Matrix& phi = pair_.phi().cols();
    const Eigen::Index r = pair_.r();
    a_red_ = left_ * qb->a() * phi;
    b_red_ = left_ * qb->b();
    c_red_ = qb->c() * phi;
    h_red_ = Matrix::Zero(r, r * r);
    for (const system::QuadraticTerm& t : qb->quadratic_terms()) {
      const Vector col = t.value * left_.col(t.i);
      for (Eigen::Index j = 0; j < r; ++j) {
        const double pj = phi(t.j, j);
        if (pj == 0.0) continue;
        for (Eigen::Index k = 0; k < r; ++k) h_red_.col(j * r + k) += (pj * phi(t.k, k)) * col;
      }
    }
  }
}

Vector ReducedModel::quadratic(const Vector& a, const Vector& b) const {
  const Eigen::Index r = pair_.r();
  Vector out = Vector::Zero(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    if (a(j) == 0.0) continue;
    out.noalias() += a(j) * (h_red_.middleCols(j * r, r) * b);
  }
  return out;
}

Vector ReducedModel::rhs(const Vector& z, const Vector& u, double t) const {
  if (fast_) {
    Vector out = a_red_ * z + quadratic(z, z);
    if (b_red_.cols() > 0 && u.size() > 0) out.noalias() += b_red_ * u;
    return out;
  }
  return left_ * sys_->rhs(lift(z), u, t);
}

Vector ReducedModel::jvp(const Vector& z, const Vector& u, double t, const Vector& v) const {
  if (fast_) return a_red_ * v + quadratic(z, v) + quadratic(v, z);
  return left_ * sys_->jvp(lift(z), u, t, lift(v));
}

Matrix ReducedModel::jacobian(const Vector& z, const Vector& u, double t) const {
  const Eigen::Index r = pair_.r();
  if (fast_) {
    Matrix jac = a_red_;
    for (Eigen::Index j = 0; j < r; ++j) {
      // d/dz of sum_{j,k} z_j z_k h(:, j r + k)
      jac.noalias() += h_red_.middleCols(j * r, r) * z(j);
      for (Eigen::Index k = 0; k < r; ++k) jac.col(j) += z(k) * h_red_.col(j * r + k);
    }
    return jac;
  }
  Matrix jac(r, r);
  const Vector x = lift(z);
  for (Eigen::Index j = 0; j < r; ++j) jac.col(j) = left_ * sys_->jvp(x, u, t, pair_.phi().cols().col(j));
  return jac;
}

Vector ReducedModel::jtvp(const Vector& z, const Vector& u, double t, const Vector& w) const {
  if (fast_) return jacobian(z, u, t).transpose() * w;
  return pair_.phi().cols().transpose() * sys_->jtvp(lift(z), u, t, left_.transpose() * w);
}

Vector ReducedModel::obs(const Vector& z) const {
  if (fast_) return c_red_ * z;
  return sys_->obs(lift(z));
}

Vector ReducedModel::obs_jtvp(const Vector& z, const Vector& w) const {
  if (fast_) return c_red_.transpose() * w;
  return pair_.phi().cols().transpose() * sys_->obs_jtvp(lift(z), w);
}

ReducedModel assemble_rom(const system::DynamicalSystem& sys, const RepresentativePair& pair) {
  return ReducedModel(sys, pair);
}

}  // namespace troop::projection
