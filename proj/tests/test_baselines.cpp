#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "troop/baselines.hpp"

using namespace troop;
using namespace troop::baselines;

namespace {

system::LtiSystem random_stable(std::mt19937& rng, Eigen::Index n, Eigen::Index d, Eigen::Index m) {
  Matrix a = oracle::gaussian(rng, n, n);
  const double abscissa = Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().maxCoeff();
  a -= (abscissa + 0.5) * Matrix::Identity(n, n);
  return {a, oracle::gaussian(rng, n, d), oracle::gaussian(rng, m, n)};
}

double lyapunov_residual(const Matrix& a, const Matrix& x, const Matrix& q) {
  return (a * x + x * a.transpose() + q).norm() / q.norm();
}

}  // namespace

TEST_CASE("POD picks the dominant direction") {
  SnapshotMatrix s;
  s.data = Matrix(2, 2);
  s.data << 2, 0, 0, 1;
  const RepresentativePair p = pod(s, 1);
  CHECK(std::abs(std::abs(p.phi().cols()(0, 0)) - 1.0) <= 1e-14);
  CHECK((p.phi().cols() - p.psi().cols()).norm() == 0.0);
}

TEST_CASE("POD at full rank projects onto everything") {
  std::mt19937 rng(1);
  SnapshotMatrix s;
  s.data = oracle::gaussian(rng, 4, 9);
  const RepresentativePair p = pod(s, 4);
  CHECK((manifold::oblique_projector(p.phi().cols(), p.psi().cols()) - Matrix::Identity(4, 4)).norm() <= 1e-12);
}

TEST_CASE("POD is optimal for reconstruction") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    SnapshotMatrix s;
    s.data = oracle::gaussian(rng, 8, 20) * oracle::gaussian(rng, 20, 20).asDiagonal().toDenseMatrix().cwiseAbs();
    const Matrix q = pod(s, 3).phi().cols();
    const double best = (s.data - q * q.transpose() * s.data).norm();
    int beaten = 0;
    for (int k = 0; k < 50; ++k) {
      const Matrix r = oracle::gram_schmidt(oracle::gaussian(rng, 8, 3));
      if ((s.data - r * r.transpose() * s.data).norm() < best) ++beaten;
    }
    CHECK(beaten == 0);
  }
}

TEST_CASE("POD weights scale snapshot columns") {
  SnapshotMatrix s;
  s.data = Matrix(2, 2);
  s.data << 2, 0, 0, 1;
  s.weights = Vector(2);
  s.weights << 0.01, 1.0;
  const RepresentativePair p = pod(s, 1);
  CHECK(std::abs(std::abs(p.phi().cols()(1, 0)) - 1.0) <= 1e-14);
}

TEST_CASE("POD rejects a rank above the snapshot rank") {
  SnapshotMatrix s;
  s.data = Matrix(3, 2);
  s.data << 1, 2, 1, 2, 1, 2;
  try {
    pod(s, 2);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RankDeficient);
  }
}

TEST_CASE("snapshots of the toy model") {
  const auto toy = system::toy_model();
  objective::Trajectory t;
  t.x0 = system::toy_impulse_state(1.0);
  t.times = {0.0, 1.0, 2.0};
  t.observations = Matrix::Ones(3, 1);
  const objective::TrajectoryDataset data(3, 1, {t, t});
  const SnapshotMatrix s = collect_snapshots(*toy, data);
  CHECK(s.data.cols() == 6);
  CHECK((s.data.col(0) - t.x0).norm() == 0.0);
  auto f = [](double, const Vector& x) { return oracle::toy_rhs(x, 0.0); };
  CHECK((s.data.col(2) - oracle::rk4(f, t.x0, 0.0, 2.0, 400)).norm() <= 1e-10);
}

TEST_CASE("trajectory snapshots carry trapezoidal weights") {
  const auto toy = system::toy_model();
  objective::Trajectory t;
  t.x0 = system::toy_impulse_state(0.5);
  t.times = {0.0, 1.0, 3.0};
  t.observations = Matrix::Ones(3, 1);
  const objective::TrajectoryDataset data(3, 1, {t});
  const SnapshotMatrix s = collect_snapshots(*toy, data, 4, SnapshotSampling::trajectory);
  REQUIRE(s.data.cols() == 9);
  REQUIRE(s.weights.size() == 9);
  CHECK(s.weights.sum() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(s.weights(0) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(s.weights(4) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(s.weights(8) == doctest::Approx(0.25).epsilon(1e-14));
  const SnapshotMatrix at_samples = collect_snapshots(*toy, data, 4);
  CHECK((s.data.col(8) - at_samples.data.col(2)).norm() == 0.0);
}

TEST_CASE("scalar balanced truncation") {
  const system::LtiSystem sys{Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  // -2 P + 1 = 0
  const double p_exact = 0.5;
  const BalancedRealization bal = balance(sys);
  CHECK(std::abs(bal.reachability(0, 0) - p_exact) <= 1e-12);
  CHECK(std::abs(bal.observability(0, 0) - p_exact) <= 1e-12);
  CHECK(std::abs(bal.hankel(0) - p_exact) <= 1e-12);
}

TEST_CASE("symmetric system has equal Gramians") {
  std::mt19937 rng(3);
  const Matrix g = oracle::gaussian(rng, 5, 5);
  const Matrix a = -(g * g.transpose() + Matrix::Identity(5, 5));
  const Matrix b = oracle::gaussian(rng, 5, 2);
  const BalancedRealization bal = balance({a, b, b.transpose()});
  CHECK((bal.reachability - bal.observability).norm() <= 1e-10 * bal.reachability.norm());
  const Matrix pb = bal.to_balanced * bal.reachability * bal.to_balanced.transpose();
  CHECK((pb - Matrix(bal.hankel.head(pb.rows()).asDiagonal())).norm() <= 1e-8 * bal.hankel(0));
}

TEST_CASE("Lyapunov solutions and balanced Gramians") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const system::LtiSystem sys = random_stable(rng, 7, 2, 2);
    const BalancedRealization bal = balance(sys);
    CHECK(lyapunov_residual(sys.a, bal.reachability, sys.b * sys.b.transpose()) <= 1e-8);
    CHECK(lyapunov_residual(sys.a.transpose(), bal.observability, sys.c.transpose() * sys.c) <= 1e-8);
    const Matrix sigma = bal.hankel.head(bal.to_balanced.rows()).asDiagonal();
    const Matrix pb = bal.to_balanced * bal.reachability * bal.to_balanced.transpose();
    const Matrix qb = bal.from_balanced.transpose() * bal.observability * bal.from_balanced;
    CHECK((pb - sigma).norm() <= 1e-8 * bal.hankel(0));
    CHECK((qb - sigma).norm() <= 1e-8 * bal.hankel(0));
    CHECK((bal.to_balanced * bal.from_balanced - Matrix::Identity(sigma.rows(), sigma.rows())).norm() <= 1e-8);
  }
}

TEST_CASE("balanced truncation error against the Hankel tail") {
  std::mt19937 rng(5);
  const system::LtiSystem sys = random_stable(rng, 10, 1, 1);
  const auto model = system::make_lti(sys);
  const Eigen::Index r = 4;
  const RepresentativePair pair = balanced_truncation(sys, r);
  CHECK(pair.pairing().determinant() > 0.0);
  const Vector hankel = balance(sys).hankel;
  const double tail = hankel.tail(hankel.size() - r).sum();

  // Impulse responses y(t) = C e^{At} B and its reduced counterpart, compared in L2(0, T).
  std::vector<double> times;
  const double horizon = 40.0;
  for (int l = 0; l <= 4000; ++l) times.push_back(horizon * l / 4000.0);
  const Vector x0 = sys.b.col(0);
  const Matrix y = objective::simulate_full_outputs(*model, x0, times, system::InputSignal::none(), 4);
  const Matrix yr =
      objective::simulate_outputs(projection::ReducedModel(*model, pair), x0, times, system::InputSignal::none(), 4);
  double err2 = 0.0;
  for (std::size_t l = 0; l + 1 < times.size(); ++l) {
    const double dt = times[l + 1] - times[l];
    err2 += 0.5 * dt * ((y.row(l) - yr.row(l)).squaredNorm() + (y.row(l + 1) - yr.row(l + 1)).squaredNorm());
  }
  MESSAGE("impulse L2 error " << std::sqrt(err2) << ", 2 * Hankel tail " << 2.0 * tail);
  CHECK(std::sqrt(err2) <= 2.0 * tail);
}

TEST_CASE("balanced truncation of the toy linearization") {
  const auto toy = system::toy_model();
  const RepresentativePair init = bt_init_for(*toy, 2);
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << -1, -2, -5;
  const RepresentativePair ref = balanced_truncation({a, Matrix::Ones(3, 1), Matrix::Ones(1, 3)}, 2);
  CHECK(oracle::projector_distance(init.phi().cols(), ref.phi().cols()) <= 1e-12);
  CHECK(oracle::projector_distance(init.psi().cols(), ref.psi().cols()) <= 1e-12);
  CHECK(init.pairing().determinant() > 0.0);
  // Symmetric realization: the trial and test spaces coincide.
  CHECK(oracle::projector_distance(init.phi().cols(), init.psi().cols()) <= 1e-10);
}

TEST_CASE("unstable systems are rejected") {
  const system::LtiSystem sys{Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Ones(1, 2)};
  CHECK_FALSE(is_hurwitz(sys.a));
  try {
    balance(sys);
    FAIL("expected NotHurwitz");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotHurwitz);
  }
}

TEST_CASE("Gramian factor") {
  std::mt19937 rng(6);
  const Matrix g = oracle::gaussian(rng, 4, 2);
  const Matrix psd = g * g.transpose();
  const Matrix f = gramian_factor(psd);
  CHECK((f * f.transpose() - psd).norm() <= 1e-12 * psd.norm());
  CHECK_THROWS_AS(gramian_factor(-Matrix::Identity(2, 2)), Error);
}
