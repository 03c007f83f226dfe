#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "troop/integrate.hpp"
#include "troop/system.hpp"

using namespace troop;
using namespace troop::integrate;

TEST_CASE("forward integration") {
  SUBCASE("zero rhs keeps the state") {
    Vector x0(2);
    x0 << 1.5, -2.0;
    const DenseTrajectory tr = integrate_forward([](double, const Vector& x) { return Vector::Zero(x.size()); },
                                                 x0, 0.0, 3.0, 0.1);
    CHECK((tr.back() - x0).norm() == 0.0);
    CHECK((tr.eval(1.234) - x0).norm() <= 1e-15);
  }
  SUBCASE("scalar decay") {
    const DenseTrajectory tr =
        integrate_forward([](double, const Vector& x) { return Vector(-x); }, Vector::Ones(1), 0.0, 1.0, 1e-3);
    CHECK(std::abs(tr.back()(0) - std::exp(-1.0)) <= 1e-8);
    CHECK(tr.t_end() == 1.0);
  }
  SUBCASE("last step lands on the endpoint") {
    const DenseTrajectory tr =
        integrate_forward([](double, const Vector& x) { return Vector(-x); }, Vector::Ones(1), 0.0, 1.0, 0.3);
    CHECK(tr.times().back() == 1.0);
    CHECK(tr.size() == 5);
  }
  SUBCASE("non-finite states are reported") {
    try {
      integrate_forward([](double, const Vector& x) { return Vector(x.array().square() * 1e3); }, Vector::Ones(1),
                        0.0, 10.0, 0.1);
      FAIL("expected NonFiniteState");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteState);
    }
  }
}

TEST_CASE("forward integration matches an independent RK4 loop") {
  auto f = [](double, const Vector& x) { return oracle::toy_rhs(x, 0.0); };
  const Vector x0 = system::toy_impulse_state(0.5);
  const DenseTrajectory tr = integrate_forward(f, x0, 0.0, 2.0, 0.01);
  CHECK((tr.back() - oracle::rk4(f, x0, 0.0, 2.0, 200)).norm() <= 1e-12);
}

TEST_CASE("toy model converges at fourth order") {
  const auto toy = system::toy_model();
  auto f = [&](double t, const Vector& x) { return toy->rhs(x, Vector::Zero(1), t); };
  const Vector x0 = system::toy_impulse_state(1.0);
  auto y10 = [&](double step) { return toy->obs(integrate_forward(f, x0, 0.0, 10.0, step).back())(0); };
  const double a = y10(0.005), b = y10(0.0025), c = y10(0.00125);
  // Successive differences shrink by 2^p with p the observed order.
  const double order = std::log2((b - a) / (c - b));
  CHECK(std::abs(order - 4.0) <= 0.1);
}

TEST_CASE("dense output") {
  auto f = [](double t, const Vector& x) {
    Vector d(2);
    d << x(1), -x(0) + 0.0 * t;
    return d;
  };
  Vector x0(2);
  x0 << 1.0, 0.0;
  auto max_err = [&](double step) {
    const DenseTrajectory tr = integrate_forward(f, x0, 0.0, 2.0, step);
    for (std::size_t k = 0; k < tr.size(); ++k) CHECK((tr.eval(tr.times()[k]) - tr.states()[k]).norm() == 0.0);
    double err = 0.0;
    for (int i = 0; i <= 997; ++i) {
      const double t = 2.0 * i / 997.0;
      err = std::max(err, std::abs(tr.eval(t)(0) - std::cos(t)));
    }
    return err;
  };
  const double coarse = max_err(0.1);
  const double fine = max_err(0.05);
  CHECK(fine <= coarse / 10.0);
}

TEST_CASE("adjoint integration") {
  SUBCASE("zero dynamics keep lambda") {
    Vector l(3);
    l << 1, 2, 3;
    const DenseTrajectory tr = integrate_adjoint_backward(
        [](double, const Vector& x) { return Vector::Zero(x.size()); }, l, 2.0, 0.5, 0.1);
    CHECK((tr.front() - l).norm() == 0.0);
    CHECK(tr.t_begin() == 0.5);
    CHECK(tr.t_end() == 2.0);
  }
  SUBCASE("scalar linear solution") {
    const double a = -0.7;
    const DenseTrajectory tr = integrate_adjoint_backward(
        [a](double, const Vector& x) { return Vector(a * x); }, Vector::Ones(1), 3.0, 1.0, 1e-3);
    CHECK(std::abs(tr.front()(0) - std::exp(a * 2.0)) <= 1e-10);
  }
}

TEST_CASE("forward-adjoint pairing is conserved on a linear system") {
  std::mt19937 rng(3);
  const Matrix f = oracle::gaussian(rng, 4, 4) - 2.0 * Matrix::Identity(4, 4);
  const Vector v0 = oracle::gaussian_vector(rng, 4);
  const Vector l1 = oracle::gaussian_vector(rng, 4);
  const std::vector<double> nodes = uniform_grid(0.0, 2.0, 1e-3);
  const DenseTrajectory v = integrate_on_grid([&](double, const Vector& x) { return Vector(f * x); }, v0, nodes);
  const DenseTrajectory l =
      integrate_adjoint_on_grid([&](double, const Vector& x) { return Vector(f.transpose() * x); }, l1, nodes);
  const double end = v.back().dot(l.back());
  for (std::size_t k = 0; k < nodes.size(); k += 250) {
    CHECK(std::abs(v.states()[k].dot(l.states()[k]) - end) <= 1e-8 * std::max(1.0, std::abs(end)));
  }
}

TEST_CASE("Gauss-Legendre quadrature") {
  CHECK(quad_integrate(QuadratureRule(2), [](double) { return 1.0; }, 0.0, 2.0) == doctest::Approx(2.0));
  CHECK(std::abs(quad_integrate(QuadratureRule(2), [](double t) { return t * t * t; }, 0.0, 1.0) - 0.25) <=
        1e-15);
  {
    // Gauss-Legendre remainder: (b-a)^(2q+1) (q!)^4 / ((2q+1) ((2q)!)^3) f^(2q)(xi), here with
    // f^(8) = cos in [0, 1] on [0, pi/2], so the rule underestimates by at most `bound`.
    const double bound = std::pow(std::numbers::pi / 2, 9) * std::pow(24.0, 4) / (9.0 * std::pow(40320.0, 3));
    const double got = quad_integrate(QuadratureRule(4), [](double t) { return std::cos(t); }, 0.0,
                                      std::numbers::pi / 2);
    CHECK(1.0 - got >= 0.0);
    CHECK(1.0 - got <= bound);
    CHECK(std::abs(quad_integrate(QuadratureRule(6), [](double t) { return std::cos(t); }, 0.0,
                                  std::numbers::pi / 2) -
                   1.0) <= 1e-12);
  }
  for (int q = 1; q <= 10; ++q) {
    const QuadratureRule rule(q);
    const int degree = 2 * q - 1;
    const double exact = (std::pow(1.5, degree + 1) - std::pow(-0.5, degree + 1)) / (degree + 1);
    const double got = quad_integrate(rule, [degree](double t) { return std::pow(t, degree); }, -0.5, 1.5);
    CHECK(std::abs(got - exact) <= 1e-12 * std::max(1.0, std::abs(exact)));
  }
  CHECK_THROWS_AS(QuadratureRule(0), Error);
  CHECK_THROWS_AS(QuadratureRule(11), Error);
}

TEST_CASE("grids") {
  const std::vector<double> samples{0.0, 1.0, 3.0};
  const std::vector<double> fine = refine_grid(samples, 4);
  CHECK(fine.size() == 9);
  CHECK(fine[4] == 1.0);
  CHECK(fine[8] == 3.0);
  const std::vector<double> u = uniform_grid(0.0, 1.0, 0.3);
  CHECK(u.size() == 5);
  CHECK(u.back() == 1.0);
}
