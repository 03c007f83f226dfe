#include "troop/system.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace troop::system {

namespace {

void check_dims(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "A must be square and non-empty");
  }
  if (b.rows() != a.rows()) throw Error(ErrorKind::DimensionMismatch, "B must have n rows");
  if (c.cols() != a.rows()) throw Error(ErrorKind::DimensionMismatch, "C must have n columns");
}

}  // namespace

QuadraticBilinearModel::QuadraticBilinearModel(Matrix a, std::vector<QuadraticTerm> h, Matrix b, Matrix c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  check_dims(a_, b_, c_);
  const Eigen::Index n = a_.rows();
  std::map<std::tuple<Eigen::Index, Eigen::Index, Eigen::Index>, double> merged;
  for (const QuadraticTerm& t : h) {
    if (t.i < 0 || t.i >= n || t.j < 0 || t.j >= n || t.k < 0 || t.k >= n) {
      throw Error(ErrorKind::DimensionMismatch, "quadratic term index out of range");
    }
    if (t.j == t.k) {
      merged[{t.i, t.j, t.k}] += t.value;
    } else {
      merged[{t.i, t.j, t.k}] += 0.5 * t.value;
      merged[{t.i, t.k, t.j}] += 0.5 * t.value;
    }
  }
  h_.reserve(merged.size());
  for (const auto& [key, value] : merged) {
    if (value != 0.0) h_.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value});
  }
}

Vector QuadraticBilinearModel::quadratic(const Vector& x, const Vector& y) const {
  Vector out = Vector::Zero(a_.rows());
  for (const QuadraticTerm& t : h_) out(t.i) += t.value * x(t.j) * y(t.k);
  return out;
}

Vector QuadraticBilinearModel::rhs(const Vector& x, const Vector& u, double) const {
  Vector out = a_ * x + quadratic(x, x);
  if (b_.cols() > 0 && u.size() > 0) out.noalias() += b_ * u;
  return out;
}

Vector QuadraticBilinearModel::jvp(const Vector& x, const Vector&, double, const Vector& v) const {
  return a_ * v + 2.0 * quadratic(x, v);
}

Vector QuadraticBilinearModel::jtvp(const Vector& x, const Vector&, double, const Vector& w) const {
  Vector out = a_.transpose() * w;
  for (const QuadraticTerm& t : h_) {
    const double s = t.value * w(t.i);
    out(t.j) += s * x(t.k);
    out(t.k) += s * x(t.j);
  }
  return out;
}

std::shared_ptr<const QuadraticBilinearModel> toy_model() {
  Matrix a = Vector(Eigen::Vector3d(-1.0, -2.0, -5.0)).asDiagonal();
  std::vector<QuadraticTerm> h = {{0, 0, 2, 20.0}, {1, 1, 2, 20.0}};
  Matrix b = Matrix::Ones(3, 1);
  Matrix c = Matrix::Ones(1, 3);
  return std::make_shared<const QuadraticBilinearModel>(std::move(a), std::move(h), std::move(b),
                                                        std::move(c));
}

Vector toy_impulse_state(double u0) { return Vector::Constant(3, u0); }

std::shared_ptr<const QuadraticBilinearModel> make_lti(const LtiSystem& sys) {
  return std::make_shared<const QuadraticBilinearModel>(sys.a, std::vector<QuadraticTerm>{}, sys.b,
                                                        sys.c);
}

LtiSystem linearize(const DynamicalSystem& sys, const Vector& x0) {
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index d = sys.input_dim();
  const Eigen::Index m = sys.output_dim();
  if (x0.size() != n) throw Error(ErrorKind::DimensionMismatch, "linearization point has wrong size");
  LtiSystem lin{Matrix(n, n), Matrix(n, d), Matrix(m, n)};
  const Vector u0 = Vector::Zero(d);
  const Vector f0 = sys.rhs(x0, u0, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector e = Vector::Unit(n, j);
    lin.a.col(j) = sys.jvp(x0, u0, 0.0, e);
    lin.c.col(j) = sys.obs_jvp(x0, e);
  }
  for (Eigen::Index j = 0; j < d; ++j) lin.b.col(j) = sys.rhs(x0, Vector::Unit(d, j), 0.0) - f0;
  return lin;
}

InputSignal InputSignal::parse(const std::string& text) {
  if (text.empty() || text == "none" || text == "zero") return none();
  std::istringstream in(text);
  std::string kind, amp, freq;
  std::getline(in, kind, ':');
  std::getline(in, amp, ':');
  std::getline(in, freq, ':');
  if (kind != "sin" || amp.empty() || freq.empty()) {
    throw Error(ErrorKind::InvalidArgument, "input signal must be 'none' or 'sin:<amplitude>:<frequency>'");
  }
  try {
    return sine(std::stod(amp), std::stod(freq));
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "malformed input signal '" + text + "'");
  }
}

std::string InputSignal::to_string() const {
  if (kind == Kind::zero) return "none";
  std::ostringstream os;
  os.precision(17);
  os << "sin:" << amplitude << ":" << frequency;
  return os.str();
}

Vector InputSignal::operator()(double t, Eigen::Index channels) const {
  if (kind == Kind::zero) return Vector::Zero(channels);
  return Vector::Constant(channels, amplitude * std::sin(frequency * t));
}

}  // namespace troop::system
