#include "troop/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace troop::io {

using nlohmann::json;

namespace {

Error invalid(const std::string& what) { return Error(ErrorKind::InvalidArgument, what); }

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw invalid(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw invalid(std::string("field '") + key + "' has the wrong type");
  }
}

Matrix flat_matrix(const json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  const auto values = field<std::vector<double>>(j, key);
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw Error(ErrorKind::DimensionMismatch, std::string("field '") + key + "' must hold " +
                                                  std::to_string(rows * cols) + " values");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = values[static_cast<std::size_t>(i * cols + k)];
  }
  return m;
}

json flat(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(m(i, k));
  }
  return out;
}

json vec(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw invalid(std::string("malformed JSON: ") + e.what());
  }
}

manifold::OrthoRep adopt_or_orthonormalize(Matrix m) {
  const Eigen::Index r = m.cols();
  if ((m.transpose() * m - Matrix::Identity(r, r)).norm() <= 1e-10) return manifold::OrthoRep::adopt(std::move(m));
  return manifold::orthonormalize(m);
}

// Non-finite doubles have no JSON literal; they are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return field<double>(j, key);
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::shared_ptr<const system::QuadraticBilinearModel> parse_model(const std::string& text) {
  const json j = parse_json(text);
  const auto type = field<std::string>(j, "type");
  if (type != "qb" && type != "lti") throw invalid("model type must be 'qb' or 'lti'");
  const auto n = field<Eigen::Index>(j, "n");
  const auto m = field<Eigen::Index>(j, "m");
  const auto d = field<Eigen::Index>(j, "d");
  if (n < 1 || m < 1 || d < 0) throw invalid("model dimensions must be positive");
  Matrix a = flat_matrix(j, "a", n, n);
  Matrix b = d > 0 ? flat_matrix(j, "b", n, d) : Matrix(n, 0);
  Matrix c = flat_matrix(j, "c", m, n);
  std::vector<system::QuadraticTerm> h;
  if (type == "qb" && j.contains("h")) {
    for (const json& t : j.at("h")) {
      if (!t.is_array() || t.size() != 4) throw invalid("quadratic terms must be [i, j, k, value]");
      h.push_back({t[0].get<Eigen::Index>(), t[1].get<Eigen::Index>(), t[2].get<Eigen::Index>(), t[3].get<double>()});
    }
  }
  return std::make_shared<const system::QuadraticBilinearModel>(std::move(a), std::move(h), std::move(b),
                                                                std::move(c));
}

std::string model_to_json(const system::QuadraticBilinearModel& model) {
  json j;
  j["type"] = model.is_linear() ? "lti" : "qb";
  j["n"] = model.state_dim();
  j["m"] = model.output_dim();
  j["d"] = model.input_dim();
  j["a"] = flat(model.a());
  if (!model.is_linear()) {
    json h = json::array();
    for (const system::QuadraticTerm& t : model.quadratic_terms()) h.push_back({t.i, t.j, t.k, t.value});
    j["h"] = h;
  }
  j["b"] = flat(model.b());
  j["c"] = flat(model.c());
  return j.dump(2);
}

std::shared_ptr<const system::QuadraticBilinearModel> load_model(const fs::path& path) {
  return parse_model(read_text(path));
}

void save_model(const fs::path& path, const system::QuadraticBilinearModel& model) {
  write_text(path, model_to_json(model));
}

objective::TrajectoryDataset parse_dataset(const std::string& text) {
  const json j = parse_json(text);
  const auto n = field<Eigen::Index>(j, "n");
  const auto m = field<Eigen::Index>(j, "m");
  if (!j.contains("trajectories") || !j.at("trajectories").is_array()) throw invalid("missing trajectories array");
  std::vector<objective::Trajectory> trajectories;
  for (const json& t : j.at("trajectories")) {
    objective::Trajectory traj;
    traj.label = t.value("label", std::string("trajectory-") + std::to_string(trajectories.size()));
    traj.x0 = to_vector(field<std::vector<double>>(t, "x0"));
    traj.times = field<std::vector<double>>(t, "times");
    const auto rows = field<std::vector<std::vector<double>>>(t, "observations");
    traj.observations.resize(static_cast<Eigen::Index>(rows.size()), m);
    for (std::size_t l = 0; l < rows.size(); ++l) {
      if (static_cast<Eigen::Index>(rows[l].size()) != m) {
        throw Error(ErrorKind::DimensionMismatch, "observation rows must have m entries");
      }
      traj.observations.row(static_cast<Eigen::Index>(l)) = to_vector(rows[l]).transpose();
    }
    if (t.contains("input")) traj.input = system::InputSignal::parse(t.at("input").get<std::string>());
    trajectories.push_back(std::move(traj));
  }
  return objective::TrajectoryDataset(n, m, std::move(trajectories));
}

std::string dataset_to_json(const objective::TrajectoryDataset& data) {
  json j;
  j["n"] = data.state_dim();
  j["m"] = data.output_dim();
  json list = json::array();
  for (const objective::Trajectory& t : data.trajectories()) {
    json rows = json::array();
    for (Eigen::Index l = 0; l < t.observations.rows(); ++l) rows.push_back(vec(t.observations.row(l).transpose()));
    json entry{{"label", t.label}, {"x0", vec(t.x0)}, {"times", t.times}, {"observations", rows}};
    if (!t.input.is_zero()) entry["input"] = t.input.to_string();
    list.push_back(std::move(entry));
  }
  j["trajectories"] = std::move(list);
  return j.dump(2);
}

objective::TrajectoryDataset load_dataset(const fs::path& path) { return parse_dataset(read_text(path)); }

void save_dataset(const fs::path& path, const objective::TrajectoryDataset& data) {
  write_text(path, dataset_to_json(data));
}

Checkpoint parse_checkpoint(const std::string& text) {
  const json j = parse_json(text);
  const auto n = field<Eigen::Index>(j, "n");
  const auto r = field<Eigen::Index>(j, "r");
  if (n < 1 || r < 1 || r > n) throw invalid("checkpoint needs 1 <= r <= n");
  const manifold::OrthoRep phi = adopt_or_orthonormalize(flat_matrix(j, "phi", n, r));
  const manifold::OrthoRep psi = adopt_or_orthonormalize(flat_matrix(j, "psi", n, r));
  Checkpoint ckpt{manifold::fix_sign(phi, psi), {}};
  if (j.contains("meta")) {
    const json& meta = j.at("meta");
    ckpt.meta.gamma = number_or_nan(meta, "gamma");
    ckpt.meta.iterations = meta.value("iterations", 0);
    ckpt.meta.final_cost = number_or_nan(meta, "final_cost");
    ckpt.meta.final_grad_norm = number_or_nan(meta, "final_grad_norm");
    ckpt.meta.method = meta.value("method", std::string());
  }
  return ckpt;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["n"] = ckpt.pair.n();
  j["r"] = ckpt.pair.r();
  j["phi"] = flat(ckpt.pair.phi().cols());
  j["psi"] = flat(ckpt.pair.psi().cols());
  j["meta"] = {{"gamma", number(ckpt.meta.gamma)},
               {"iterations", ckpt.meta.iterations},
               {"final_cost", number(ckpt.meta.final_cost)},
               {"final_grad_norm", number(ckpt.meta.final_grad_norm)},
               {"method", ckpt.meta.method}};
  return j.dump(2);
}

Checkpoint load_checkpoint(const fs::path& path) { return parse_checkpoint(read_text(path)); }

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) { write_text(path, checkpoint_to_json(ckpt)); }

std::string trace_to_jsonl(const optimizer::CgTrace& trace) {
  std::string out;
  for (const optimizer::CgRecord& rec : trace) {
    const json j{{"objective", number(rec.objective)},
                 {"grad_norm_sq", number(rec.grad_norm_sq)},
                 {"step_alpha", rec.step_alpha},
                 {"beta", rec.beta},
                 {"line_search_evals", rec.line_search_evals}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

optimizer::CgTrace parse_trace(const std::string& text) {
  optimizer::CgTrace trace;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = parse_json(line);
    optimizer::CgRecord rec;
    rec.objective = number_or_nan(j, "objective");
    rec.grad_norm_sq = number_or_nan(j, "grad_norm_sq");
    rec.step_alpha = field<double>(j, "step_alpha");
    rec.beta = field<double>(j, "beta");
    rec.line_search_evals = field<int>(j, "line_search_evals");
    trace.push_back(rec);
  }
  return trace;
}

void save_trace(const fs::path& path, const optimizer::CgTrace& trace) { write_text(path, trace_to_jsonl(trace)); }

}  // namespace troop::io
