#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "troop/baselines.hpp"
#include "troop/io.hpp"

using namespace troop;
namespace fs = std::filesystem;
using nlohmann::json;
using manifold::RepresentativePair;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    const char* env = std::getenv("TROOP_TEST_TMP");
    fs::path d = env ? fs::path(env) : fs::temp_directory_path() / "troop_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

int troop_run(std::vector<std::string> args) {
  args.insert(args.begin(), "troop");
  return cli::run(args);
}

std::vector<std::vector<std::string>> read_csv(const std::string& file) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(io::read_text(file));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  FAIL("missing column " << name);
  return 0;
}

const std::string& training_data() {
  static const std::string file = [] {
    const std::string f = path("train.json");
    REQUIRE(troop_run({"generate", "--model", "toy", "--amplitudes", "0.5,1.0", "--samples", "11", "--horizon", "10",
                       "--out", f}) == 0);
    return f;
  }();
  return file;
}

}  // namespace

TEST_CASE("generate the training set") {
  const objective::TrajectoryDataset data = io::load_dataset(training_data());
  REQUIRE(data.size() == 2);
  CHECK(data[0].samples() == 11);
  CHECK(data[1].times.back() == 10.0);
  CHECK(data[0].observations(0, 0) == doctest::Approx(1.5));
  const json manifest = json::parse(io::read_text(training_data() + ".manifest.json"));
  CHECK(manifest.at("command") == "generate");
  CHECK(manifest.at("seed") == 0);
  CHECK(manifest.at("outputs").size() == 1);
  CHECK(manifest.contains("wall_clock_seconds"));
}

TEST_CASE("generate random amplitudes") {
  const std::string f = path("test.json");
  REQUIRE(troop_run({"generate", "--amplitudes", "random:100:0,1", "--seed", "7", "--out", f}) == 0);
  const objective::TrajectoryDataset data = io::load_dataset(f);
  REQUIRE(data.size() == 100);
  for (const objective::Trajectory& t : data.trajectories()) {
    CHECK(t.x0(0) >= 0.0);
    CHECK(t.x0(0) <= 1.0);
  }
  const std::string again = path("test_again.json");
  REQUIRE(troop_run({"generate", "--amplitudes", "random:100:0,1", "--seed", "7", "--out", again}) == 0);
  CHECK(io::read_text(f) == io::read_text(again));
}

TEST_CASE("generate at zero amplitude") {
  const std::string f = path("zero.json");
  REQUIRE(troop_run({"generate", "--amplitudes", "0", "--out", f}) == 0);
  const objective::TrajectoryDataset data = io::load_dataset(f);
  CHECK(data[0].observations.norm() == 0.0);
}

TEST_CASE("train with no iterations returns the initial pair") {
  const std::string out = path("noop.json");
  REQUIRE(troop_run({"train", "--data", training_data(), "--rank", "2", "--max-iters", "0", "--out", out}) == 0);
  const io::Checkpoint c = io::load_checkpoint(out);
  const RepresentativePair bt = baselines::bt_init_for(*system::toy_model(), 2);
  CHECK((c.pair.phi().cols() - bt.phi().cols()).norm() <= 1e-15);
  CHECK((c.pair.psi().cols() - bt.psi().cols()).norm() <= 1e-15);
  CHECK(c.meta.iterations == 0);
  CHECK(io::parse_trace(io::read_text(out + ".trace.jsonl")).size() == 1);
  CHECK(fs::exists(out + ".manifest.json"));
}

TEST_CASE("train from POD starts at zero penalty") {
  const std::string out = path("pod_noop.json");
  REQUIRE(troop_run({"train", "--data", training_data(), "--init", "pod", "--max-iters", "0", "--out", out}) == 0);
  const io::Checkpoint c = io::load_checkpoint(out);
  CHECK(objective::regularization(c.pair) <= 1e-12);
  // POD of the eleven samples alone keeps too much of x3; its model diverges at u0 = 1.
  CHECK(troop_run({"train", "--data", training_data(), "--init", "pod", "--snapshots", "samples", "--max-iters", "0",
                   "--out", path("x.json")}) == cli::kNumerical);
}

TEST_CASE("baselines") {
  const std::string pod = path("pod.json");
  REQUIRE(troop_run({"baseline", "--method", "pod", "--data", training_data(), "--rank", "2", "--out", pod}) == 0);
  const io::Checkpoint p = io::load_checkpoint(pod);
  CHECK((p.pair.phi().cols() - p.pair.psi().cols()).norm() == 0.0);
  CHECK(p.meta.method == "pod");
  const RepresentativePair pod_ref = baselines::pod(
      baselines::collect_snapshots(*system::toy_model(), io::load_dataset(training_data()), 200,
                                   baselines::SnapshotSampling::trajectory),
      2);
  CHECK(manifold::subspace_distance(p.pair.phi().cols(), pod_ref.phi().cols()) <= 1e-12);

  const std::string bt = path("bt.json");
  REQUIRE(troop_run({"baseline", "--method", "bt", "--model", "toy", "--rank", "2", "--out", bt}) == 0);
  const io::Checkpoint b = io::load_checkpoint(bt);
  const RepresentativePair ref = baselines::bt_init_for(*system::toy_model(), 2);
  CHECK((b.pair.phi().cols() - ref.phi().cols()).norm() <= 1e-15);
}

TEST_CASE("rank above the data rank fails") {
  const std::string zero = path("zero_data.json");
  REQUIRE(troop_run({"generate", "--amplitudes", "0", "--out", zero}) == 0);
  CHECK(troop_run({"baseline", "--method", "pod", "--data", zero, "--rank", "1", "--out", path("bad.json")}) != 0);
  CHECK_FALSE(fs::exists(path("bad.json")));
}

TEST_CASE("evaluate a full-rank pair against the full model") {
  const std::string full = path("full.json");
  io::Checkpoint c;
  const manifold::OrthoRep eye = manifold::OrthoRep::adopt(Matrix::Identity(3, 3));
  c.pair = manifold::fix_sign(eye, eye);
  c.meta.method = "identity";
  io::save_checkpoint(full, c);
  const std::string out = path("full_eval.csv");
  REQUIRE(troop_run({"evaluate", "--checkpoint", "fom=" + full, "--data", training_data(), "--out", out}) == 0);
  const auto rows = read_csv(out);
  REQUIRE(rows.size() == 1 + 22);
  const std::size_t nse = column(rows[0], "nse");
  CHECK(rows[1][column(rows[0], "model")] == "fom");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][nse]) <= 1e-10);
  CHECK(fs::exists(path("full_eval.summary.csv")));
}

TEST_CASE("train, evaluate and reproduce bit for bit") {
  auto pipeline = [&](const std::string& tag) {
    const std::string ckpt = path("trained_" + tag + ".json");
    REQUIRE(troop_run({"train", "--data", training_data(), "--max-iters", "5", "--out", ckpt}) == 0);
    const std::string csv = path("eval_" + tag + ".csv");
    REQUIRE(troop_run({"evaluate", "--checkpoint", "troop=" + ckpt, "--checkpoint", path("bt.json"), "--data",
                       training_data(), "--out", csv}) == 0);
    return std::make_pair(io::read_text(ckpt), io::read_text(csv));
  };
  const auto first = pipeline("a");
  const auto second = pipeline("b");
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
  const auto rows = read_csv(path("eval_a.csv"));
  CHECK(rows.size() == 1 + 2 * 22);
}

TEST_CASE("threads do not change the result") {
  const std::string a = path("serial.json");
  const std::string b = path("threaded.json");
  REQUIRE(troop_run({"train", "--data", training_data(), "--max-iters", "3", "--out", a}) == 0);
  REQUIRE(troop_run({"train", "--data", training_data(), "--max-iters", "3", "--threads", "2", "--out", b}) == 0);
  CHECK(io::read_text(a) == io::read_text(b));
}

TEST_CASE("sinusoidal evaluation") {
  const std::string out = path("sine.csv");
  REQUIRE(troop_run({"evaluate", "--checkpoint", path("pod.json"), "--checkpoint", path("bt.json"), "--input",
                     "sin:1.0:1.0", "--samples", "51", "--out", out}) == 0);
  const auto rows = read_csv(out);
  CHECK(rows.size() == 1 + 2 * 51);
}

TEST_CASE("exit codes") {
  CHECK(troop_run({"generate"}) == cli::kValidation);
  CHECK(troop_run({"train", "--data", path("missing.json"), "--out", path("x.json")}) == cli::kValidation);
  CHECK(troop_run({"train", "--data", training_data(), "--rank", "3", "--out", path("x.json")}) == cli::kValidation);
  CHECK(troop_run({"baseline", "--method", "svd", "--rank", "2", "--out", path("x.json")}) == cli::kValidation);
  CHECK(troop_run({"nonsense"}) == cli::kValidation);
  CHECK(troop_run({"--help"}) == cli::kOk);
}
