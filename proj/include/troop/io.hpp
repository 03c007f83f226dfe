#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "troop/manifold.hpp"
#include "troop/objective.hpp"
#include "troop/optimizer.hpp"
#include "troop/system.hpp"

namespace troop::io {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// {"type": "qb"|"lti", "n", "m", "d", "a", "h": [[i,j,k,value],...], "b", "c"}
/// with row-major flat matrices. LTI files carry no "h".
std::shared_ptr<const system::QuadraticBilinearModel> parse_model(const std::string& text);
std::string model_to_json(const system::QuadraticBilinearModel& model);
std::shared_ptr<const system::QuadraticBilinearModel> load_model(const fs::path& path);
void save_model(const fs::path& path, const system::QuadraticBilinearModel& model);

/// {"n", "m", "trajectories": [{"label", "x0", "times", "observations", "input"?}]}
objective::TrajectoryDataset parse_dataset(const std::string& text);
std::string dataset_to_json(const objective::TrajectoryDataset& data);
objective::TrajectoryDataset load_dataset(const fs::path& path);
void save_dataset(const fs::path& path, const objective::TrajectoryDataset& data);

struct CheckpointMeta {
  double gamma = 0.0;
  int iterations = 0;
  double final_cost = 0.0;
  double final_grad_norm = 0.0;
  /// Free-form origin tag ("troop", "pod", "bt").
  std::string method;
};

struct Checkpoint {
  manifold::RepresentativePair pair;
  CheckpointMeta meta;
};

/// {"n", "r", "phi", "psi", "meta": {...}} with row-major n x r matrices.
/// Representatives that are not orthonormal are orthonormalized on load.
Checkpoint parse_checkpoint(const std::string& text);
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& path);
void save_checkpoint(const fs::path& path, const Checkpoint& ckpt);

/// One JSON object per line with the fields objective, grad_norm_sq,
/// step_alpha, beta, line_search_evals.
std::string trace_to_jsonl(const optimizer::CgTrace& trace);
optimizer::CgTrace parse_trace(const std::string& text);
void save_trace(const fs::path& path, const optimizer::CgTrace& trace);

}  // namespace troop::io
