#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sblq/spectral.hpp"

namespace sblq {

// One logged episode. Stage t (1-based) lives at index t - 1.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<int> actions;
  std::vector<double> rewards;

  int horizon() const { return static_cast<int>(rewards.size()); }
  bool operator==(const Trajectory&) const = default;
};

struct DatasetHeader {
  int horizon = 1;
  int state_dim = 1;
  int action_dim = 1;
  double reward_bound = 1.0;
  bool normalize = true;
  Matrix action_table;  // one candidate action per row
};

// Immutable batch of trajectories sharing one candidate-action table.
// The constructor validates every invariant and throws ValidationError.
class BatchDataset {
 public:
  BatchDataset(DatasetHeader header, std::vector<Trajectory> trajectories);

  const DatasetHeader& header() const { return header_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const Trajectory& trajectory(std::size_t i) const { return trajectories_.at(i); }

  std::size_t size() const { return trajectories_.size(); }
  int horizon() const { return header_.horizon; }
  int state_dim() const { return header_.state_dim; }
  int action_dim() const { return header_.action_dim; }
  int feature_dim() const { return header_.state_dim + header_.action_dim; }
  int action_count() const { return static_cast<int>(header_.action_table.rows()); }
  double reward_bound() const { return header_.reward_bound; }
  bool normalize() const { return header_.normalize; }
  Vector action(int id) const { return header_.action_table.row(id).transpose(); }

  // State used as post-transition context when building stage-t targets:
  // the logged stage t+1 state, or the stage-t state at the final stage.
  const Vector& context_state(std::size_t i, int t) const;

  // Feature vector for a state paired with candidate action `id`.
  Vector features(const Vector& state, int id) const;

  BatchDataset subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const BatchDataset& other) const;

 private:
  DatasetHeader header_;
  std::vector<Trajectory> trajectories_;
};

// Design matrix of stage t: row i is x_{i,t}, rewards[i] is r_{i,t}.
struct StageDesign {
  int stage = 1;
  Matrix rows;
  Vector rewards;

  Eigen::Index size() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

// concat(state, action), divided by its norm when `normalize` is set.
// Throws DegenerateError when normalizing an all-zero concatenation.
Vector feature_vector(const Vector& state, const Vector& action, bool normalize);

StageDesign stage_design(const BatchDataset& dataset, int t);

// Zeroes the columns whose mask entry is false.
StageDesign mask_design(StageDesign design, const std::vector<bool>& keep);

// (1/n) sum_i x_i x_i^T, accumulated in row order.
Matrix empirical_covariance(const StageDesign& design);

// (1/n) sum_i x_i y_i.
Vector empirical_cross_moment(const StageDesign& design, const Vector& targets);

struct DatasetPaths {
  std::filesystem::path header;
  std::filesystem::path trajectories;

  // "<prefix>.header.json" and "<prefix>.jsonl".
  static DatasetPaths from_prefix(const std::filesystem::path& prefix);
};

BatchDataset load_dataset(const std::filesystem::path& header_path,
                          const std::filesystem::path& trajectories_path);
void save_dataset(const BatchDataset& dataset, const std::filesystem::path& header_path,
                  const std::filesystem::path& trajectories_path);

// Deterministic shuffled partition. Returns (train, test) index lists, each
// sorted ascending; train receives round(n * train_fraction) trajectories.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

std::pair<BatchDataset, BatchDataset> split(const BatchDataset& dataset, double train_fraction,
                                            std::uint64_t seed);

}  // namespace sblq
