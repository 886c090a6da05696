#include "sblq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "sblq/errors.hpp"
#include "sblq/io.hpp"
#include "sblq/random.hpp"

namespace sblq {

using io::json;

namespace {

constexpr int kFormatVersion = 1;

void validate_trajectory(const DatasetHeader& h, const Trajectory& traj, long line) {
  const auto T = static_cast<std::size_t>(h.horizon);
  if (traj.states.size() != T) {
    throw ValidationError("field 'states' has length " + std::to_string(traj.states.size()) +
                              ", expected horizon " + std::to_string(T),
                          line);
  }
  if (traj.actions.size() != T) {
    throw ValidationError("field 'actions' has length " + std::to_string(traj.actions.size()) +
                              ", expected horizon " + std::to_string(T),
                          line);
  }
  if (traj.rewards.size() != T) {
    throw ValidationError("field 'rewards' has length " + std::to_string(traj.rewards.size()) +
                              ", expected horizon " + std::to_string(T),
                          line);
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (traj.states[t].size() != h.state_dim) {
      throw ValidationError("field 'states' entry " + std::to_string(t) + " has dimension " +
                                std::to_string(traj.states[t].size()) + ", expected " +
                                std::to_string(h.state_dim),
                            line);
    }
    if (!traj.states[t].allFinite()) {
      throw ValidationError("field 'states' entry " + std::to_string(t) + " is not finite", line);
    }
    const int a = traj.actions[t];
    if (a < 0 || a >= h.action_table.rows()) {
      throw ValidationError("field 'actions' entry " + std::to_string(t) + " = " +
                                std::to_string(a) + " is not a valid action id",
                            line);
    }
    const double r = traj.rewards[t];
    if (!std::isfinite(r) || std::abs(r) > h.reward_bound) {
      throw ValidationError("field 'rewards' entry " + std::to_string(t) +
                                " exceeds reward_bound or is not finite",
                            line);
    }
  }
}

void validate_header(const DatasetHeader& h) {
  if (h.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (h.state_dim < 0 || h.action_dim < 0 || h.state_dim + h.action_dim < 1) {
    throw ValidationError("feature dimension must be >= 1");
  }
  if (!(h.reward_bound >= 0.0) || !std::isfinite(h.reward_bound)) {
    throw ValidationError("reward_bound must be a nonnegative real");
  }
  if (h.action_table.rows() < 1) throw ValidationError("action_table must be nonempty");
  if (h.action_table.cols() != h.action_dim) {
    throw ValidationError("action_table rows must have action_dim entries");
  }
  if (!h.action_table.allFinite()) throw ValidationError("action_table is not finite");
}

template <typename T>
T require_field(const json& obj, const char* field, long line) {
  if (!obj.contains(field)) throw ParseError(std::string("missing field '") + field + "'", line);
  try {
    return obj.at(field).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + field + "' has the wrong type", line);
  }
}

}  // namespace

BatchDataset::BatchDataset(DatasetHeader header, std::vector<Trajectory> trajectories)
    : header_(std::move(header)), trajectories_(std::move(trajectories)) {
  validate_header(header_);
  if (trajectories_.empty()) throw ValidationError("dataset must contain at least one trajectory");
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    validate_trajectory(header_, trajectories_[i], 0);
  }
}

const Vector& BatchDataset::context_state(std::size_t i, int t) const {
  if (t < 1 || t > horizon()) throw IndexError("stage " + std::to_string(t) + " out of range");
  const auto& states = trajectories_.at(i).states;
  return t < horizon() ? states[static_cast<std::size_t>(t)] : states[static_cast<std::size_t>(t - 1)];
}

Vector BatchDataset::features(const Vector& state, int id) const {
  return feature_vector(state, action(id), header_.normalize);
}

BatchDataset BatchDataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Trajectory> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(trajectories_.at(i));
  return BatchDataset(header_, std::move(picked));
}

bool BatchDataset::operator==(const BatchDataset& other) const {
  const auto& a = header_;
  const auto& b = other.header_;
  return a.horizon == b.horizon && a.state_dim == b.state_dim && a.action_dim == b.action_dim &&
         a.reward_bound == b.reward_bound && a.normalize == b.normalize &&
         a.action_table.rows() == b.action_table.rows() && a.action_table == b.action_table &&
         trajectories_ == other.trajectories_;
}

Vector feature_vector(const Vector& state, const Vector& action, bool normalize) {
  Vector x(state.size() + action.size());
  x << state, action;
  if (normalize) {
    const double norm = x.norm();
    if (norm == 0.0) throw DegenerateError("cannot normalize an all-zero feature vector");
    x /= norm;
  }
  return x;
}

StageDesign stage_design(const BatchDataset& dataset, int t) {
  if (t < 1 || t > dataset.horizon()) {
    throw IndexError("stage " + std::to_string(t) + " out of range [1, " +
                     std::to_string(dataset.horizon()) + "]");
  }
  const auto n = static_cast<Eigen::Index>(dataset.size());
  StageDesign design{t, Matrix(n, dataset.feature_dim()), Vector(n)};
  const auto s = static_cast<std::size_t>(t - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trajectory& traj = dataset.trajectory(static_cast<std::size_t>(i));
    design.rows.row(i) = dataset.features(traj.states[s], traj.actions[s]).transpose();
    design.rewards[i] = traj.rewards[s];
  }
  return design;
}

StageDesign mask_design(StageDesign design, const std::vector<bool>& keep) {
  if (static_cast<Eigen::Index>(keep.size()) != design.dim()) {
    throw ShapeError("feature mask length does not match design dimension");
  }
  for (Eigen::Index j = 0; j < design.dim(); ++j) {
    if (!keep[static_cast<std::size_t>(j)]) design.rows.col(j).setZero();
  }
  return design;
}

Matrix empirical_covariance(const StageDesign& design) {
  if (design.size() < 1) throw EmptyInputError("empirical covariance of an empty design");
  const Eigen::Index d = design.dim();
  Matrix cov = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < design.size(); ++i) {
    const auto x = design.rows.row(i);
    cov.noalias() += x.transpose() * x;
  }
  cov /= static_cast<double>(design.size());
  // Exact symmetry regardless of accumulation order.
  return 0.5 * (cov + cov.transpose());
}

Vector empirical_cross_moment(const StageDesign& design, const Vector& targets) {
  if (design.size() < 1) throw EmptyInputError("cross moment of an empty design");
  if (targets.size() != design.size()) throw ShapeError("targets length does not match design rows");
  return design.rows.transpose() * targets / static_cast<double>(design.size());
}

DatasetPaths DatasetPaths::from_prefix(const std::filesystem::path& prefix) {
  std::filesystem::path header = prefix;
  header += ".header.json";
  std::filesystem::path traj = prefix;
  traj += ".jsonl";
  return {header, traj};
}

BatchDataset load_dataset(const std::filesystem::path& header_path,
                          const std::filesystem::path& trajectories_path) {
  json h;
  try {
    h = json::parse(io::read_text(header_path));
  } catch (const json::parse_error& e) {
    throw ParseError(header_path.string() + ": " + e.what(), 1);
  }
  if (!h.is_object()) throw ParseError("dataset header must be a JSON object", 1);
  if (require_field<int>(h, "version", 1) != kFormatVersion) {
    throw ParseError("unsupported dataset version", 1);
  }
  DatasetHeader header;
  header.horizon = require_field<int>(h, "horizon", 1);
  header.state_dim = require_field<int>(h, "state_dim", 1);
  header.action_dim = require_field<int>(h, "action_dim", 1);
  header.reward_bound = require_field<double>(h, "reward_bound", 1);
  header.normalize = require_field<bool>(h, "normalize", 1);
  if (!h.contains("action_table")) throw ParseError("missing field 'action_table'", 1);
  header.action_table = io::matrix_from_json(h["action_table"], "action_table");
  if (header.action_table.rows() > 0 && header.action_table.cols() != header.action_dim) {
    throw ValidationError("action_table rows must have action_dim entries", 1);
  }
  validate_header(header);

  std::istringstream lines(io::read_text(trajectories_path));
  std::vector<Trajectory> trajectories;
  std::string line;
  long number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      throw ParseError("invalid JSON", number);
    }
    if (!obj.is_object()) throw ParseError("trajectory must be a JSON object", number);
    Trajectory traj;
    if (!obj.contains("states") || !obj["states"].is_array()) {
      throw ParseError("missing or malformed field 'states'", number);
    }
    for (const auto& s : obj["states"]) {
      try {
        traj.states.push_back(io::vector_from_json(s, "states"));
      } catch (const ParseError& e) {
        throw ParseError(e.what(), number);
      }
    }
    traj.actions = require_field<std::vector<int>>(obj, "actions", number);
    traj.rewards = require_field<std::vector<double>>(obj, "rewards", number);
    validate_trajectory(header, traj, number);
    trajectories.push_back(std::move(traj));
  }
  return BatchDataset(std::move(header), std::move(trajectories));
}

void save_dataset(const BatchDataset& dataset, const std::filesystem::path& header_path,
                  const std::filesystem::path& trajectories_path) {
  const DatasetHeader& h = dataset.header();
  json header = {{"version", kFormatVersion},
                 {"horizon", h.horizon},
                 {"state_dim", h.state_dim},
                 {"action_dim", h.action_dim},
                 {"reward_bound", h.reward_bound},
                 {"normalize", h.normalize},
                 {"action_table", io::to_json(h.action_table)}};
  io::write_text_atomic(header_path, header.dump() + "\n");

  std::string body;
  for (const Trajectory& traj : dataset.trajectories()) {
    json states = json::array();
    for (const Vector& s : traj.states) states.push_back(io::to_json(s));
    json obj = {{"states", std::move(states)}, {"actions", traj.actions}, {"rewards", traj.rewards}};
    body += obj.dump();
    body += '\n';
  }
  io::write_text_atomic(trajectories_path, body);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train_fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  if (n_train < 1 || n_train >= n) {
    throw DomainError("split leaves an empty side (n = " + std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.index(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<BatchDataset, BatchDataset> split(const BatchDataset& dataset, double train_fraction,
                                            std::uint64_t seed) {
  auto [train, test] = split_indices(dataset.size(), train_fraction, seed);
  return {dataset.subset(train), dataset.subset(test)};
}

}  // namespace sblq
