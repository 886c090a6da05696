#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sblq/learner.hpp"

namespace sblq {

// Optional aggregation of feature columns into named groups.
struct FeatureGroups {
  std::vector<int> group_of;  // feature index -> group index
  std::vector<std::string> names;

  int count() const { return static_cast<int>(names.size()); }
  void validate(int feature_dim) const;
};

struct ContributionReport {
  Vector proportions;               // per feature, or per group when grouped
  Matrix per_stage_weights;         // T x d
  std::vector<int> ranking;         // descending proportion, ties by index
  std::vector<std::string> labels;  // group names, or "x<j>" per feature
};

// importance_j = (1/T) sum_t |theta_{t,j}|, normalized to sum to one.
// Throws DegenerateError for an all-zero model.
ContributionReport contribution_proportions(const ModelBundle& model,
                                            const FeatureGroups* groups = nullptr);

struct WeightEntry {
  std::string method;
  int feature = 0;
  int stage = 0;
  double value = 0.0;
};

// Linear-interpolation quantile of an ascending sample.
double interpolated_quantile(const std::vector<double>& sorted, double p);

// Flags entries strictly above the (1 - pct) or strictly below the pct
// quantile of the pooled values.
std::vector<bool> clipped_weights(const std::vector<WeightEntry>& weights, double pct = 0.05);

// All stage weights of a model, labelled with `method`.
std::vector<WeightEntry> weight_entries(const ModelBundle& model, const std::string& method);

struct TopKPoint {
  int k = 0;
  double reward = 0.0;
};

// Retrains with only the top-k ranked features (or groups) kept and scores
// each retrained model. An empty mask is passed when every feature is kept.
using MaskedTrainer = std::function<ModelBundle(const std::vector<bool>& keep)>;
using ModelScorer = std::function<double(const ModelBundle&)>;

std::vector<TopKPoint> topk_feature_rewards(const ContributionReport& full, int feature_dim,
                                            const FeatureGroups* groups, const std::vector<int>& ks,
                                            const MaskedTrainer& trainer, const ModelScorer& scorer);

nlohmann::json to_json(const ContributionReport& report);
std::string contributions_csv(const ContributionReport& report);
std::string topk_csv(const std::vector<TopKPoint>& curve);

}  // namespace sblq
