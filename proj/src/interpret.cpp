#include "sblq/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sblq/errors.hpp"
#include "sblq/io.hpp"

namespace sblq {

using nlohmann::json;

void FeatureGroups::validate(int feature_dim) const {
  if (static_cast<int>(group_of.size()) != feature_dim) {
    throw ShapeError("feature group map must assign every feature");
  }
  if (names.empty()) throw DomainError("feature group map has no groups");
  for (int g : group_of) {
    if (g < 0 || g >= count()) throw IndexError("feature group index out of range");
  }
}

ContributionReport contribution_proportions(const ModelBundle& model, const FeatureGroups* groups) {
  if (model.stages.empty()) throw EmptyInputError("model has no stages");
  const int T = model.horizon;
  const int d = model.feature_dim;
  ContributionReport report;
  report.per_stage_weights.resize(T, d);
  for (int t = 1; t <= T; ++t) report.per_stage_weights.row(t - 1) = model.theta(t).transpose();
  const Vector importance = report.per_stage_weights.cwiseAbs().colwise().sum().transpose() / T;

  Vector totals;
  if (groups != nullptr) {
    groups->validate(d);
    totals = Vector::Zero(groups->count());
    for (int j = 0; j < d; ++j) totals[groups->group_of[static_cast<std::size_t>(j)]] += importance[j];
    report.labels = groups->names;
  } else {
    totals = importance;
    for (int j = 0; j < d; ++j) report.labels.push_back("x" + std::to_string(j));
  }
  const double sum = totals.sum();
  if (!(sum > 0.0)) throw DegenerateError("all model weights are zero");
  report.proportions = totals / sum;

  report.ranking.resize(static_cast<std::size_t>(totals.size()));
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [&](int a, int b) { return report.proportions[a] > report.proportions[b]; });
  return report;
}

double interpolated_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw EmptyInputError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<bool> clipped_weights(const std::vector<WeightEntry>& weights, double pct) {
  if (weights.empty()) throw EmptyInputError("clipped_weights needs at least one entry");
  if (!(pct > 0.0 && pct < 0.5)) throw DomainError("pct must lie in (0, 0.5)");
  std::vector<double> pool;
  pool.reserve(weights.size());
  for (const auto& w : weights) pool.push_back(w.value);
  std::sort(pool.begin(), pool.end());
  const double low = interpolated_quantile(pool, pct);
  const double high = interpolated_quantile(pool, 1.0 - pct);
  std::vector<bool> flags;
  flags.reserve(weights.size());
  for (const auto& w : weights) flags.push_back(w.value > high || w.value < low);
  return flags;
}

std::vector<WeightEntry> weight_entries(const ModelBundle& model, const std::string& method) {
  std::vector<WeightEntry> out;
  for (const StageModel& s : model.stages) {
    for (Eigen::Index j = 0; j < s.theta.size(); ++j) {
      out.push_back({method, static_cast<int>(j), s.t, s.theta[j]});
    }
  }
  return out;
}

std::vector<TopKPoint> topk_feature_rewards(const ContributionReport& full, int feature_dim,
                                            const FeatureGroups* groups, const std::vector<int>& ks,
                                            const MaskedTrainer& trainer, const ModelScorer& scorer) {
  const auto units = static_cast<int>(full.ranking.size());
  if (groups != nullptr) groups->validate(feature_dim);
  std::vector<TopKPoint> curve;
  for (int k : ks) {
    if (k < 1 || k > units) {
      throw DomainError("k = " + std::to_string(k) + " outside [1, " + std::to_string(units) + "]");
    }
    std::vector<bool> keep_unit(static_cast<std::size_t>(units), false);
    for (int r = 0; r < k; ++r) keep_unit[static_cast<std::size_t>(full.ranking[static_cast<std::size_t>(r)])] = true;
    std::vector<bool> keep;
    if (k < units) {
      keep.resize(static_cast<std::size_t>(feature_dim));
      for (int j = 0; j < feature_dim; ++j) {
        const int unit = groups != nullptr ? groups->group_of[static_cast<std::size_t>(j)] : j;
        keep[static_cast<std::size_t>(j)] = keep_unit[static_cast<std::size_t>(unit)];
      }
    }
    curve.push_back({k, scorer(trainer(keep))});
  }
  return curve;
}

json to_json(const ContributionReport& r) {
  json features = json::array();
  for (Eigen::Index j = 0; j < r.proportions.size(); ++j) {
    const auto rank = std::find(r.ranking.begin(), r.ranking.end(), static_cast<int>(j)) - r.ranking.begin() + 1;
    features.push_back({{"feature", r.labels[static_cast<std::size_t>(j)]},
                        {"proportion", r.proportions[j]},
                        {"rank", rank}});
  }
  return {{"features", std::move(features)},
          {"ranking", r.ranking},
          {"per_stage_weights", io::to_json(r.per_stage_weights)}};
}

std::string contributions_csv(const ContributionReport& r) {
  std::string out = "feature,proportion,rank\n";
  for (std::size_t pos = 0; pos < r.ranking.size(); ++pos) {
    const int j = r.ranking[pos];
    out += r.labels[static_cast<std::size_t>(j)] + "," + io::format_real(r.proportions[j]) + "," +
           std::to_string(pos + 1) + "\n";
  }
  return out;
}

std::string topk_csv(const std::vector<TopKPoint>& curve) {
  std::string out = "k,reward\n";
  for (const auto& p : curve) out += std::to_string(p.k) + "," + io::format_real(p.reward) + "\n";
  return out;
}

}  // namespace sblq
