#include "btpredict/inference.hpp"

#include <algorithm>
#include <cmath>

namespace btp {

Posterior posterior(const Model& model, std::uint32_t t_s, const ObservationVector& obs) {
  if (t_s < 1 || t_s > model.config().t_max_s)
    throw Error("query time " + std::to_string(t_s) + " outside the horizon [1, " +
                std::to_string(model.config().t_max_s) + "]");

  struct Weighted {
    const BuildTree* tree;
    double log_w;
  };
  std::vector<Weighted> weighted;
  for (const auto& [tree, entry] : model.entries()) {
    if (!compatible(tree, obs)) continue;
    weighted.push_back({&tree, model.log_weight(entry, t_s)});
  }
  if (weighted.empty())
    throw NoCompatibleTreeError("no build tree in the model domain is compatible with the " +
                                std::to_string(obs.total()) + "-building observation");

  double max_log = weighted.front().log_w;
  for (const Weighted& w : weighted) max_log = std::max(max_log, w.log_w);
  double total = 0;
  for (const Weighted& w : weighted) total += std::exp(w.log_w - max_log);

  Posterior p;
  p.query_time_s = t_s;
  p.observation = obs;
  p.compatible_count = weighted.size();
  p.entries.reserve(weighted.size());
  for (const Weighted& w : weighted) {
    double prob = std::exp(w.log_w - max_log) / total;
    if (prob > 0.0) p.entries.push_back({*w.tree, prob});
  }
  std::sort(p.entries.begin(), p.entries.end(), [](const Posterior::Item& a, const Posterior::Item& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.tree < b.tree;
  });
  return p;
}

const BuildTree& most_probable(const Posterior& p) {
  if (p.entries.empty()) throw Error("empty posterior");
  return p.entries.front().tree;
}

double expected_distance(const Posterior& p, const BuildTree& real) {
  double sum = 0;
  for (const Posterior::Item& item : p.entries)
    sum += item.probability * static_cast<double>(distance(item.tree, real));
  return sum;
}

BuildTree reconstruct(const Model& model, std::uint32_t t_s, const ObservationVector& obs) {
  return most_probable(posterior(model, t_s, obs));
}

}  // namespace btp
