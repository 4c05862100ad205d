#pragma once

// Shared fixtures for the unit and acceptance suites: tiny hand dags,
// random dags/trees, and toy models with raw per-tree time samples kept
// alongside so independent oracles can recompute everything from scratch.

#include <cstdint>
#include <string>
#include <vector>

#include "btpredict/learning.hpp"
#include "btpredict/replay.hpp"
#include "btpredict/rng.hpp"
#include "btpredict/techtree.hpp"

namespace btp::test {

// a <- b <- c chain: c requires b requires a.
inline TechDag chain_dag() {
  std::vector<BuildingType> b(3);
  b[0].name = "a";
  b[1].name = "b";
  b[1].prerequisites = {0};
  b[2].name = "c";
  b[2].prerequisites = {1};
  return TechDag(Race::protoss, std::move(b));
}

// pylon <- gateway <- cybernetics_core plus an independent forge.
inline TechDag protoss_toy_dag() {
  std::vector<BuildingType> b(4);
  b[0].name = "pylon";
  b[1].name = "gateway";
  b[1].prerequisites = {0};
  b[2].name = "cybernetics_core";
  b[2].prerequisites = {1};
  b[3].name = "forge";
  b[3].prerequisites = {0};
  return TechDag(Race::protoss, std::move(b));
}

inline BuildTree make_tree(const TechDag& dag, std::string_view text) {
  return parse_counts(text, dag);
}

inline TechDag random_dag(SplitMix64& rng, std::size_t max_buildings = 12,
                          bool allow_duplicables = true) {
  std::size_t n = 1 + rng.next_below(max_buildings);
  std::vector<BuildingType> buildings(n);
  for (std::size_t i = 0; i < n; ++i) {
    buildings[i].name = "b" + std::to_string(i);
    if (i > 0) {
      std::size_t max_prereqs = std::min<std::size_t>(i, 3);
      std::size_t count = rng.next_below(max_prereqs + 1);
      std::vector<std::uint32_t> pool(i);
      for (std::size_t j = 0; j < i; ++j) pool[j] = static_cast<std::uint32_t>(j);
      rng.shuffle(pool);
      for (std::size_t j = 0; j < count; ++j)
        buildings[i].prerequisites.push_back(pool[j]);
    }
    if (allow_duplicables && rng.next_below(5) == 0) buildings[i].max_count = 2;
  }
  return TechDag(Race::protoss, std::move(buildings));
}

// Random prerequisite-closed multiset grown one addable instance at a time.
inline BuildTree random_valid_tree(SplitMix64& rng, const TechDag& dag) {
  BuildTree tree;
  std::size_t steps = rng.next_below(2 * dag.size() + 1);
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<std::uint32_t> addable;
    for (const BuildingType& b : dag.buildings()) {
      if (tree.count(b.id) >= b.max_count) continue;
      bool ok = true;
      for (std::uint32_t p : b.prerequisites)
        if (tree.count(p) == 0) ok = false;
      if (ok) addable.push_back(b.id);
    }
    if (addable.empty()) break;
    tree.add(addable[rng.next_below(addable.size())]);
  }
  return tree;
}

// Sub-multiset obtained by deleting random instances; always compatible
// with the source tree.
inline ObservationVector random_observation_of(SplitMix64& rng, const BuildTree& tree) {
  ObservationVector obs;
  for (const auto& [id, count] : tree.entries()) {
    std::uint32_t kept = static_cast<std::uint32_t>(rng.next_below(count + 1));
    if (kept > 0) obs.set_count(id, kept);
  }
  return obs;
}

// Time samples whose mean is exactly the chosen integer: symmetric pairs
// around mu plus at least one sample at mu. Keeps the sufficient-statistics
// algebra exact in double precision, so independently coded estimators
// agree bit for bit.
inline std::vector<std::uint32_t> integer_mean_times(SplitMix64& rng, std::uint32_t t_max) {
  std::uint32_t mu = 1 + static_cast<std::uint32_t>(rng.next_below(t_max));
  std::uint32_t max_d = std::min(mu - 1, t_max - mu);
  std::vector<std::uint32_t> times(1 + rng.next_below(3), mu);
  std::size_t pairs = rng.next_below(8);
  for (std::size_t i = 0; i < pairs; ++i) {
    std::uint32_t d = max_d ? static_cast<std::uint32_t>(rng.next_below(max_d + 1)) : 0;
    times.push_back(mu + d);
    times.push_back(mu - d);
  }
  return times;
}

// Random corpus of structurally valid replays over the dag: each replay
// builds toward a random valid tree with jittered, non-decreasing times.
inline std::vector<Replay> random_corpus(SplitMix64& rng, const TechDag& dag,
                                         std::size_t n_replays, std::uint32_t t_max) {
  std::vector<Replay> out;
  for (std::size_t i = 0; i < n_replays; ++i) {
    Replay r;
    r.game_id = "g" + std::to_string(i);
    r.player_id = static_cast<std::uint32_t>(rng.next_below(2));
    r.race = dag.race();
    BuildTree target = random_valid_tree(rng, dag);
    std::uint32_t t = 1;
    for (std::uint32_t id : dag.topological_order())
      for (std::uint32_t c = 0; c < target.count(id); ++c) {
        t += static_cast<std::uint32_t>(rng.next_below(40));
        r.events.push_back({r.player_id, std::min(t, t_max), id});
      }
    out.push_back(std::move(r));
  }
  return out;
}

struct RawEntry {
  BuildTree tree;
  std::vector<std::uint32_t> times;
  std::uint64_t prior_count = 0;
};

struct ToyModel {
  TechDag dag;
  ModelConfig config;
  std::vector<RawEntry> raw;
  Model model;
};

inline Model model_from_raw(const TechDag& dag, const ModelConfig& config,
                            const std::vector<RawEntry>& raw) {
  std::vector<std::pair<BuildTree, GaussianStats>> stats;
  std::vector<std::pair<BuildTree, std::uint64_t>> priors;
  for (const RawEntry& e : raw) {
    GaussianStats s;
    s.n0 = config.n0;
    s.sigma0_s = config.sigma0_s;
    for (std::uint32_t t : e.times) observe(s, t);
    stats.push_back({e.tree, s});
    if (e.prior_count > 0) priors.push_back({e.tree, e.prior_count});
  }
  return Model::from_stats(dag, config, std::move(stats), std::move(priors));
}

inline ToyModel random_toy_model(std::uint64_t seed, std::size_t max_buildings = 12,
                                 std::size_t max_trees = 300) {
  SplitMix64 rng(seed);
  TechDag dag = random_dag(rng, max_buildings, false);
  auto domain = enumerate_build_trees(dag, false);
  rng.shuffle(domain);
  std::size_t keep = std::min(domain.size(), 1 + rng.next_below(max_trees));
  domain.resize(keep);

  ModelConfig config;
  config.t_max_s = 600;
  config.sigma0_s = 120.0;
  config.n0 = 1.0;
  config.sigma_min_s = 5.0;
  config.prior_mode = rng.next_below(2) ? PriorMode::histogram : PriorMode::uniform;

  std::vector<RawEntry> raw;
  for (const BuildTree& tree : domain)
    raw.push_back({tree, integer_mean_times(rng, config.t_max_s), rng.next_below(5)});

  Model model = model_from_raw(dag, config, raw);
  return {std::move(dag), config, std::move(raw), std::move(model)};
}

// Integer statistics whose derived sigma is close to the requested target
// (exact when 4 * (n0 * sigma0^2) is divisible-friendly; close enough for
// tolerance math either way). Returns stats with n samples at mu +/- d.
inline GaussianStats stats_for(std::uint32_t mu, double sigma_target, std::uint64_t n,
                               const ModelConfig& config) {
  // Solve n_pairs * 2 d^2 = (n0 + n) sigma_target^2 - n0 sigma0^2 for d over
  // n/2 symmetric pairs; round d to an integer.
  GaussianStats s;
  s.n0 = config.n0;
  s.sigma0_s = config.sigma0_s;
  double need = (config.n0 + static_cast<double>(n)) * sigma_target * sigma_target -
                config.n0 * config.sigma0_s * config.sigma0_s;
  std::uint64_t pairs = n / 2;
  double d = pairs > 0 && need > 0 ? std::sqrt(need / (2.0 * static_cast<double>(pairs))) : 0.0;
  std::uint64_t di = static_cast<std::uint64_t>(std::llround(d));
  for (std::uint64_t i = 0; i < pairs; ++i) {
    observe(s, static_cast<std::uint32_t>(mu + di));
    observe(s, static_cast<std::uint32_t>(mu - di));
  }
  if (n % 2) observe(s, mu);
  return s;
}

}  // namespace btp::test
