#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "btpredict/replay.hpp"
#include "btpredict/techtree.hpp"

namespace btp {

// Sufficient statistics of one build tree's time distribution, with the
// variance-prior configuration folded in. Integer sums make learning exact,
// order-independent and mergeable.
struct GaussianStats {
  std::uint64_t n = 0;
  std::uint64_t sum_t = 0;   // sum of times, seconds
  std::uint64_t sum_t2 = 0;  // sum of squared times
  double n0 = 1.0;           // prior pseudo-count
  double sigma0_s = 120.0;   // prior standard deviation, seconds
};

// Accumulates one observation. Caller is responsible for clamping t to the
// model horizon (Model::fit does, and counts clamps).
GaussianStats& observe(GaussianStats& stats, std::uint32_t t_s);

// Componentwise sum; associative and commutative with the empty stats as
// identity. Throws Error when the prior configs differ.
GaussianStats merge(const GaussianStats& a, const GaussianStats& b);

struct TimeDistribution {
  double mu_s = 0;
  double sigma_s = 0;
};

// mu = sum_t / n; sigma^2 = (n0*sigma0^2 + sum (t - mu)^2) / (n0 + n),
// floored at sigma_min_s. Wide at n=1, converges to the sample statistics as
// n grows. Throws Error when n = 0.
TimeDistribution mean_and_sigma(const GaussianStats& stats, double sigma_min_s);

enum class PriorMode : std::uint8_t { uniform, histogram };

struct ModelConfig {
  std::uint32_t t_max_s = 3600;  // horizon P, 1-second resolution
  double sigma_min_s = 5.0;      // variance floor
  double n0 = 1.0;
  double sigma0_s = 120.0;
  PriorMode prior_mode = PriorMode::uniform;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One discretized-Gaussian time distribution per build tree encountered in
// training, plus the tree prior and the dag. Immutable once built; all
// queries are concurrent-safe reads.
class Model {
 public:
  struct Entry {
    GaussianStats stats;
    std::uint64_t prior_count = 0;  // times the tree was a replay's terminal
    // derived at finalize time
    double mu = 0;
    double sigma = 0;
    double log_z = 0;      // log of the Gaussian mass summed over 1..t_max
    double log_prior = 0;
  };
  using EntryMap = std::map<BuildTree, Entry>;

  // Folds every replay prefix into the per-tree statistics. The output is
  // identical under any permutation of the replay list.
  static Model fit(std::span<const Replay> replays, const TechDag& dag,
                   const ModelConfig& config = {});

  // Builds a model from explicit statistics (hand-specified or sharded).
  static Model from_stats(const TechDag& dag, const ModelConfig& config,
                          std::vector<std::pair<BuildTree, GaussianStats>> stats,
                          std::vector<std::pair<BuildTree, std::uint64_t>> prior_counts = {});

  // Versioned text format with a trailing integrity checksum.
  void save(std::ostream& out) const;
  static Model load(std::istream& in, const TechDag& dag);

  // Merge-by-key of two compatible models: fit(A + B) == merge(fit(A), fit(B)).
  friend Model merge(const Model& a, const Model& b);

  const TechDag& dag() const { return dag_; }
  const ModelConfig& config() const { return config_; }
  const EntryMap& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry* find(const BuildTree& bt) const;
  const Entry& require(const BuildTree& bt) const;  // throws Error

  TimeDistribution time_distribution(const BuildTree& bt) const;

  // P(T = t | bt), normalized over the integer horizon 1..t_max. Positive
  // everywhere in exact arithmetic; in doubles the far tail can underflow
  // to zero, which is why inference works on log_weight instead.
  double likelihood(const BuildTree& bt, std::uint32_t t_s) const;
  // log(likelihood * prior); inference works in log space.
  double log_weight(const Entry& entry, std::uint32_t t_s) const;

  std::uint64_t clamped_observations() const { return clamped_; }
  std::uint64_t replays_fitted() const { return replays_fitted_; }
  std::size_t approximate_memory_bytes() const;

 private:
  Model(TechDag dag, ModelConfig config) : dag_(std::move(dag)), config_(config) {}

  void validate_entry(const BuildTree& bt, const GaussianStats& stats) const;
  void finalize();
  void check_horizon(std::uint32_t t_s) const;

  TechDag dag_;
  ModelConfig config_;
  EntryMap entries_;
  std::uint64_t clamped_ = 0;
  std::uint64_t replays_fitted_ = 0;
};

Model merge(const Model& a, const Model& b);

}  // namespace btp
