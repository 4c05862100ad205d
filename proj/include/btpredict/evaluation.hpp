#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "btpredict/inference.hpp"
#include "btpredict/learning.hpp"
#include "btpredict/replay.hpp"

namespace btp {

// One evaluation query: event index n (1-based, n >= 4 so the first
// buildings do not penalize the metrics), the event's time, a noisy
// observation drawn with a seed derived from (global seed, replay id, n),
// and the true tree after event n.
struct QueryPoint {
  std::size_t event_index = 0;
  std::uint32_t time_s = 0;
  ObservationVector observation;
  BuildTree truth;
};

std::vector<QueryPoint> make_query_points(const Replay& r, double p_missing,
                                          std::uint64_t global_seed);

// One row of the report. fold -1 marks an aggregate row. k metrics are for
// distance thresholds 1, 2, 3 in order.
struct MetricsRow {
  std::string matchup = "all";
  double noise = 0.0;
  int fold = -1;
  double d_best_k0 = 0.0;
  double d_mean_k0 = 0.0;
  std::array<double, 3> k_best{};
  std::array<double, 3> k_mean{};
  std::uint64_t n_points = 0;
  std::uint64_t n_nocompat = 0;
  std::uint64_t n_skipped = 0;  // replays shorter than 5 events
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::uint64_t seed = 0;
  int folds = 0;
};

// Single-pass evaluator behind the metric operations: averages each metric
// over query points within a replay, then across replays (long games do not
// dominate). Incompatible-observation points score distance(empty, truth)
// and k = 0 and are counted separately. Replays evaluate independently
// (jobs > 1 runs them on a worker pool); aggregation order is fixed so
// parallelism cannot change output bytes.
MetricsRow evaluate_replays(const Model& model, std::span<const Replay> replays,
                            double p_missing, std::uint64_t seed,
                            std::string_view matchup = "all", int fold = -1, int jobs = 1);

// Averaged k=0 distances: (d_best, d_mean). The model must be fitted on
// data disjoint from `replays`.
std::pair<double, double> reconstruction_metrics(const Model& model,
                                                 std::span<const Replay> replays,
                                                 const NoiseSpec& noise);

// Averaged k-ahead horizons (k_best, k_mean) at one distance threshold:
// at query point n, k is the largest horizon with the prediction within
// the threshold of the true tree after event n+k, capped by replay length.
std::pair<double, double> predictive_power(const Model& model, std::span<const Replay> replays,
                                           int d_threshold, const NoiseSpec& noise);

// One row per noise level, each with a level-derived independent seed.
MetricsReport noise_sweep(const Model& model, std::span<const Replay> replays,
                          const std::vector<double>& levels, std::uint64_t seed,
                          std::string_view matchup = "all", int jobs = 1);

// Seeded shuffle, fold split, fit on folds-1 parts and evaluate on the
// held-out part; per-fold rows plus an aggregate row. Deterministic given
// seed. Requires folds >= 2 and at least `folds` replays.
MetricsReport cross_validate(const std::vector<Replay>& corpus, const TechDag& dag,
                             const ModelConfig& config, int folds, const NoiseSpec& noise,
                             std::string_view matchup = "all", int jobs = 1);

// CSV with a '#' metadata header; identical inputs give identical bytes.
void write_report_csv(std::ostream& out, const MetricsReport& report);

// Aggregate layout grouped by noise level with per-matchup rows followed by
// average/min/max rows, for side-by-side comparison against externally
// published tables.
void write_table1(std::ostream& out, const MetricsReport& report);

}  // namespace btp
