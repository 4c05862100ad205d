#include "btpredict/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>

#include "btpredict/rng.hpp"

namespace btp {

namespace {

constexpr std::array<int, 3> kThresholds = {1, 2, 3};

std::uint64_t query_seed(std::uint64_t global_seed, const Replay& r, std::size_t event_index) {
  std::uint64_t s = combine_seed(global_seed, fnv1a(r.game_id));
  s = combine_seed(s, r.player_id);
  return combine_seed(s, event_index);
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

// Per-replay means; k metrics only exist for replays with >= 5 events.
struct ReplayEval {
  bool has_points = false;
  bool has_k = false;
  double d_best = 0, d_mean = 0;
  std::array<double, 3> k_best{}, k_mean{};
  std::uint64_t points = 0, nocompat = 0;
};

ReplayEval evaluate_one(const Model& model, const Replay& r, double p_missing,
                        std::uint64_t seed) {
  ReplayEval out;
  auto prefixes = prefix_sequence(r);
  std::size_t len = prefixes.size();
  if (len < 4) return out;

  for (std::size_t n = 4; n <= len; ++n) {
    std::uint32_t t = prefixes[n - 1].first;
    const BuildTree& truth = prefixes[n - 1].second;
    ObservationVector obs =
        observation_at(r, t, NoiseSpec{p_missing, query_seed(seed, r, n)});
    std::uint32_t tq = std::clamp<std::uint32_t>(t, 1, model.config().t_max_s);

    double d_b, d_m;
    std::array<double, 3> kb{}, km{};
    try {
      Posterior post = posterior(model, tq, obs);
      const BuildTree& best = most_probable(post);
      d_b = static_cast<double>(distance(best, truth));
      d_m = expected_distance(post, truth);
      for (std::size_t k = 0; k + n <= len; ++k) {
        const BuildTree& future = prefixes[n - 1 + k].second;
        std::uint64_t db_k = distance(best, future);
        double dm_k = expected_distance(post, future);
        for (std::size_t di = 0; di < kThresholds.size(); ++di) {
          if (db_k <= static_cast<std::uint64_t>(kThresholds[di])) kb[di] = static_cast<double>(k);
          if (dm_k <= static_cast<double>(kThresholds[di])) km[di] = static_cast<double>(k);
        }
      }
    } catch (const NoCompatibleTreeError&) {
      d_b = d_m = static_cast<double>(truth.total());  // distance(empty, truth)
      out.nocompat += 1;
    }
    out.d_best += d_b;
    out.d_mean += d_m;
    for (std::size_t di = 0; di < kThresholds.size(); ++di) {
      out.k_best[di] += kb[di];
      out.k_mean[di] += km[di];
    }
    out.points += 1;
  }

  double np = static_cast<double>(out.points);
  out.d_best /= np;
  out.d_mean /= np;
  for (std::size_t di = 0; di < kThresholds.size(); ++di) {
    out.k_best[di] /= np;
    out.k_mean[di] /= np;
  }
  out.has_points = true;
  out.has_k = len >= 5;
  return out;
}

}  // namespace

std::vector<QueryPoint> make_query_points(const Replay& r, double p_missing,
                                          std::uint64_t global_seed) {
  std::vector<QueryPoint> out;
  auto prefixes = prefix_sequence(r);
  for (std::size_t n = 4; n <= prefixes.size(); ++n) {
    QueryPoint q;
    q.event_index = n;
    q.time_s = prefixes[n - 1].first;
    q.truth = prefixes[n - 1].second;
    q.observation =
        observation_at(r, q.time_s, NoiseSpec{p_missing, query_seed(global_seed, r, n)});
    out.push_back(std::move(q));
  }
  return out;
}

MetricsRow evaluate_replays(const Model& model, std::span<const Replay> replays,
                            double p_missing, std::uint64_t seed, std::string_view matchup,
                            int fold, int jobs) {
  std::vector<ReplayEval> evals(replays.size());
  if (jobs <= 1 || replays.size() < 2) {
    for (std::size_t i = 0; i < replays.size(); ++i)
      evals[i] = evaluate_one(model, replays[i], p_missing, seed);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < replays.size(); i = next.fetch_add(1))
        evals[i] = evaluate_one(model, replays[i], p_missing, seed);
    };
    std::vector<std::thread> pool;
    std::size_t n_threads = std::min<std::size_t>(jobs, replays.size());
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  MetricsRow row;
  row.matchup = std::string(matchup);
  row.noise = p_missing;
  row.fold = fold;
  std::uint64_t d_replays = 0, k_replays = 0;
  for (const ReplayEval& e : evals) {
    if (!e.has_points) {
      row.n_skipped += 1;
      continue;
    }
    row.n_points += e.points;
    row.n_nocompat += e.nocompat;
    row.d_best_k0 += e.d_best;
    row.d_mean_k0 += e.d_mean;
    ++d_replays;
    if (e.has_k) {
      for (std::size_t di = 0; di < kThresholds.size(); ++di) {
        row.k_best[di] += e.k_best[di];
        row.k_mean[di] += e.k_mean[di];
      }
      ++k_replays;
    } else {
      row.n_skipped += 1;
    }
  }
  if (d_replays > 0) {
    row.d_best_k0 /= static_cast<double>(d_replays);
    row.d_mean_k0 /= static_cast<double>(d_replays);
  }
  if (k_replays > 0) {
    for (std::size_t di = 0; di < kThresholds.size(); ++di) {
      row.k_best[di] /= static_cast<double>(k_replays);
      row.k_mean[di] /= static_cast<double>(k_replays);
    }
  }
  return row;
}

std::pair<double, double> reconstruction_metrics(const Model& model,
                                                 std::span<const Replay> replays,
                                                 const NoiseSpec& noise) {
  MetricsRow row = evaluate_replays(model, replays, noise.p_missing, noise.seed);
  return {row.d_best_k0, row.d_mean_k0};
}

std::pair<double, double> predictive_power(const Model& model, std::span<const Replay> replays,
                                           int d_threshold, const NoiseSpec& noise) {
  if (d_threshold < 1) throw Error("distance threshold must be >= 1");
  MetricsRow row = evaluate_replays(model, replays, noise.p_missing, noise.seed);
  for (std::size_t di = 0; di < kThresholds.size(); ++di)
    if (kThresholds[di] == d_threshold) return {row.k_best[di], row.k_mean[di]};

  // Threshold outside the standard report columns: reuse the per-point scan
  // with a single custom threshold.
  double kb_sum = 0, km_sum = 0;
  std::uint64_t n_replays = 0;
  for (const Replay& r : replays) {
    auto prefixes = prefix_sequence(r);
    std::size_t len = prefixes.size();
    if (len < 5) continue;
    double kb_replay = 0, km_replay = 0;
    std::uint64_t points = 0;
    for (std::size_t n = 4; n <= len; ++n) {
      std::uint32_t t = prefixes[n - 1].first;
      ObservationVector obs =
          observation_at(r, t, NoiseSpec{noise.p_missing, query_seed(noise.seed, r, n)});
      std::uint32_t tq = std::clamp<std::uint32_t>(t, 1, model.config().t_max_s);
      double kb = 0, km = 0;
      try {
        Posterior post = posterior(model, tq, obs);
        const BuildTree& best = most_probable(post);
        for (std::size_t k = 0; k + n <= len; ++k) {
          const BuildTree& future = prefixes[n - 1 + k].second;
          if (distance(best, future) <= static_cast<std::uint64_t>(d_threshold))
            kb = static_cast<double>(k);
          if (expected_distance(post, future) <= static_cast<double>(d_threshold))
            km = static_cast<double>(k);
        }
      } catch (const NoCompatibleTreeError&) {
      }
      kb_replay += kb;
      km_replay += km;
      ++points;
    }
    kb_sum += kb_replay / static_cast<double>(points);
    km_sum += km_replay / static_cast<double>(points);
    ++n_replays;
  }
  if (n_replays == 0) return {0.0, 0.0};
  return {kb_sum / static_cast<double>(n_replays), km_sum / static_cast<double>(n_replays)};
}

MetricsReport noise_sweep(const Model& model, std::span<const Replay> replays,
                          const std::vector<double>& levels, std::uint64_t seed,
                          std::string_view matchup, int jobs) {
  MetricsReport report;
  report.seed = seed;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    double p = levels[i];
    if (p < 0.0 || p > 1.0) throw Error("noise level must be in [0, 1]");
    std::uint64_t level_seed = combine_seed(seed, i);
    report.rows.push_back(evaluate_replays(model, replays, p, level_seed, matchup, -1, jobs));
  }
  return report;
}

MetricsReport cross_validate(const std::vector<Replay>& corpus, const TechDag& dag,
                             const ModelConfig& config, int folds, const NoiseSpec& noise,
                             std::string_view matchup, int jobs) {
  if (folds < 2) throw Error("cross-validation needs at least 2 folds");
  if (corpus.size() < static_cast<std::size_t>(folds))
    throw Error("corpus too small: " + std::to_string(corpus.size()) + " replays for " +
                std::to_string(folds) + " folds");

  std::vector<std::size_t> index(corpus.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  SplitMix64 rng(noise.seed);
  rng.shuffle(index);

  MetricsReport report;
  report.seed = noise.seed;
  report.folds = folds;
  MetricsRow total;
  total.matchup = std::string(matchup);
  total.noise = noise.p_missing;
  total.fold = -1;
  for (int f = 0; f < folds; ++f) {
    std::size_t begin = corpus.size() * f / folds;
    std::size_t end = corpus.size() * (f + 1) / folds;
    std::vector<Replay> train, eval;
    for (std::size_t i = 0; i < index.size(); ++i)
      (i >= begin && i < end ? eval : train).push_back(corpus[index[i]]);

    Model model = Model::fit(train, dag, config);
    MetricsRow row =
        evaluate_replays(model, eval, noise.p_missing, noise.seed, matchup, f, jobs);
    total.d_best_k0 += row.d_best_k0;
    total.d_mean_k0 += row.d_mean_k0;
    for (std::size_t di = 0; di < kThresholds.size(); ++di) {
      total.k_best[di] += row.k_best[di];
      total.k_mean[di] += row.k_mean[di];
    }
    total.n_points += row.n_points;
    total.n_nocompat += row.n_nocompat;
    total.n_skipped += row.n_skipped;
    report.rows.push_back(std::move(row));
  }
  double nf = static_cast<double>(folds);
  total.d_best_k0 /= nf;
  total.d_mean_k0 /= nf;
  for (std::size_t di = 0; di < kThresholds.size(); ++di) {
    total.k_best[di] /= nf;
    total.k_mean[di] /= nf;
  }
  report.rows.push_back(std::move(total));
  return report;
}

namespace {

void write_row_metrics(std::ostream& out, const MetricsRow& row) {
  out << format_double(row.d_best_k0) << ',' << format_double(row.d_mean_k0);
  for (std::size_t di = 0; di < kThresholds.size(); ++di)
    out << ',' << format_double(row.k_best[di]) << ',' << format_double(row.k_mean[di]);
}

}  // namespace

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "# btpredict evaluation report\n";
  out << "# averaging: per query point within a replay, then across replays; "
         "fold aggregates average fold rows equally\n";
  out << "# k-ahead: query at event n (n>=4), compare against the true tree after event n+k, "
         "horizon capped by replay length\n";
  out << "# incompatible observations score d(empty, truth) with k=0 (n_nocompat column)\n";
  out << "# seed " << report.seed << "\n";
  out << "matchup,noise,fold,d_best_k0,d_mean_k0,k_best_d1,k_mean_d1,k_best_d2,k_mean_d2,"
         "k_best_d3,k_mean_d3,n_points,n_nocompat\n";
  for (const MetricsRow& row : report.rows) {
    out << row.matchup << ',' << format_double(row.noise) << ',';
    if (row.fold < 0)
      out << "avg";
    else
      out << row.fold;
    out << ',';
    write_row_metrics(out, row);
    out << ',' << row.n_points << ',' << row.n_nocompat << '\n';
  }
}

void write_table1(std::ostream& out, const MetricsReport& report) {
  // Group aggregate rows by noise level, preserving first-seen order.
  std::vector<double> levels;
  std::map<double, std::vector<const MetricsRow*>> by_level;
  for (const MetricsRow& row : report.rows) {
    if (row.fold >= 0) continue;
    if (!by_level.contains(row.noise)) levels.push_back(row.noise);
    by_level[row.noise].push_back(&row);
  }
  std::sort(levels.begin(), levels.end());

  out << "noise,row,d_best_k0,d_mean_k0,k_best_d1,k_mean_d1,k_best_d2,k_mean_d2,"
         "k_best_d3,k_mean_d3\n";
  for (double level : levels) {
    const auto& rows = by_level[level];
    for (const MetricsRow* row : rows) {
      out << format_double(level) << ',' << row->matchup << ',';
      write_row_metrics(out, *row);
      out << '\n';
    }
    MetricsRow avg, lo, hi;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const MetricsRow& r = *rows[i];
      avg.d_best_k0 += r.d_best_k0;
      avg.d_mean_k0 += r.d_mean_k0;
      lo.d_best_k0 = i == 0 ? r.d_best_k0 : std::min(lo.d_best_k0, r.d_best_k0);
      lo.d_mean_k0 = i == 0 ? r.d_mean_k0 : std::min(lo.d_mean_k0, r.d_mean_k0);
      hi.d_best_k0 = std::max(hi.d_best_k0, r.d_best_k0);
      hi.d_mean_k0 = std::max(hi.d_mean_k0, r.d_mean_k0);
      for (std::size_t di = 0; di < kThresholds.size(); ++di) {
        avg.k_best[di] += r.k_best[di];
        avg.k_mean[di] += r.k_mean[di];
        lo.k_best[di] = i == 0 ? r.k_best[di] : std::min(lo.k_best[di], r.k_best[di]);
        lo.k_mean[di] = i == 0 ? r.k_mean[di] : std::min(lo.k_mean[di], r.k_mean[di]);
        hi.k_best[di] = std::max(hi.k_best[di], r.k_best[di]);
        hi.k_mean[di] = std::max(hi.k_mean[di], r.k_mean[di]);
      }
    }
    double n = static_cast<double>(rows.size());
    avg.d_best_k0 /= n;
    avg.d_mean_k0 /= n;
    for (std::size_t di = 0; di < kThresholds.size(); ++di) {
      avg.k_best[di] /= n;
      avg.k_mean[di] /= n;
    }
    for (auto [label, row] : {std::pair{"average", &avg}, {"min", &lo}, {"max", &hi}}) {
      out << format_double(level) << ',' << label << ',';
      write_row_metrics(out, *row);
      out << '\n';
    }
  }
}

}  // namespace btp
