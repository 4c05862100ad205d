#include "btpredict/replay.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "btpredict/learning.hpp"
#include "btpredict/rng.hpp"

namespace btp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::uint32_t parse_u32_field(std::string_view s, const char* what, std::size_t line) {
  std::uint32_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line);
  return v;
}

// Appends ev to events, first inserting (at the same timestamp) any missing
// transitive prerequisites. Returns the number of insertions. Events whose
// building is already at its cap are dropped by the caller.
std::uint64_t append_with_repair(const TechDag& dag, std::vector<std::uint32_t>& counts,
                                 std::vector<BuildEvent>& events, const BuildEvent& ev) {
  std::vector<std::uint32_t> missing;
  std::vector<std::uint32_t> stack(dag.building(ev.building).prerequisites);
  std::vector<bool> seen(dag.size(), false);
  while (!stack.empty()) {
    std::uint32_t p = stack.back();
    stack.pop_back();
    if (seen[p] || counts[p] > 0) continue;
    seen[p] = true;
    missing.push_back(p);
    for (std::uint32_t q : dag.building(p).prerequisites) stack.push_back(q);
  }
  std::sort(missing.begin(), missing.end(), [&](std::uint32_t a, std::uint32_t b) {
    return dag.topological_rank(a) < dag.topological_rank(b);
  });
  for (std::uint32_t p : missing) {
    events.push_back({ev.player, ev.time_s, p});
    counts[p] += 1;
  }
  events.push_back(ev);
  counts[ev.building] += 1;
  return missing.size();
}

}  // namespace

ParseResult parse_replay_log(std::istream& in, const TechDag& dag) {
  struct RawEvent {
    std::uint32_t time_s;
    std::uint32_t building;
  };
  struct Group {
    std::string game_id;
    std::uint32_t player_id;
    std::vector<RawEvent> events;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> group_index;

  std::string raw;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (first_data_line) {
      first_data_line = false;
      if (line.starts_with("game_id")) continue;  // optional header
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string_view::npos) {
        fields.push_back(trim(line.substr(start)));
        break;
      }
      fields.push_back(trim(line.substr(start, end - start)));
      start = end + 1;
    }
    if (fields.size() != 4)
      throw ParseError("expected 4 fields 'game_id,player_id,time_s,building_name'", line_no);

    std::string game_id(fields[0]);
    std::uint32_t player = parse_u32_field(fields[1], "player id", line_no);
    std::uint32_t time_s = parse_u32_field(fields[2], "time", line_no);
    auto building = dag.find(fields[3]);
    if (!building)
      throw ParseError("unknown building '" + std::string(fields[3]) + "'", line_no);

    std::string key = game_id + '\x1f' + std::to_string(player);
    auto [it, inserted] = group_index.emplace(key, groups.size());
    if (inserted) groups.push_back({std::move(game_id), player, {}});
    groups[it->second].events.push_back({time_s, *building});
  }

  ParseResult result;
  for (Group& g : groups) {
    for (std::size_t i = 1; i < g.events.size(); ++i)
      if (g.events[i].time_s < g.events[i - 1].time_s) ++result.stats.reordered_events;
    std::stable_sort(g.events.begin(), g.events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.time_s < b.time_s; });

    Replay r;
    r.game_id = std::move(g.game_id);
    r.player_id = g.player_id;
    r.race = dag.race();
    std::vector<std::uint32_t> counts(dag.size(), 0);
    for (const RawEvent& ev : g.events) {
      if (counts[ev.building] >= dag.building(ev.building).max_count) {
        ++result.stats.capped_events;
        continue;
      }
      result.stats.repaired_events +=
          append_with_repair(dag, counts, r.events, {r.player_id, ev.time_s, ev.building});
    }
    result.replays.push_back(std::move(r));
  }
  return result;
}

void write_replay_log(std::ostream& out, std::span<const Replay> replays, const TechDag& dag) {
  out << "game_id,player_id,time_s,building_name\n";
  for (const Replay& r : replays)
    for (const BuildEvent& ev : r.events)
      out << r.game_id << ',' << r.player_id << ',' << ev.time_s << ','
          << dag.building(ev.building).name << '\n';
}

std::vector<std::pair<std::uint32_t, BuildTree>> prefix_sequence(const Replay& r) {
  std::vector<std::pair<std::uint32_t, BuildTree>> out;
  out.reserve(r.events.size());
  BuildTree tree;
  for (const BuildEvent& ev : r.events) {
    tree.add(ev.building);
    out.push_back({ev.time_s, tree});
  }
  return out;
}

BuildTree tree_at(const Replay& r, std::uint32_t t) {
  BuildTree tree;
  for (const BuildEvent& ev : r.events) {
    if (ev.time_s > t) break;
    tree.add(ev.building);
  }
  return tree;
}

BuildTree terminal_tree(const Replay& r) {
  BuildTree tree;
  for (const BuildEvent& ev : r.events) tree.add(ev.building);
  return tree;
}

ObservationVector observation_at(const Replay& r, std::uint32_t t, const NoiseSpec& noise) {
  BuildTree truth = tree_at(r, t);
  if (noise.p_missing <= 0.0) return truth;
  SplitMix64 rng(noise.seed);
  ObservationVector obs;
  for (const auto& [id, count] : truth.entries()) {
    std::uint32_t kept = 0;
    for (std::uint32_t i = 0; i < count; ++i)
      if (rng.next_double() >= noise.p_missing) ++kept;
    if (kept > 0) obs.set_count(id, kept);
  }
  return obs;
}

std::vector<Replay> generate_synthetic_replays(const Model& model, std::size_t n,
                                               std::uint64_t seed) {
  if (model.empty()) throw Error("cannot generate replays from an empty model");
  const TechDag& dag = model.dag();

  // Sampling weights mirror the inference prior.
  std::vector<const BuildTree*> trees;
  std::vector<double> cumulative;
  double total = 0;
  for (const auto& [tree, entry] : model.entries()) {
    trees.push_back(&tree);
    total += model.config().prior_mode == PriorMode::histogram
                 ? static_cast<double>(entry.prior_count + 1)
                 : 1.0;
    cumulative.push_back(total);
  }

  std::vector<Replay> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(combine_seed(seed, i));
    double pick = rng.next_double() * total;
    std::size_t idx =
        std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
    if (idx >= trees.size()) idx = trees.size() - 1;
    const BuildTree& terminal = *trees[idx];

    // Instances in topological order; ties broken by id via the dag's order.
    std::vector<std::uint32_t> order;
    for (std::uint32_t id : dag.topological_order())
      for (std::uint32_t c = 0; c < terminal.count(id); ++c) order.push_back(id);

    // Sample each prefix's time where the model has a distribution for it;
    // linearly interpolate the gaps afterwards (index 0 is anchored at 0 and
    // the terminal tree always has an entry).
    std::vector<double> times(order.size() + 1, 0.0);
    std::vector<bool> known(order.size() + 1, false);
    known[0] = true;
    BuildTree prefix;
    for (std::size_t k = 0; k < order.size(); ++k) {
      prefix.add(order[k]);
      if (const Model::Entry* e = model.find(prefix)) {
        times[k + 1] = rng.next_gaussian(e->mu, e->sigma);
        known[k + 1] = true;
      }
    }
    for (std::size_t k = 1; k <= order.size(); ++k) {
      if (known[k]) continue;
      std::size_t lo = k - 1;
      while (!known[lo]) --lo;
      std::size_t hi = k + 1;
      while (hi <= order.size() && !known[hi]) ++hi;
      if (hi > order.size()) {
        // no later anchor: extend with the mean spacing so far
        double step = lo > 0 ? times[lo] / static_cast<double>(lo) : 60.0;
        times[k] = times[lo] + step * static_cast<double>(k - lo);
      } else {
        double f = static_cast<double>(k - lo) / static_cast<double>(hi - lo);
        times[k] = times[lo] + (times[hi] - times[lo]) * f;
      }
      known[k] = true;
    }

    std::vector<double> sampled(times.begin() + 1, times.end());
    std::sort(sampled.begin(), sampled.end());

    Replay r;
    r.game_id = "synth-" + std::to_string(i);
    r.player_id = 0;
    r.race = dag.race();
    for (std::size_t k = 0; k < order.size(); ++k) {
      double clamped = std::min(std::max(sampled[k], 1.0),
                                static_cast<double>(model.config().t_max_s));
      r.events.push_back({0, static_cast<std::uint32_t>(std::llround(clamped)), order[k]});
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace btp
