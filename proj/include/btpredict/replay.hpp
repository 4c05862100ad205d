#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btpredict/techtree.hpp"

namespace btp {

class Model;

struct BuildEvent {
  std::uint32_t player = 0;
  std::uint32_t time_s = 0;
  std::uint32_t building = 0;
};

// One player's construction events for one game, time-sorted, with the
// running multiset after each event prerequisite-closed (the parser repairs
// and the generator produces logs that satisfy this).
struct Replay {
  std::string game_id;
  std::uint32_t player_id = 0;
  Race race = Race::protoss;
  std::vector<BuildEvent> events;
};

struct NoiseSpec {
  double p_missing = 0.0;  // in [0, 1]
  std::uint64_t seed = 0;
};

struct ParseStats {
  std::uint64_t repaired_events = 0;   // prerequisite chain insertions
  std::uint64_t reordered_events = 0;  // events with non-monotone timestamps
  std::uint64_t capped_events = 0;     // events dropped at a building's cap
};

struct ParseResult {
  std::vector<Replay> replays;
  ParseStats stats;
};

// Replay log CSV: game_id,player_id,time_s,building_name. Optional header
// line, '#' comment lines. One Replay per (game, player) pair in order of
// first appearance. Unknown building names are errors; out-of-order
// timestamps are reordered and counted; missing prerequisites are inserted
// at the same timestamp and counted; events beyond a building's cap are
// dropped and counted.
ParseResult parse_replay_log(std::istream& in, const TechDag& dag);

void write_replay_log(std::ostream& out, std::span<const Replay> replays, const TechDag& dag);

// Element i is (time of event i, canonical multiset of the first i+1
// buildings). Consecutive trees differ by exactly one instance.
std::vector<std::pair<std::uint32_t, BuildTree>> prefix_sequence(const Replay& r);

// The true multiset of buildings constructed at or before time t.
BuildTree tree_at(const Replay& r, std::uint32_t t);

BuildTree terminal_tree(const Replay& r);

// Starts from tree_at(r, t) and independently drops each building instance
// with probability p_missing, driven by the seed alone. Noise only removes:
// the result is always a sub-multiset of the true one.
ObservationVector observation_at(const Replay& r, std::uint32_t t, const NoiseSpec& noise);

// Samples n replays from the model: terminal tree from the prior, buildings
// in a deterministic prerequisite-respecting order, per-prefix times from
// the learned distributions (linear interpolation where a prefix has no
// entry), sorted to enforce monotonicity. Deterministic given seed.
std::vector<Replay> generate_synthetic_replays(const Model& model, std::size_t n,
                                               std::uint64_t seed);

}  // namespace btp
