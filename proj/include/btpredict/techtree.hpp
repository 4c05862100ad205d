#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "btpredict/errors.hpp"

namespace btp {

enum class Race : std::uint8_t { protoss, terran, zerg };

std::string_view to_string(Race race);
std::optional<Race> parse_race(std::string_view name);

struct BuildingType {
  std::uint32_t id = 0;
  std::string name;
  Race race = Race::protoss;
  std::vector<std::uint32_t> prerequisites;
  std::uint32_t max_count = 1;
};

// Sorted (id, count) pairs with zero counts omitted; this is the canonical
// form shared by build trees and observation vectors. Two equal multisets
// always compare (and serialize) identically.
class BuildingCounts {
 public:
  using Entry = std::pair<std::uint32_t, std::uint32_t>;

  BuildingCounts() = default;
  explicit BuildingCounts(std::vector<Entry> entries);

  std::uint32_t count(std::uint32_t id) const;
  void add(std::uint32_t id, std::uint32_t delta = 1);
  void set_count(std::uint32_t id, std::uint32_t count);

  // multiset cardinality (sum of counts)
  std::uint64_t total() const;
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  friend bool operator==(const BuildingCounts&, const BuildingCounts&) = default;
  friend auto operator<=>(const BuildingCounts&, const BuildingCounts&) = default;

 private:
  std::vector<Entry> entries_;
};

// A build tree is a BuildingCounts that is prerequisite-closed with respect
// to some dag (checked by is_valid_build_tree, not by the type: closure
// depends on the dag). Observation vectors need not be closed.
using BuildTree = BuildingCounts;
using ObservationVector = BuildingCounts;

// Game rules: the building types of one race and their prerequisite DAG.
// Immutable after construction; all operations are safe to call concurrently.
class TechDag {
 public:
  TechDag(Race race, std::vector<BuildingType> buildings);

  Race race() const { return race_; }
  std::size_t size() const { return buildings_.size(); }
  const std::vector<BuildingType>& buildings() const { return buildings_; }
  const BuildingType& building(std::uint32_t id) const;
  const std::vector<std::uint32_t>& roots() const { return roots_; }
  const std::vector<std::uint32_t>& topological_order() const { return topo_order_; }
  std::uint32_t topological_rank(std::uint32_t id) const { return topo_rank_[id]; }

  std::optional<std::uint32_t> find(std::string_view name) const;
  std::uint32_t require(std::string_view name) const;  // throws DagError

 private:
  Race race_;
  std::vector<BuildingType> buildings_;
  std::vector<std::uint32_t> roots_;
  std::vector<std::uint32_t> topo_order_;
  std::vector<std::uint32_t> topo_rank_;
  std::unordered_map<std::string, std::uint32_t> by_name_;
};

// Parses the line-oriented dag file format:
//   # comment
//   race <name>
//   building <name> [requires <name>[,<name>...]] [max <k>]
// Ids are assigned in file order starting at 0.
TechDag load_tech_dag(std::istream& in);

// True iff bt is prerequisite-closed and within per-building caps.
// Throws DagError when bt references an id outside the dag.
bool is_valid_build_tree(const TechDag& dag, const BuildTree& bt);

// All prerequisite-closed multisets over the dag, canonically sorted.
// Counts are capped at 1 unless allow_duplicates, then at max_count.
// Throws EnumerationLimitError when the domain exceeds `limit`.
std::vector<BuildTree> enumerate_build_trees(const TechDag& dag, bool allow_duplicates,
                                             std::uint64_t limit = 1'000'000);

// Multiset symmetric difference cardinality: sum over buildings of
// |count_a - count_b|. A metric on build trees.
std::uint64_t distance(const BuildTree& a, const BuildTree& b);

// The coherence filter: true iff bt covers every observed instance,
// i.e. obs.count(b) <= bt.count(b) for every building b.
bool compatible(const BuildTree& bt, const ObservationVector& obs);

// Canonical text form: names joined by ',' with ':<count>' when count > 1,
// in id order; the empty multiset is "-".
std::string to_string(const BuildingCounts& counts, const TechDag& dag);

// Inverse of to_string. Accepts "name[:count]" items in any order and
// re-canonicalizes. Rejects unknown names, duplicates and counts above
// the building's cap.
BuildingCounts parse_counts(std::string_view text, const TechDag& dag);

}  // namespace btp
